// Copyright 2026 The lcfusion Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lcf/model.hpp"
#include "lcf/params.hpp"
#include "lcf/query_init.hpp"
#include "lcf/scene.hpp"

namespace lcf {

enum class OptimizerKind { kSgd, kAdam };

struct TrainConfig {
  std::size_t steps = 2000;
  std::size_t batch_size = 1;  // scenes averaged per step
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double learning_rate = 2e-3;
  double momentum = 0.9;
  double clip_norm = 5.0;
  LossWeights loss;
  QueryInitConfig queries;

  void validate() const;
};

struct TrainLogEntry {
  std::uint64_t step = 0;
  std::vector<std::uint64_t> scene_ids;
  LossTerms terms;
  double grad_norm = 0.0;
};

/// Index into the dataset of the \p draw-th scene visited. Scenes are
/// visited in a fresh seeded permutation every epoch.
std::size_t scene_for_step(std::size_t num_scenes, std::uint64_t seed, std::uint64_t draw);

/// One forward/backward/update on the mean loss over \p batch. The step
/// number keys the query noise so a run is a pure function of
/// (store, dataset, cfg).
TrainLogEntry train_step(ParameterStore& store, std::span<const SceneSample* const> batch,
                         const ModelConfig& model, const TrainConfig& cfg, std::uint64_t step);

/// Runs steps [store.steps(), cfg.steps). \p on_step sees every entry.
std::vector<TrainLogEntry> train(ParameterStore& store, std::span<const SceneSample> scenes,
                                 const ModelConfig& model, const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step = {});

struct InferConfig {
  QueryInitConfig queries;
  DecodeOptions decode;
  std::uint64_t seed = 0;
  double min_score = 0.0;
};

/// Final-layer detections for one scene, highest score first.
std::vector<Box3D> infer(const ParameterStore& store, const SceneSample& scene, const ModelConfig& model,
                         const InferConfig& cfg);

}  // namespace lcf
