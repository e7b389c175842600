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
#include <string>
#include <vector>

#include <json.hpp>

#include "lcf/config.hpp"
#include "lcf/dataset.hpp"
#include "lcf/params.hpp"

namespace lcf {

/// Hash of the model section; checkpoints carry it.
std::uint64_t model_hash(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

/// Command header shared by every report: command, version, config hash.
nlohmann::json report_header(const std::string& command, const RunConfig& cfg);

/// Writes cfg.data.num_scenes scenes generated from cfg.seed.
DatasetManifest cmd_generate(const RunConfig& cfg, const std::string& out_dir, bool force,
                             std::size_t threads = 1);

/// Scenes of a dataset whose simulator hash matches \p cfg; throws
/// std::runtime_error otherwise.
std::vector<SceneSample> load_compatible_dataset(const RunConfig& cfg, const std::string& dir);

struct TrainPaths {
  std::string dataset;
  std::string checkpoint;  // written at the end
  std::string log;         // JSON lines, one per step
  std::string resume;      // optional checkpoint to continue from
};

/// Trains up to cfg.train.steps total steps and returns a summary.
nlohmann::json cmd_train(const RunConfig& cfg, const TrainPaths& paths);

/// Parameters from \p checkpoint, or a fresh model when it is empty and
/// \p allow_fresh is set. Throws when the checkpoint does not match.
ParameterStore load_model(const RunConfig& cfg, const std::string& checkpoint, bool allow_fresh);

/// Detections per scene after applying \p scenario to each scene.
nlohmann::json cmd_infer(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
                         const ScenarioSpec& scenario, std::size_t threads = 1);

/// MetricsReport for one scenario with the report header, fusion mode and
/// scenario recorded. An empty checkpoint is accepted only with oracle
/// uncertainties.
nlohmann::json cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
                        const ScenarioSpec& scenario, std::size_t threads = 1);

/// Clean baseline plus every scenario in cfg.eval.scenarios, with the NDS
/// drop of each scenario relative to the clean run.
nlohmann::json cmd_robustness(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
                              std::size_t threads = 1);

/// Finite-difference suite over \p ops (all when empty).
nlohmann::json cmd_gradcheck(const RunConfig& cfg, std::size_t seeds, const std::vector<std::string>& ops = {});

}  // namespace lcf
