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

#include "lcf/pipeline.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace lcf {

namespace {

constexpr std::uint64_t kShuffleStream = 1;
constexpr std::uint64_t kQueryStream = 2;

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw std::invalid_argument("train.learning_rate must be positive");
  if (momentum < 0.0 || momentum >= 1.0) throw std::invalid_argument("train.momentum must be in [0, 1)");
  if (clip_norm < 0.0) throw std::invalid_argument("train.clip_norm must be non-negative");
  if (batch_size == 0) throw std::invalid_argument("train.batch_size must be positive");
  queries.validate();
}

std::size_t scene_for_step(std::size_t num_scenes, std::uint64_t seed, std::uint64_t draw) {
  if (num_scenes == 0) throw std::invalid_argument("scene_for_step: empty dataset");
  const std::uint64_t epoch = draw / num_scenes;
  std::vector<std::size_t> order(num_scenes);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix_seed(mix_seed(seed, kShuffleStream), epoch));
  for (std::size_t i = num_scenes; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  return order[draw % num_scenes];
}

TrainLogEntry train_step(ParameterStore& store, std::span<const SceneSample* const> batch,
                         const ModelConfig& model, const TrainConfig& cfg, std::uint64_t step) {
  if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
  Tape tape(Precision::kDouble);
  BoundParams p(tape, store, true);
  TrainLogEntry entry;
  entry.step = step;
  std::vector<Var> totals;
  const double weight = 1.0 / static_cast<double>(batch.size());
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const SceneSample& scene = *batch[b];
    Rng qrng(mix_seed(mix_seed(cfg.seed, kQueryStream), step * batch.size() + b));
    const std::vector<Query> queries = generate_queries(scene, cfg.queries, qrng);
    const std::vector<LayerOutput> layers = decode(p, queries, scene.camera, scene.lidar, scene.rig, model);
    const Loss loss = compute_loss(layers, scene.boxes, cfg.loss);
    totals.push_back(scale(loss.total, weight));
    entry.scene_ids.push_back(scene.scene_id);
    entry.terms.classification += weight * loss.terms.classification;
    entry.terms.box += weight * loss.terms.box;
    entry.terms.uncertainty += weight * loss.terms.uncertainty;
    entry.terms.regression += weight * loss.terms.regression;
    entry.terms.total += weight * loss.terms.total;
  }
  Var total = totals.front();
  for (std::size_t b = 1; b < totals.size(); ++b) total = add(total, totals[b]);
  tape.backward(total);

  if (cfg.optimizer == OptimizerKind::kSgd) {
    entry.grad_norm = sgd_step(store, p, SgdConfig{cfg.learning_rate, cfg.momentum, cfg.clip_norm});
  } else {
    AdamConfig adam;
    adam.learning_rate = cfg.learning_rate;
    adam.beta1 = cfg.momentum;
    adam.clip_norm = cfg.clip_norm;
    entry.grad_norm = adam_step(store, p, adam);
  }
  return entry;
}

std::vector<TrainLogEntry> train(ParameterStore& store, std::span<const SceneSample> scenes,
                                 const ModelConfig& model, const TrainConfig& cfg,
                                 const std::function<void(const TrainLogEntry&)>& on_step) {
  cfg.validate();
  model.validate();
  std::vector<TrainLogEntry> log;
  for (std::uint64_t step = store.steps(); step < cfg.steps; ++step) {
    std::vector<const SceneSample*> batch;
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      batch.push_back(&scenes[scene_for_step(scenes.size(), cfg.seed, step * cfg.batch_size + b)]);
    }
    log.push_back(train_step(store, batch, model, cfg, step));
    if (on_step) on_step(log.back());
  }
  return log;
}

std::vector<Box3D> infer(const ParameterStore& store, const SceneSample& scene, const ModelConfig& model,
                         const InferConfig& cfg) {
  Rng qrng(mix_seed(mix_seed(cfg.seed, kQueryStream), scene.scene_id));
  const std::vector<Query> queries = generate_queries(scene, cfg.queries, qrng);
  Tape tape(Precision::kDouble);
  BoundParams p(tape, store, false);
  DecodeOptions options = cfg.decode;
  if (options.oracle_uncertainty) options.ground_truth = scene.boxes;
  const std::vector<LayerOutput> layers = decode(p, queries, scene.camera, scene.lidar, scene.rig, model, options);
  std::vector<Box3D> out;
  for (const Box3D& b : layers.back().boxes) {
    if (b.score >= cfg.min_score) out.push_back(b);
  }
  std::stable_sort(out.begin(), out.end(), [](const Box3D& a, const Box3D& b) { return a.score > b.score; });
  return out;
}

}  // namespace lcf
