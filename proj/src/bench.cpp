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

#include "lcf/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "lcf/model.hpp"
#include "lcf/query_init.hpp"
#include "lcf/roi_sampling.hpp"
#include "lcf/scene.hpp"

namespace lcf {

namespace {

using Clock = std::chrono::steady_clock;

struct Fixture {
  SceneSample scene;
  std::vector<Query> queries;
  std::vector<Box3D> boxes;
  ParameterStore store;
};

Fixture make_fixture(const RunConfig& cfg, const BenchOptions& options) {
  Fixture f;
  Rng scene_rng(mix_seed(options.seed, 1));
  SimConfig sim = cfg.data.sim;
  sim.min_objects = sim.max_objects;
  f.scene = generate_scene(sim, 0, scene_rng);
  QueryInitConfig qc = cfg.queries;
  qc.num_queries = options.queries;
  qc.num_proposals = std::min(qc.num_proposals, options.queries);
  Rng query_rng(mix_seed(options.seed, 2));
  f.queries = generate_queries(f.scene, qc, query_rng);
  for (const Query& q : f.queries) f.boxes.push_back(q.box);
  Rng param_rng(mix_seed(options.seed, 3));
  f.store = init_model(cfg.model, param_rng);
  return f;
}

// Per-rep state built outside the timed region.
struct Rep {
  Tape tape{Precision::kSingle};
  BoundParams params;
  Var features;
  Var centers;
  std::vector<Var> camera_maps;
  std::vector<Var> lidar_maps;

  Rep(const Fixture& f, const ModelConfig& model) : params(tape, f.store, false) {
    for (const std::string& name : f.store.names()) {
      if (name.rfind("layer0.", 0) == 0) params(name);
    }
    features = query_features(params, f.queries, model.channels());
    Tensor c({f.boxes.size(), 3});
    for (std::size_t i = 0; i < f.boxes.size(); ++i) {
      for (int a = 0; a < 3; ++a) c.at(i, a) = f.boxes[i].center[a];
    }
    centers = tape.constant(std::move(c));
    camera_maps = camera_map_vars(tape, f.scene.camera);
    lidar_maps = lidar_map_vars(tape, f.scene.lidar);
  }
};

}  // namespace

const std::vector<std::string>& bench_kernels() {
  static const std::vector<std::string> names = {"sample_lidar", "sample_camera", "adaptive_mix", "full_layer"};
  return names;
}

double percentile(std::vector<double> samples, double q) {
  if (samples.empty()) throw std::invalid_argument("percentile of an empty sample");
  std::sort(samples.begin(), samples.end());
  const double rank = std::ceil(q / 100.0 * static_cast<double>(samples.size()));
  const std::size_t idx = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(samples.size())));
  return samples[idx - 1];
}

BenchReport bench_kernel(const std::string& kernel, const RunConfig& cfg, const BenchOptions& options) {
  if (std::find(bench_kernels().begin(), bench_kernels().end(), kernel) == bench_kernels().end()) {
    throw std::invalid_argument("unknown bench kernel '" + kernel + "'");
  }
  if (options.repetitions < 30) throw std::invalid_argument("bench needs at least 30 repetitions");
  if (options.queries == 0) throw std::invalid_argument("bench needs at least one query");
  cfg.validate();
  const Fixture f = make_fixture(cfg, options);
  const ModelConfig& model = cfg.model;
  const RoiSamplingConfig& s = model.sampling;

  BenchReport report;
  report.kernel = kernel;
  report.queries = f.queries.size();
  report.points = s.points;
  report.camera_scales = s.camera_scales;
  report.lidar_scales = s.lidar_scales;
  report.frames = s.frames;
  report.channels = s.channels;
  report.views = cfg.data.sim.num_views;
  report.repetitions = options.repetitions;
  report.allocations_counted = static_cast<bool>(options.allocation_counter);

  LayerProfile profile;
  std::vector<double> times;
  std::uint64_t allocations = 0;
  for (std::size_t rep = 0; rep < options.warmup + options.repetitions; ++rep) {
    const bool timed = rep >= options.warmup;
    if (rep == options.warmup) profile = LayerProfile{};
    Rep r(f, model);
    // Inputs of the kernel under test, built before the clock starts.
    SamplingPattern lp, cp;
    Var roi;
    if (kernel != "full_layer") {
      lp = predict_pattern(r.params, "layer0.lidar.pattern", r.features, f.boxes, s, Modality::kLidar);
      cp = predict_pattern(r.params, "layer0.camera.pattern", r.features, f.boxes, s, Modality::kCamera);
      if (kernel == "adaptive_mix") roi = sample_camera(r.centers, cp, r.camera_maps, f.scene.rig, f.scene.camera.strides(), s.points);
    }
    DecodeOptions decode;
    decode.profile = timed ? &profile : nullptr;

    const std::uint64_t alloc_before = report.allocations_counted ? options.allocation_counter() : 0;
    const auto start = Clock::now();
    if (kernel == "sample_lidar") {
      sample_lidar(r.centers, lp, r.lidar_maps, model.range, s.points);
    } else if (kernel == "sample_camera") {
      sample_camera(r.centers, cp, r.camera_maps, f.scene.rig, f.scene.camera.strides(), s.points);
    } else if (kernel == "adaptive_mix") {
      adaptive_mix(r.params, "layer0.camera.mix", r.features, roi);
    } else {
      decode_layer(r.params, 0, r.features, f.boxes, r.camera_maps, r.lidar_maps, f.scene.rig,
                   f.scene.camera.strides(), model, decode);
    }
    const double elapsed = std::chrono::duration<double>(Clock::now() - start).count();
    const std::uint64_t alloc_after = report.allocations_counted ? options.allocation_counter() : 0;
    if (timed) {
      times.push_back(elapsed);
      allocations += alloc_after - alloc_before;
    }
  }

  const double n = static_cast<double>(times.size());
  report.mean = std::accumulate(times.begin(), times.end(), 0.0) / n;
  report.p50 = percentile(times, 50.0);
  report.p90 = percentile(times, 90.0);
  report.p99 = percentile(times, 99.0);
  report.queries_per_second = static_cast<double>(report.queries) / report.p50;
  report.allocations_per_rep = static_cast<double>(allocations) / n;
  if (kernel == "full_layer") {
    report.stages = {{"pattern", profile.pattern / n},         {"sample_lidar", profile.sample_lidar / n},
                     {"sample_camera", profile.sample_camera / n}, {"mix", profile.mix / n},
                     {"fusion", profile.fusion / n},           {"heads", profile.heads / n}};
  }
  return report;
}

nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json stages = nlohmann::json::object();
  for (const auto& [name, seconds] : r.stages) stages[name] = seconds;
  nlohmann::json out = {
      {"kernel", r.kernel},
      {"config",
       {{"queries", r.queries},
        {"points", r.points},
        {"camera_scales", r.camera_scales},
        {"lidar_scales", r.lidar_scales},
        {"frames", r.frames},
        {"channels", r.channels},
        {"views", r.views}}},
      {"repetitions", r.repetitions},
      {"seconds", {{"mean", r.mean}, {"p50", r.p50}, {"p90", r.p90}, {"p99", r.p99}}},
      {"queries_per_second", r.queries_per_second},
      {"allocations_per_rep", r.allocations_counted ? nlohmann::json(r.allocations_per_rep) : nlohmann::json()}};
  if (!r.stages.empty()) out["stages"] = stages;
  return out;
}

}  // namespace lcf
