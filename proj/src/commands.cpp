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

#include "lcf/commands.hpp"

#include <exception>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "lcf/checkpoint.hpp"
#include "lcf/eval.hpp"
#include "lcf/gradient_suite.hpp"
#include "lcf/model.hpp"
#include "lcf/pipeline.hpp"
#include "lcf/scenario.hpp"

namespace lcf {

using nlohmann::json;

namespace {

constexpr std::uint64_t kInitStream = 3;
constexpr std::uint64_t kScenarioStream = 5;
constexpr std::uint64_t kGradStream = 6;

// Runs fn(i) for i in [0, n); results must be stored by index.
template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  for (std::size_t k = 0; k < threads; ++k) {
    pool.emplace_back([&, k] {
      try {
        for (std::size_t i = k; i < n; i += threads) fn(i);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (std::thread& t : pool) t.join();
  for (const std::exception_ptr& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

json box_json(const Box3D& b) {
  return {{"class", class_name(b.class_id)},
          {"score", b.score},
          {"center", {b.center.x(), b.center.y(), b.center.z()}},
          {"size", {b.size.x(), b.size.y(), b.size.z()}},
          {"yaw", b.yaw},
          {"velocity", {b.velocity.x(), b.velocity.y()}}};
}

ScenarioSpec seeded(const RunConfig& cfg, ScenarioSpec spec) {
  if (spec.seed == 0) spec.seed = mix_seed(cfg.seed, kScenarioStream);
  return spec;
}

std::vector<std::vector<Box3D>> predict_all(const RunConfig& cfg, const ParameterStore& store,
                                            const std::vector<SceneSample>& scenes, const ScenarioSpec& scenario,
                                            std::size_t threads) {
  const ScenarioSpec spec = seeded(cfg, scenario);
  if (spec.kind == ScenarioKind::kStuck && cfg.data.sim.num_frames < 2) {
    throw std::runtime_error("scenario 'stuck' needs a dataset with at least 2 frames");
  }
  std::vector<std::vector<Box3D>> out(scenes.size());
  parallel_for(scenes.size(), threads, [&](std::size_t i) {
    const SceneSample corrupted = apply_scenario(scenes[i], spec);
    out[i] = infer(store, corrupted, cfg.model, cfg.infer_config());
  });
  return out;
}

json evaluate_predictions(const RunConfig& cfg, const std::vector<SceneSample>& scenes,
                          const std::vector<std::vector<Box3D>>& preds) {
  std::vector<Detection> p, g;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    for (const Box3D& b : preds[i]) p.push_back({i, b});
    for (const Box3D& b : scenes[i].boxes) g.push_back({i, b});
  }
  EvalConfig metrics = cfg.eval.metrics;
  metrics.num_classes = cfg.model.num_classes;
  return to_json(evaluate(p, g, scenes.size(), metrics));
}

const char* fusion_label(FusionMode m) { return m == FusionMode::kEqual ? "equal" : "uaf"; }

}  // namespace

std::uint64_t model_hash(const RunConfig& cfg) { return json_hash(to_json(cfg)["model"]); }

std::uint64_t config_hash(const RunConfig& cfg) { return json_hash(to_json(cfg)); }

json report_header(const std::string& command, const RunConfig& cfg) {
  return {{"command", command}, {"version", version_string()}, {"config_hash", hex64(config_hash(cfg))}};
}

DatasetManifest cmd_generate(const RunConfig& cfg, const std::string& out_dir, bool force, std::size_t threads) {
  cfg.validate();
  const std::vector<SceneSample> scenes = generate_scenes(cfg.data.sim, cfg.seed, cfg.data.num_scenes, threads);
  write_dataset(out_dir, cfg.data.sim, cfg.seed, scenes, force);
  return read_manifest(out_dir);
}

std::vector<SceneSample> load_compatible_dataset(const RunConfig& cfg, const std::string& dir) {
  const DatasetManifest manifest = read_manifest(dir);
  const std::uint64_t expected = sim_config_hash(cfg.data.sim);
  if (manifest.config_hash != expected) {
    throw std::runtime_error("dataset " + dir + " was generated with config hash " + hex64(manifest.config_hash) +
                             " but the current data.sim section hashes to " + hex64(expected));
  }
  return read_dataset(dir, manifest);
}

ParameterStore load_model(const RunConfig& cfg, const std::string& checkpoint, bool allow_fresh) {
  Rng rng(mix_seed(cfg.seed, kInitStream));
  ParameterStore fresh = init_model(cfg.model, rng);
  if (checkpoint.empty()) {
    if (!allow_fresh) throw std::runtime_error("a checkpoint is required");
    return fresh;
  }
  CheckpointInfo info;
  ParameterStore store = load_checkpoint(checkpoint, &info);
  if (info.model_hash != model_hash(cfg)) {
    throw std::runtime_error("checkpoint " + checkpoint + " was trained with model hash " + hex64(info.model_hash) +
                             ", config has " + hex64(model_hash(cfg)));
  }
  check_same_layout(fresh, store);
  return store;
}

json cmd_train(const RunConfig& cfg, const TrainPaths& paths) {
  cfg.validate();
  const std::vector<SceneSample> scenes = load_compatible_dataset(cfg, paths.dataset);
  ParameterStore store = load_model(cfg, paths.resume, true);
  const std::uint64_t first = store.steps();

  std::ofstream log;
  if (!paths.log.empty()) {
    log.open(paths.log, paths.resume.empty() ? std::ios::trunc : std::ios::app);
    if (!log) throw std::runtime_error("cannot write " + paths.log);
  }
  LossTerms last;
  train(store, scenes, cfg.model, cfg.train_config(), [&](const TrainLogEntry& e) {
    last = e.terms;
    if (!log.is_open()) return;
    const json line = {{"step", e.step},
                       {"scenes", e.scene_ids},
                       {"loss",
                        {{"classification", e.terms.classification},
                         {"box", e.terms.box},
                         {"uncertainty", e.terms.uncertainty},
                         {"regression", e.terms.regression},
                         {"total", e.terms.total}}},
                       {"grad_norm", e.grad_norm}};
    log << line.dump() << '\n';
  });
  if (!paths.checkpoint.empty()) save_checkpoint(paths.checkpoint, store, model_hash(cfg));

  json out = report_header("train", cfg);
  out["first_step"] = first;
  out["steps"] = store.steps();
  out["num_scenes"] = scenes.size();
  out["final_loss"] = last.total;
  return out;
}

json cmd_infer(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
               const ScenarioSpec& scenario, std::size_t threads) {
  cfg.validate();
  const std::vector<SceneSample> scenes = load_compatible_dataset(cfg, dataset);
  const ParameterStore store = load_model(cfg, checkpoint, cfg.eval.oracle_uncertainty);
  const auto preds = predict_all(cfg, store, scenes, scenario, threads);
  json out = report_header("infer", cfg);
  out["scenario"] = scenario_name(scenario);
  out["fusion"] = fusion_label(cfg.eval.fusion);
  out["oracle_uncertainty"] = cfg.eval.oracle_uncertainty;
  json list = json::array();
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    json boxes = json::array();
    for (const Box3D& b : preds[i]) boxes.push_back(box_json(b));
    list.push_back({{"scene_id", scenes[i].scene_id}, {"detections", boxes}});
  }
  out["scenes"] = list;
  return out;
}

json cmd_eval(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
              const ScenarioSpec& scenario, std::size_t threads) {
  cfg.validate();
  const std::vector<SceneSample> scenes = load_compatible_dataset(cfg, dataset);
  const ParameterStore store = load_model(cfg, checkpoint, cfg.eval.oracle_uncertainty);
  json out = report_header("eval", cfg);
  out["scenario"] = scenario_name(scenario);
  out["fusion"] = fusion_label(cfg.eval.fusion);
  out["oracle_uncertainty"] = cfg.eval.oracle_uncertainty;
  out["metrics"] = evaluate_predictions(cfg, scenes, predict_all(cfg, store, scenes, scenario, threads));
  return out;
}

json cmd_robustness(const RunConfig& cfg, const std::string& checkpoint, const std::string& dataset,
                    std::size_t threads) {
  cfg.validate();
  const std::vector<SceneSample> scenes = load_compatible_dataset(cfg, dataset);
  const ParameterStore store = load_model(cfg, checkpoint, cfg.eval.oracle_uncertainty);
  json out = report_header("robustness", cfg);
  out["fusion"] = fusion_label(cfg.eval.fusion);
  out["oracle_uncertainty"] = cfg.eval.oracle_uncertainty;
  json reports = json::object();
  json drops = json::object();
  const json clean = evaluate_predictions(cfg, scenes, predict_all(cfg, store, scenes, ScenarioSpec::none(), threads));
  reports["clean"] = clean;
  for (const std::string& name : cfg.eval.scenarios) {
    const ScenarioSpec spec = parse_scenario(name, mix_seed(cfg.seed, kScenarioStream));
    const json r = evaluate_predictions(cfg, scenes, predict_all(cfg, store, scenes, spec, threads));
    drops[name] = clean["nds"].get<double>() - r["nds"].get<double>();
    reports[name] = r;
  }
  out["reports"] = reports;
  out["nds_drop"] = drops;
  return out;
}

json cmd_gradcheck(const RunConfig& cfg, std::size_t seeds, const std::vector<std::string>& ops) {
  json out = report_header("gradcheck", cfg);
  out["seeds"] = seeds;
  out["tolerance"] = 1e-4;
  json results = json::array();
  bool all = true;
  for (const std::string& op : ops.empty() ? gradient_suite_ops() : ops) {
    const GradSuiteResult r = run_gradient_check(op, seeds, mix_seed(cfg.seed, kGradStream));
    all = all && r.passed();
    results.push_back({{"op", r.op},
                       {"seeds", r.seeds},
                       {"failures", r.failures},
                       {"max_relative_error", r.max_relative_error},
                       {"worst_seed", r.worst_seed},
                       {"passed", r.passed()}});
  }
  out["ops"] = results;
  out["passed"] = all;
  return out;
}

}  // namespace lcf
