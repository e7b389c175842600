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

// lcfusion command-line driver.

#include <CLI11.hpp>

#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <new>
#include <string>
#include <vector>

#include "lcf/bench.hpp"
#include "lcf/commands.hpp"
#include "lcf/config.hpp"
#include "lcf/gradient_suite.hpp"

namespace {

std::atomic<std::uint64_t> g_allocations{0};

}  // namespace

void* operator new(std::size_t size) {
  g_allocations.fetch_add(1, std::memory_order_relaxed);
  if (void* p = std::malloc(size ? size : 1)) return p;
  throw std::bad_alloc();
}
void operator delete(void* p) noexcept { std::free(p); }
void operator delete(void* p, std::size_t) noexcept { std::free(p); }

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitFailure = 1;

struct Common {
  std::string config;
  std::vector<std::string> sets;
  std::string seed;
  std::string out;
  std::size_t threads = 1;
};

struct EvalFlags {
  std::string checkpoint;
  std::string dataset;
  std::string scenario;
  std::string fusion;
  bool oracle = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "JSON run config");
  cmd->add_option("--set", c.sets, "Override a config leaf, e.g. train.steps=100");
  cmd->add_option("--seed", c.seed, "Master seed (overrides the config)");
  cmd->add_option("--out", c.out, "Output path");
  cmd->add_option("--threads", c.threads, "Worker threads for per-scene work")->check(CLI::PositiveNumber);
}

void add_eval_flags(CLI::App* cmd, EvalFlags& e, bool scenario) {
  cmd->add_option("--checkpoint", e.checkpoint, "Model checkpoint (default io.checkpoint)");
  cmd->add_option("--dataset", e.dataset, "Dataset directory (default io.dataset)");
  if (scenario) cmd->add_option("--scenario", e.scenario, "none, fov120, fov180, object_failure, front_occlusion, stuck");
  cmd->add_option("--fusion", e.fusion, "uaf or equal")->check(CLI::IsMember({"uaf", "equal"}));
  cmd->add_flag("--oracle-uncertainty", e.oracle, "Use distances to ground truth as uncertainties");
}

lcf::RunConfig load(const Common& c, std::vector<std::string> extra = {}) {
  std::vector<std::string> sets = c.sets;
  if (!c.seed.empty()) sets.push_back("seed=" + c.seed);
  sets.insert(sets.end(), extra.begin(), extra.end());
  return lcf::load_run_config(c.config, sets);
}

std::vector<std::string> eval_overrides(const EvalFlags& e) {
  std::vector<std::string> sets;
  if (!e.fusion.empty()) sets.push_back("eval.fusion=" + e.fusion);
  if (e.oracle) sets.push_back("eval.oracle_uncertainty=true");
  return sets;
}

void emit(const nlohmann::json& doc, const std::string& path) {
  const std::string text = doc.dump(2) + "\n";
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string or_default(const std::string& value, const std::string& fallback) {
  return value.empty() ? fallback : value;
}

lcf::ScenarioSpec scenario_for(const lcf::RunConfig& cfg, const std::string& name) {
  if (name.empty()) return cfg.scenario;
  try {
    return lcf::parse_scenario(name, 0);
  } catch (const std::invalid_argument& e) {
    throw lcf::ConfigError(e.what());
  }
}

// An empty checkpoint is only allowed with oracle uncertainties.
std::string checkpoint_for(const lcf::RunConfig& cfg, const EvalFlags& e) {
  if (!e.checkpoint.empty()) return e.checkpoint;
  if (cfg.eval.oracle_uncertainty && !std::ifstream(cfg.io.checkpoint)) return "";
  return cfg.io.checkpoint;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Camera-LiDAR query decoder toolkit: simulate, train, evaluate, benchmark"};
  app.require_subcommand(1);
  app.set_version_flag("--version", lcf::version_string());

  Common common;
  EvalFlags ev;
  bool force = false;
  std::string log_path, resume;
  std::size_t seeds = 100, queries = 60, reps = 50;
  std::vector<std::string> ops, kernels;

  CLI::App* generate = app.add_subcommand("generate", "Write a simulated dataset");
  add_common(generate, common);
  generate->add_flag("--force", force, "Replace an existing dataset");

  CLI::App* train = app.add_subcommand("train", "Train on a dataset and write a checkpoint");
  add_common(train, common);
  train->add_option("--dataset", ev.dataset, "Dataset directory (default io.dataset)");
  train->add_option("--log", log_path, "Training log, JSON lines (default io.train_log)");
  train->add_option("--resume", resume, "Continue from this checkpoint");

  CLI::App* infer = app.add_subcommand("infer", "Write detections for every scene");
  add_common(infer, common);
  add_eval_flags(infer, ev, true);

  CLI::App* eval = app.add_subcommand("eval", "Evaluate one scenario");
  add_common(eval, common);
  add_eval_flags(eval, ev, true);

  CLI::App* robustness = app.add_subcommand("robustness", "Evaluate the clean set and every configured scenario");
  add_common(robustness, common);
  add_eval_flags(robustness, ev, false);

  CLI::App* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient suite");
  add_common(gradcheck, common);
  gradcheck->add_option("--seeds", seeds, "Random instances per op")->check(CLI::PositiveNumber);
  gradcheck->add_option("--op", ops, "Restrict to these ops")->check(CLI::IsMember(lcf::gradient_suite_ops()));

  CLI::App* bench = app.add_subcommand("bench", "Time the sampling and mixing kernels");
  add_common(bench, common);
  bench->add_option("--kernel", kernels, "sample_lidar, sample_camera, adaptive_mix, full_layer (default all)")
      ->check(CLI::IsMember(lcf::bench_kernels()));
  bench->add_option("--queries", queries, "Number of queries")->check(CLI::PositiveNumber);
  bench->add_option("--reps", reps, "Timed repetitions (>= 30)")->check(CLI::Range(30, 1000000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (generate->parsed()) {
      const lcf::RunConfig cfg = load(common);
      const std::string out = or_default(common.out, cfg.io.dataset);
      const lcf::DatasetManifest m = lcf::cmd_generate(cfg, out, force, common.threads);
      std::printf("wrote %zu scenes to %s (config %s, seed %llu)\n", m.scenes.size(), out.c_str(),
                  lcf::hex64(m.config_hash).c_str(), static_cast<unsigned long long>(m.seed));
    } else if (train->parsed()) {
      const lcf::RunConfig cfg = load(common);
      lcf::TrainPaths paths;
      paths.dataset = or_default(ev.dataset, cfg.io.dataset);
      paths.checkpoint = or_default(common.out, cfg.io.checkpoint);
      paths.log = or_default(log_path, cfg.io.train_log);
      paths.resume = resume;
      emit(lcf::cmd_train(cfg, paths), "");
    } else if (infer->parsed() || eval->parsed()) {
      const lcf::RunConfig cfg = load(common, eval_overrides(ev));
      const lcf::ScenarioSpec scenario = scenario_for(cfg, ev.scenario);
      const std::string dataset = or_default(ev.dataset, cfg.io.dataset);
      const std::string ckpt = checkpoint_for(cfg, ev);
      const nlohmann::json doc = infer->parsed() ? lcf::cmd_infer(cfg, ckpt, dataset, scenario, common.threads)
                                                 : lcf::cmd_eval(cfg, ckpt, dataset, scenario, common.threads);
      emit(doc, or_default(common.out, cfg.io.output));
    } else if (robustness->parsed()) {
      const lcf::RunConfig cfg = load(common, eval_overrides(ev));
      const nlohmann::json doc = lcf::cmd_robustness(cfg, checkpoint_for(cfg, ev),
                                                     or_default(ev.dataset, cfg.io.dataset), common.threads);
      emit(doc, or_default(common.out, cfg.io.output));
    } else if (gradcheck->parsed()) {
      const lcf::RunConfig cfg = load(common);
      const nlohmann::json doc = lcf::cmd_gradcheck(cfg, seeds, ops);
      emit(doc, common.out);
      if (!doc["passed"].get<bool>()) return kExitFailure;
    } else if (bench->parsed()) {
      const lcf::RunConfig cfg = load(common);
      lcf::BenchOptions options;
      options.queries = queries;
      options.repetitions = reps;
      options.seed = cfg.seed;
      options.allocation_counter = [] { return g_allocations.load(std::memory_order_relaxed); };
      nlohmann::json doc = lcf::report_header("bench", cfg);
      nlohmann::json reports = nlohmann::json::array();
      for (const std::string& k : kernels.empty() ? lcf::bench_kernels() : kernels) {
        reports.push_back(lcf::to_json(lcf::bench_kernel(k, cfg, options)));
      }
      doc["kernels"] = reports;
      emit(doc, common.out);
    }
  } catch (const lcf::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitFailure;
  }
  return 0;
}
