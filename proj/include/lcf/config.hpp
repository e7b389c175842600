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
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lcf/eval.hpp"
#include "lcf/model.hpp"
#include "lcf/pipeline.hpp"
#include "lcf/scenario.hpp"
#include "lcf/scene.hpp"

namespace lcf {

/// Invalid or unknown configuration. The message names the offending key.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DataConfig {
  std::size_t num_scenes = 64;
  SimConfig sim;
};

struct EvalSection {
  EvalConfig metrics;
  FusionMode fusion = FusionMode::kUncertainty;
  bool oracle_uncertainty = false;
  double min_score = 0.0;
  std::vector<std::string> scenarios{"fov120", "fov180", "object_failure", "front_occlusion", "stuck"};
};

struct IoConfig {
  std::string dataset = "data/train";
  std::string checkpoint = "model.ckpt";
  std::string train_log = "train_log.jsonl";
  std::string output = "report.json";
};

struct RunConfig {
  std::uint64_t seed = 7;
  ModelConfig model;
  QueryInitConfig queries;
  DataConfig data;
  TrainConfig train;
  EvalSection eval;
  ScenarioSpec scenario;
  IoConfig io;

  RunConfig();
  /// Throws ConfigError when any section is invalid or the sections
  /// disagree (channels, scales, frames, range).
  void validate() const;
  /// Training settings with the shared seed and query settings filled in.
  TrainConfig train_config() const;
  InferConfig infer_config() const;
};

nlohmann::json to_json(const RunConfig& cfg);
nlohmann::json to_json(const SimConfig& cfg);
nlohmann::json to_json(const ScenarioSpec& spec);
/// Strict: every key must be known. Missing keys keep their defaults.
RunConfig run_config_from_json(const nlohmann::json& doc);

/// Reads a JSON file, applies "a.b.c=value" overrides (value parsed as
/// JSON, else taken as a string) and validates.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);
/// Replaces one existing leaf of \p doc; unknown paths throw ConfigError.
void apply_override(nlohmann::json& doc, std::string_view assignment);

std::uint64_t fnv1a64(std::string_view bytes);
/// Hash of the canonical (sorted, round-trip) JSON text.
std::uint64_t json_hash(const nlohmann::json& doc);
std::string hex64(std::uint64_t value);

/// Build version, git-describe style when available.
const char* version_string();

}  // namespace lcf
