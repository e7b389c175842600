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

#include "lcf/scene.hpp"
#include "lcf/tensor.hpp"

namespace lcf {

inline constexpr int kDatasetFormatVersion = 1;

struct SceneEntry {
  std::uint64_t id = 0;
  std::uint64_t seed = 0;
  std::string dir;  // relative to the dataset root
};

struct DatasetManifest {
  int format_version = kDatasetFormatVersion;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;  // hash of the simulator config
  std::string version;
  nlohmann::json sim;
  std::vector<SceneEntry> scenes;
};

/// Hash stored in manifests; identical simulator settings give identical
/// hashes.
std::uint64_t sim_config_hash(const SimConfig& cfg);

/// Scene i is generated from its own substream of \p seed, so the result
/// does not depend on \p threads.
std::vector<SceneSample> generate_scenes(const SimConfig& cfg, std::uint64_t seed, std::size_t count,
                                         std::size_t threads = 1);

/// Blob layout: "LCFB", u32 version, u32 rank, u32 zero, u64 dims[rank],
/// then float32 values. Everything little-endian.
void write_blob(const std::string& path, const Tensor& t);
Tensor read_blob(const std::string& path);

void write_scene(const std::string& dir, const SceneSample& scene);
SceneSample read_scene(const std::string& dir);

/// Throws std::runtime_error when \p root exists and is not empty, unless
/// \p force is set and \p root already holds a dataset (which is replaced).
void write_dataset(const std::string& root, const SimConfig& cfg, std::uint64_t seed,
                   const std::vector<SceneSample>& scenes, bool force);
DatasetManifest read_manifest(const std::string& root);
std::vector<SceneSample> read_dataset(const std::string& root, const DatasetManifest& manifest);

}  // namespace lcf
