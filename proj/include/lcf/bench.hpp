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
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lcf/config.hpp"

namespace lcf {

struct BenchOptions {
  std::size_t queries = 60;
  std::size_t repetitions = 50;  // timed, after warmup
  std::size_t warmup = 5;
  std::uint64_t seed = 1;
  /// Returns the process-wide allocation count; null when unavailable.
  std::function<std::uint64_t()> allocation_counter;
};

struct BenchReport {
  std::string kernel;
  std::size_t queries = 0;
  std::size_t points = 0;          // K
  std::size_t camera_scales = 0;   // M
  std::size_t lidar_scales = 0;    // R
  std::size_t frames = 0;          // T
  std::size_t channels = 0;        // C
  std::size_t views = 0;           // V
  std::size_t repetitions = 0;
  double mean = 0.0;  // seconds
  double p50 = 0.0;
  double p90 = 0.0;
  double p99 = 0.0;
  double queries_per_second = 0.0;  // at p50
  bool allocations_counted = false;
  double allocations_per_rep = 0.0;
  /// full_layer only: mean seconds per stage.
  std::vector<std::pair<std::string, double>> stages;
};

/// sample_lidar, sample_camera, adaptive_mix, full_layer.
const std::vector<std::string>& bench_kernels();

/// Times one kernel on a deterministic scene and query set; only the kernel
/// call is inside the timed region. Throws std::invalid_argument for an
/// unknown kernel or fewer than 30 repetitions.
BenchReport bench_kernel(const std::string& kernel, const RunConfig& cfg, const BenchOptions& options);

nlohmann::json to_json(const BenchReport& report);

/// Nearest-rank percentile of unsorted samples, q in [0, 100].
double percentile(std::vector<double> samples, double q);

}  // namespace lcf
