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

namespace lcf {

struct GradSuiteResult {
  std::string op;
  std::size_t seeds = 0;
  std::size_t failures = 0;
  double max_relative_error = 0.0;
  std::uint64_t worst_seed = 0;
  double seconds = 0.0;

  bool passed() const { return failures == 0; }
};

/// bilinear_sample, layer_norm, softmax, adaptive_mix, sample_lidar,
/// sample_camera, predict_uncertainty, fuse, refine_box, compute_loss.
const std::vector<std::string>& gradient_suite_ops();

/// Central-difference check of \p op on \p seeds random instances in double
/// precision. Every output is contracted with random weights first so
/// invariant directions (softmax rows, layer-norm shifts) are still tested.
/// compute_loss runs on a 4-query, 2-object scene with one decoder layer.
/// Throws std::invalid_argument for an unknown op.
GradSuiteResult run_gradient_check(const std::string& op, std::size_t seeds, std::uint64_t base_seed,
                                   double tolerance = 1e-4);

}  // namespace lcf
