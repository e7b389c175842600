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

#include <cstddef>
#include <functional>
#include <vector>

#include "lcf/tape.hpp"

namespace lcf {

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Builds the op under test on a fresh tape from leaf inputs. Non-scalar
/// outputs are sum-reduced before differentiation.
using TapeFn = std::function<Var(Tape&, const std::vector<Var>&)>;

/// Compares reverse-mode gradients against central differences in double
/// precision. Relative error is |analytic - numeric| / max(1, |numeric|).
/// When \p coordinates is non-empty only those (input, index) pairs are
/// perturbed. Throws std::domain_error on a non-finite forward value.
GradCheckReport grad_check(const TapeFn& fn, const std::vector<Tensor>& inputs, double tolerance,
                           double step = 1e-6,
                           const std::vector<std::pair<std::size_t, std::size_t>>& coordinates = {});

}  // namespace lcf
