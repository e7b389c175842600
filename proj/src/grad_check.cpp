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

#include "lcf/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "lcf/ops.hpp"

namespace lcf {
namespace {

double evaluate(const TapeFn& fn, const std::vector<Tensor>& inputs) {
  Tape tape(Precision::kDouble);
  std::vector<Var> leaves;
  leaves.reserve(inputs.size());
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var out = fn(tape, leaves);
  const double v = out.value().size() == 1 ? out.value()[0] : sum(out).value()[0];
  if (!std::isfinite(v)) throw std::domain_error("grad_check: non-finite forward value");
  return v;
}

}  // namespace

GradCheckReport grad_check(const TapeFn& fn, const std::vector<Tensor>& inputs, double tolerance,
                           double step,
                           const std::vector<std::pair<std::size_t, std::size_t>>& coordinates) {
  Tape tape(Precision::kDouble);
  std::vector<Var> leaves;
  for (const Tensor& t : inputs) leaves.push_back(tape.leaf(t));
  Var out = fn(tape, leaves);
  if (out.value().size() != 1) out = sum(out);
  if (!std::isfinite(out.value()[0])) {
    throw std::domain_error("grad_check: non-finite forward value");
  }
  tape.backward(out);
  std::vector<Tensor> analytic;
  for (const Var& leaf : leaves) analytic.push_back(tape.grad(leaf));

  GradCheckReport report;
  std::vector<Tensor> probe = inputs;
  auto check_one = [&](std::size_t i, std::size_t j) {
    const double orig = probe[i][j];
    probe[i][j] = orig + step;
    const double fp = evaluate(fn, probe);
    probe[i][j] = orig - step;
    const double fm = evaluate(fn, probe);
    probe[i][j] = orig;
    const double numeric = (fp - fm) / (2.0 * step);
    const double err = std::fabs(analytic[i][j] - numeric) / std::max(1.0, std::fabs(numeric));
    ++report.checked;
    if (err > report.max_relative_error || report.checked == 1) {
      report.max_relative_error = std::max(report.max_relative_error, err);
      if (err >= report.max_relative_error) {
        report.worst_input = i;
        report.worst_index = j;
      }
    }
  };
  if (coordinates.empty()) {
    for (std::size_t i = 0; i < probe.size(); ++i) {
      for (std::size_t j = 0; j < probe[i].size(); ++j) check_one(i, j);
    }
  } else {
    for (const auto& [i, j] : coordinates) check_one(i, j);
  }
  report.passed = report.max_relative_error <= tolerance;
  return report;
}

}  // namespace lcf
