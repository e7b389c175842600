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

#include "lcf/matching.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace lcf {

std::vector<int> solve_assignment(const Eigen::MatrixXd& cost, double padding) {
  const Eigen::Index rows = cost.rows(), cols = cost.cols();
  if (!cost.allFinite()) throw std::invalid_argument("solve_assignment: non-finite cost");
  const Eigen::Index n = std::max(rows, cols);
  if (n == 0) return {};
  auto at = [&](Eigen::Index i, Eigen::Index j) {
    return (i < rows && j < cols) ? cost(i, j) : padding;
  };
  // Shortest augmenting paths with potentials (1-based, column 0 is the
  // virtual source).
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<Eigen::Index> match(n + 1, 0), way(n + 1, 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    match[0] = i;
    Eigen::Index j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const Eigen::Index i0 = match[j0];
      double delta = inf;
      Eigen::Index j1 = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const Eigen::Index j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> out(static_cast<std::size_t>(rows), -1);
  for (Eigen::Index j = 1; j <= n; ++j) {
    const Eigen::Index i = match[j] - 1;
    if (i < rows && j - 1 < cols) out[static_cast<std::size_t>(i)] = static_cast<int>(j - 1);
  }
  return out;
}

double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& rows_to_cols) {
  double total = 0.0;
  for (std::size_t i = 0; i < rows_to_cols.size(); ++i) {
    if (rows_to_cols[i] >= 0) total += cost(static_cast<Eigen::Index>(i), rows_to_cols[i]);
  }
  return total;
}

}  // namespace lcf
