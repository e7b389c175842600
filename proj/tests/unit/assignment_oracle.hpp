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

#include <algorithm>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace lcf::testing {

inline double brute_force_assignment(const Eigen::MatrixXd& cost) {
  // Rows <= cols: try every injective map by permuting columns.
  std::vector<int> cols(static_cast<std::size_t>(cost.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = 1e300;
  do {
    double total = 0;
    for (Eigen::Index i = 0; i < cost.rows(); ++i) total += cost(i, cols[static_cast<std::size_t>(i)]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

}  // namespace lcf::testing
