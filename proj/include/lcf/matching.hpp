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

#include <vector>

#include <Eigen/Core>

namespace lcf {

/// Minimum-cost assignment for a rectangular cost matrix. The matrix is
/// padded to square with \p padding, so every row gets a column when
/// rows <= cols. Returns the column for each row, or -1 when the row was
/// assigned to padding.
std::vector<int> solve_assignment(const Eigen::MatrixXd& cost, double padding = 0.0);

/// Total cost of an assignment produced by solve_assignment (padding
/// entries excluded).
double assignment_cost(const Eigen::MatrixXd& cost, const std::vector<int>& rows_to_cols);

}  // namespace lcf
