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

#include <span>
#include <string>
#include <vector>

#include "lcf/geometry.hpp"
#include "lcf/params.hpp"

namespace lcf {

/// Row mean of RoI features: [N, S, C] -> [N, C].
Var pool_roi(Var roi);

/// 1 - exp(-d). Throws std::invalid_argument for negative or NaN d.
double uncertainty_from_distance(double distance);
Var uncertainty_from_distance(Var distance);

/// Distance predictor (prefix.dist, softplus output) and BEV position
/// regressor (prefix.reg) for one modality.
void add_uncertainty_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                            Rng& rng);

/// Non-negative predicted BEV error [N, 1] from pooled features [N, C].
Var predict_distance(const BoundParams& p, const std::string& prefix, Var pooled);

/// 1 - exp(-predicted distance) for RoI features [N, S, C]; output [N, 1].
Var predict_uncertainty(const BoundParams& p, const std::string& prefix, Var roi);

/// Moves BEV points [N, 2] by a residual [N, 2] of (log range, azimuth)
/// about the ego origin: xy' = exp(d0) * R(d1) * xy.
Var polar_shift(Var xy, Var delta);

/// BEV position [N, 2] regressed from pooled features as a residual on the
/// anchor positions [N, 2].
Var regress_position(const BoundParams& p, const std::string& prefix, Var pooled, Var anchors);

/// BEV distance from a regressed position to a ground-truth center.
double oracle_distance(const Vec2& regressed, const Box3D& gt);
double oracle_uncertainty(const Vec2& regressed, const Box3D& gt);

/// Per row of positions [N, 2]: distance to the nearest ground-truth center,
/// or \p missing when there is none.
std::vector<double> nearest_gt_distance(const Tensor& positions, std::span<const Box3D> gts,
                                        double missing = 1e3);

/// FFN 2C -> 2C -> C over the uncertainty-weighted concatenation.
void add_fusion_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                       Rng& rng);

/// camera, lidar [N, C]; u_camera, u_lidar [N, 1] in [0, 1).
Var fuse(const BoundParams& p, const std::string& prefix, Var camera, Var u_camera, Var lidar,
         Var u_lidar);

}  // namespace lcf
