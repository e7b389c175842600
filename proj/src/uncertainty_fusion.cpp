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

#include "lcf/uncertainty_fusion.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace lcf {

Var pool_roi(Var roi) {
  if (roi.shape().size() != 3) {
    throw std::invalid_argument("pool_roi: expected [N, S, C], got " + shape_string(roi.shape()));
  }
  return mean(roi, 1);
}

double uncertainty_from_distance(double distance) {
  if (!(distance >= 0.0)) throw std::invalid_argument("uncertainty_from_distance: negative distance");
  return -std::expm1(-distance);
}

Var uncertainty_from_distance(Var distance) {
  return add_scalar(scale(exp(scale(distance, -1.0)), -1.0), 1.0);
}

void add_uncertainty_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                            Rng& rng) {
  add_feed_forward(store, prefix + ".dist", channels, channels, 1, rng);
  add_feed_forward(store, prefix + ".reg", channels, channels, 2, rng, true);
}

Var predict_distance(const BoundParams& p, const std::string& prefix, Var pooled) {
  return softplus(apply_feed_forward(p, prefix + ".dist", pooled));
}

Var predict_uncertainty(const BoundParams& p, const std::string& prefix, Var roi) {
  return uncertainty_from_distance(predict_distance(p, prefix, pool_roi(roi)));
}

Var polar_shift(Var xy, Var delta) {
  if (xy.shape().size() != 2 || xy.dim(1) != 2 || delta.shape() != xy.shape()) {
    throw std::invalid_argument("polar_shift: expected matching [N, 2] inputs");
  }
  Var radial = exp(slice(delta, 1, 0, 1));
  Var c = mul(radial, cos(slice(delta, 1, 1, 2)));
  Var s = mul(radial, sin(slice(delta, 1, 1, 2)));
  Var x = slice(xy, 1, 0, 1), y = slice(xy, 1, 1, 2);
  return concat({sub(mul(c, x), mul(s, y)), add(mul(s, x), mul(c, y))}, 1);
}

Var regress_position(const BoundParams& p, const std::string& prefix, Var pooled, Var anchors) {
  return polar_shift(anchors, apply_feed_forward(p, prefix + ".reg", pooled));
}

double oracle_distance(const Vec2& regressed, const Box3D& gt) {
  return (regressed - gt.center.head<2>()).norm();
}

double oracle_uncertainty(const Vec2& regressed, const Box3D& gt) {
  return uncertainty_from_distance(oracle_distance(regressed, gt));
}

std::vector<double> nearest_gt_distance(const Tensor& positions, std::span<const Box3D> gts,
                                        double missing) {
  const std::size_t n = positions.dim(0);
  std::vector<double> out(n, missing);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec2 xy(positions.at(i, 0), positions.at(i, 1));
    for (const Box3D& g : gts) out[i] = std::min(out[i], oracle_distance(xy, g));
  }
  return out;
}

void add_fusion_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                       Rng& rng) {
  add_feed_forward(store, prefix, 2 * channels, 2 * channels, channels, rng);
}

Var fuse(const BoundParams& p, const std::string& prefix, Var camera, Var u_camera, Var lidar,
         Var u_lidar) {
  Var cam = mul(camera, add_scalar(scale(u_camera, -1.0), 1.0));
  Var lid = mul(lidar, add_scalar(scale(u_lidar, -1.0), 1.0));
  return apply_feed_forward(p, prefix, concat({cam, lid}, 1));
}

}  // namespace lcf
