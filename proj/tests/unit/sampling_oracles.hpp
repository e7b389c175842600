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

// Loop-based references for the fused sampling kernels. They share nothing
// with the kernels except the geometry module: bilinear interpolation is a
// triangle-kernel sum over every texel of the map.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "lcf/geometry.hpp"
#include "lcf/random.hpp"
#include "lcf/tensor.hpp"

namespace lcf::testing {

inline double triangle(double d) { return std::max(0.0, 1.0 - std::fabs(d)); }

/// out += scale * map(x, y) with map [H, W, C].
inline void dense_sample(const Tensor& map, double x, double y, double scale, double* out) {
  const std::size_t h = map.dim(0), w = map.dim(1), c = map.dim(2);
  for (std::size_t j = 0; j < h; ++j) {
    const double wy = triangle(y - (static_cast<double>(j) + 0.5));
    if (wy == 0.0) continue;
    for (std::size_t i = 0; i < w; ++i) {
      const double wx = triangle(x - (static_cast<double>(i) + 0.5));
      if (wx == 0.0) continue;
      for (std::size_t ch = 0; ch < c; ++ch) out[ch] += scale * wx * wy * map[(j * w + i) * c + ch];
    }
  }
}

inline Tensor reference_sample_lidar(const Tensor& centers, const Tensor& offsets,
                                     const Tensor& weights, const std::vector<Tensor>& maps,
                                     const DetectionRange& range, std::size_t points) {
  const std::size_t n = centers.dim(0), scales = maps.size(), c = maps[0].dim(2);
  Tensor out({n, points, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < points; ++k) {
      for (std::size_t r = 0; r < scales; ++r) {
        const std::size_t g = r * points + k;
        const Vec3 p(centers.at(i, 0) + offsets[(i * scales * points + g) * 2],
                     centers.at(i, 1) + offsets[(i * scales * points + g) * 2 + 1], 0.0);
        const Vec2 xy = project_to_bev(p, range, maps[r].dim(1), maps[r].dim(0));
        dense_sample(maps[r], xy.x(), xy.y(), weights[i * scales * points + g],
                     out.raw() + (i * points + k) * c);
      }
    }
  }
  return out;
}

/// maps indexed (v * M + m) * T + t.
inline Tensor reference_sample_camera(const Tensor& centers, const Tensor& offsets,
                                      const Tensor& weights, const std::vector<Tensor>& maps,
                                      const CameraRig& rig, const std::vector<std::size_t>& strides,
                                      std::size_t points) {
  const std::size_t n = centers.dim(0), frames = rig.num_frames(), scales = strides.size();
  const std::size_t c = maps[0].dim(2);
  Tensor out({n, frames * points, c});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t t = 0; t < frames; ++t) {
      for (std::size_t k = 0; k < points; ++k) {
        const std::size_t row = t * points + k;
        const Vec3 p(centers.at(i, 0) + offsets[(i * frames * points + row) * 3],
                     centers.at(i, 1) + offsets[(i * frames * points + row) * 3 + 1],
                     centers.at(i, 2) + offsets[(i * frames * points + row) * 3 + 2]);
        const std::vector<std::size_t> hits = hit_views(p, rig, t);
        const Vec3 aligned = align_temporal(p, rig, t);
        for (std::size_t v : hits) {
          const auto px = project_to_view(aligned, rig.views[v]);
          for (std::size_t m = 0; m < scales; ++m) {
            const double s = static_cast<double>(strides[m]);
            const double w = weights[(i * frames + t) * scales * points + m * points + k];
            dense_sample(maps[(v * scales + m) * frames + t], px->u / s, px->v / s,
                         w / static_cast<double>(hits.size()), out.raw() + (i * frames * points + row) * c);
          }
        }
      }
    }
  }
  return out;
}

/// Random sampling instance: a small ring rig with ego motion, maps and a
/// normalized pattern whose samples mostly land in view.
struct CameraInstance {
  CameraRig rig;
  std::vector<std::size_t> strides;
  std::size_t points = 1;
  Tensor centers, offsets, weights;
  std::vector<Tensor> maps;
};

inline Tensor random_values(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

/// Each weight group of size \p group along the flat tensor sums to one.
inline Tensor random_simplex(Rng& rng, Shape shape, std::size_t group) {
  Tensor t(std::move(shape));
  for (std::size_t g = 0; g < t.size() / group; ++g) {
    double total = 0.0;
    for (std::size_t j = 0; j < group; ++j) total += (t[g * group + j] = rng.uniform(0.05, 1.0));
    for (std::size_t j = 0; j < group; ++j) t[g * group + j] /= total;
  }
  return t;
}

inline CameraInstance random_camera_instance(Rng& rng, std::size_t views, std::size_t scales,
                                             std::size_t frames, std::size_t points,
                                             std::size_t channels, std::size_t queries) {
  CameraInstance inst;
  inst.points = points;
  const int width = 40, height = 24;
  for (std::size_t v = 0; v < views; ++v) {
    const double yaw = 2.0 * std::numbers::pi * static_cast<double>(v) / static_cast<double>(views) +
                       rng.uniform(-0.1, 0.1);
    CameraView view;
    view.width = width;
    view.height = height;
    const double f = rng.uniform(15.0, 25.0);
    view.intrinsics << f, rng.uniform(-0.5, 0.5), width / 2.0 + rng.uniform(-2, 2), 0, f * rng.uniform(0.9, 1.1),
        height / 2.0 + rng.uniform(-2, 2), 0, 0, 1;
    Mat3 r;
    r.row(0) = Vec3(std::sin(yaw), -std::cos(yaw), 0.0);
    r.row(1) = Vec3(0.0, 0.0, -1.0);
    r.row(2) = Vec3(std::cos(yaw), std::sin(yaw), 0.0);
    view.extrinsics = Rigid3::Identity();
    view.extrinsics.linear() = r;
    view.extrinsics.translation() = -r * Vec3(rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), 1.5);
    inst.rig.views.push_back(view);
  }
  inst.rig.ego_poses.clear();
  for (std::size_t t = 0; t < frames; ++t) {
    Rigid3 pose = Rigid3::Identity();
    if (t > 0) {
      pose.linear() = Eigen::AngleAxisd(rng.uniform(-0.1, 0.1), Vec3::UnitZ()).toRotationMatrix();
      pose.translation() = Vec3(-1.5 * static_cast<double>(t), rng.uniform(-0.5, 0.5), 0.0);
    }
    inst.rig.ego_poses.push_back(pose);
  }
  const std::size_t stride_choices[3] = {1, 2, 4};
  for (std::size_t m = 0; m < scales; ++m) inst.strides.push_back(stride_choices[m % 3]);
  for (std::size_t v = 0; v < views; ++v) {
    for (std::size_t m = 0; m < scales; ++m) {
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t s = inst.strides[m];
        inst.maps.push_back(random_values(rng, {(height + s - 1) / s, (width + s - 1) / s, channels}));
      }
    }
  }
  inst.centers = Tensor({queries, 3});
  for (std::size_t i = 0; i < queries; ++i) {
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double d = rng.uniform(6.0, 15.0);
    inst.centers.at(i, 0) = d * std::cos(a);
    inst.centers.at(i, 1) = d * std::sin(a);
    inst.centers.at(i, 2) = rng.uniform(0.0, 2.0);
  }
  inst.offsets = random_values(rng, {queries, frames * points, 3}, -1.5, 1.5);
  inst.weights = random_simplex(rng, {queries, frames, scales * points}, scales * points);
  return inst;
}

struct LidarInstance {
  DetectionRange range;
  std::size_t points = 1;
  Tensor centers, offsets, weights;
  std::vector<Tensor> maps;
};

inline LidarInstance random_lidar_instance(Rng& rng, std::size_t scales, std::size_t points,
                                    std::size_t channels, std::size_t queries) {
  LidarInstance inst;
  inst.range.x_min = -20;
  inst.range.x_max = 20;
  inst.range.y_min = -16;
  inst.range.y_max = 16;
  inst.points = points;
  std::size_t cells = 16;
  for (std::size_t r = 0; r < scales; ++r, cells /= 2) {
    inst.maps.push_back(random_values(rng, {cells * 4 / 5, cells, channels}));
  }
  inst.centers = random_values(rng, {queries, 3}, -18, 18);
  inst.offsets = random_values(rng, {queries, scales * points, 2}, -3, 3);
  inst.weights = random_simplex(rng, {queries, scales * points}, scales * points);
  return inst;
}

}  // namespace lcf::testing
