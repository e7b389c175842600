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

#include "lcf/feature_maps.hpp"

#include <stdexcept>

#include "lcf/bilinear.hpp"

namespace lcf {

CameraFeatureSet::CameraFeatureSet(std::size_t views, std::vector<std::size_t> strides,
                                   std::size_t frames, std::size_t image_width,
                                   std::size_t image_height, std::size_t channels)
    : views_(views), strides_(std::move(strides)), frames_(frames), channels_(channels) {
  maps_.reserve(views_ * strides_.size() * frames_);
  for (std::size_t v = 0; v < views_; ++v) {
    for (std::size_t m = 0; m < strides_.size(); ++m) {
      for (std::size_t t = 0; t < frames_; ++t) {
        const std::size_t s = strides_[m];
        maps_.emplace_back((image_width + s - 1) / s, (image_height + s - 1) / s, channels,
                           static_cast<int>(m));
      }
    }
  }
}

std::size_t CameraFeatureSet::index(std::size_t view, std::size_t scale, std::size_t frame) const {
  if (view >= views_ || scale >= strides_.size() || frame >= frames_) {
    throw std::out_of_range("camera feature index out of range");
  }
  return (view * strides_.size() + scale) * frames_ + frame;
}

FeatureMap& CameraFeatureSet::at(std::size_t view, std::size_t scale, std::size_t frame) {
  return maps_[index(view, scale, frame)];
}

const FeatureMap& CameraFeatureSet::at(std::size_t view, std::size_t scale,
                                       std::size_t frame) const {
  return maps_[index(view, scale, frame)];
}

LidarFeaturePyramid::LidarFeaturePyramid(DetectionRange range, std::size_t base_cells,
                                         std::size_t scales, std::size_t channels)
    : range_(range), channels_(channels) {
  range_.validate();
  for (std::size_t r = 0; r < scales; ++r) {
    const std::size_t cells = base_cells >> r;
    if (cells == 0) throw std::invalid_argument("too many BEV scales for the grid size");
    maps_.emplace_back(cells, cells, channels, static_cast<int>(r));
  }
}

std::vector<double> bilinear_sample(const FeatureMap& map, const Vec2& coords) {
  std::vector<double> out(map.channels, 0.0);
  const auto taps = kernels::bilinear_taps(coords.x(), coords.y(), map.width, map.height);
  kernels::bilinear_accumulate(map.data.raw(), map.channels, taps, 1.0, out.data());
  return out;
}

std::vector<double> sample_view_scale_mean(const CameraFeatureSet& features, const Vec3& point,
                                           const CameraRig& rig, std::size_t frame,
                                           std::span<const std::size_t> hits) {
  if (hits.empty()) throw std::invalid_argument("sample_view_scale_mean: empty hit set");
  const Vec3 aligned = align_temporal(point, rig, frame);
  std::vector<double> out(features.channels(), 0.0);
  const double inv = 1.0 / static_cast<double>(hits.size());
  for (std::size_t v : hits) {
    const Vec3 cam = rig.views.at(v).extrinsics * aligned;
    const Vec3 pix = rig.views[v].intrinsics * cam;
    const double u = pix.x() / cam.z();
    const double w = pix.y() / cam.z();
    for (std::size_t m = 0; m < features.num_scales(); ++m) {
      const FeatureMap& map = features.at(v, m, frame);
      const double s = static_cast<double>(features.stride(m));
      const auto taps = kernels::bilinear_taps(u / s, w / s, map.width, map.height);
      kernels::bilinear_accumulate(map.data.raw(), map.channels, taps, inv, out.data());
    }
  }
  return out;
}

}  // namespace lcf
