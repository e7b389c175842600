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
#include <span>
#include <vector>

#include "lcf/geometry.hpp"
#include "lcf/tensor.hpp"

namespace lcf {

/// Dense H x W x C grid.
struct FeatureMap {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  int scale_id = 0;
  Tensor data;  // [H, W, C]

  FeatureMap() = default;
  FeatureMap(std::size_t w, std::size_t h, std::size_t c, int scale = 0)
      : width(w), height(h), channels(c), scale_id(scale), data({h, w, c}) {}

  double* texel(std::size_t x, std::size_t y) { return data.raw() + (y * width + x) * channels; }
  const double* texel(std::size_t x, std::size_t y) const {
    return data.raw() + (y * width + x) * channels;
  }
};

/// Camera features indexed by (view, scale, frame). Scale m has texel
/// stride strides[m] in image pixels.
class CameraFeatureSet {
 public:
  CameraFeatureSet() = default;
  CameraFeatureSet(std::size_t views, std::vector<std::size_t> strides, std::size_t frames,
                   std::size_t image_width, std::size_t image_height, std::size_t channels);

  std::size_t num_views() const { return views_; }
  std::size_t num_scales() const { return strides_.size(); }
  std::size_t num_frames() const { return frames_; }
  std::size_t channels() const { return channels_; }
  std::size_t stride(std::size_t scale) const { return strides_.at(scale); }
  const std::vector<std::size_t>& strides() const { return strides_; }

  FeatureMap& at(std::size_t view, std::size_t scale, std::size_t frame);
  const FeatureMap& at(std::size_t view, std::size_t scale, std::size_t frame) const;

 private:
  std::size_t index(std::size_t view, std::size_t scale, std::size_t frame) const;

  std::size_t views_ = 0;
  std::vector<std::size_t> strides_;
  std::size_t frames_ = 0;
  std::size_t channels_ = 0;
  std::vector<FeatureMap> maps_;
};

/// BEV feature maps over one detection range; scale r has 2^r times fewer
/// cells per axis than scale 0.
class LidarFeaturePyramid {
 public:
  LidarFeaturePyramid() = default;
  LidarFeaturePyramid(DetectionRange range, std::size_t base_cells, std::size_t scales,
                      std::size_t channels);

  const DetectionRange& range() const { return range_; }
  std::size_t num_scales() const { return maps_.size(); }
  std::size_t channels() const { return channels_; }
  FeatureMap& at(std::size_t scale) { return maps_.at(scale); }
  const FeatureMap& at(std::size_t scale) const { return maps_.at(scale); }

 private:
  DetectionRange range_;
  std::size_t channels_ = 0;
  std::vector<FeatureMap> maps_;
};

/// Non-differentiable bilinear read (texel centers at i + 0.5, zero padding).
std::vector<double> bilinear_sample(const FeatureMap& map, const Vec2& coords);

/// Mean over the hit views of the sum over scales of bilinear samples at
/// the projection of \p point (current frame) into frame \p frame.
/// Throws std::invalid_argument when \p hits is empty.
std::vector<double> sample_view_scale_mean(const CameraFeatureSet& features, const Vec3& point,
                                           const CameraRig& rig, std::size_t frame,
                                           std::span<const std::size_t> hits);

}  // namespace lcf
