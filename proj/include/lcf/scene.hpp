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

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "lcf/feature_maps.hpp"
#include "lcf/geometry.hpp"
#include "lcf/random.hpp"

namespace lcf {

enum ObjectClass : int { kCar = 0, kPedestrian = 1, kBarrier = 2 };
inline constexpr int kNumClasses = 3;

const char* class_name(int class_id);
/// Mean (length, width, height) for a class.
Vec3 class_size_prior(int class_id);

struct SimConfig {
  // Sensors.
  std::size_t num_views = 4;
  std::size_t image_width = 256;
  std::size_t image_height = 128;
  double horizontal_fov_deg = 100.0;
  double camera_height = 1.6;
  std::vector<std::size_t> camera_strides{8, 16};
  std::size_t num_frames = 2;
  double frame_interval = 0.5;
  double ego_speed = 5.0;
  double lidar_height = 1.8;

  // Feature grids.
  std::size_t channels = 32;
  DetectionRange range;
  std::size_t bev_cells = 128;
  std::size_t bev_scales = 2;

  // Scene content.
  std::size_t min_objects = 1;
  std::size_t max_objects = 8;
  std::array<double, kNumClasses> class_mix{0.5, 0.3, 0.2};
  double min_distance = 4.0;
  double max_distance = 45.0;
  double lidar_density = 3000.0;  // points per m^2 at 1 m
  std::size_t clutter_points = 1500;
  double camera_noise = 0.02;
  int max_placement_retries = 200;

  void validate() const;
};

struct LidarPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double intensity = 0.0;
  int object = -1;  // index into the scene boxes, -1 for clutter
};

using PointCloud = std::vector<LidarPoint>;

struct SceneSample {
  std::uint64_t scene_id = 0;
  std::uint64_t seed = 0;
  double frame_interval = 0.5;
  std::vector<Box3D> boxes;          // current frame
  std::vector<PointCloud> points;    // per frame, in that frame's ego coordinates
  CameraRig rig;
  CameraFeatureSet camera;
  LidarFeaturePyramid lidar;
};

/// Ring of cameras at equal azimuth spacing; view 0 faces forward.
CameraRig make_surround_rig(const SimConfig& cfg);

/// Boxes moved back to frame t (constant velocity) in ego(t) coordinates.
std::vector<Box3D> boxes_at_frame(const SceneSample& scene, std::size_t frame);

/// Throws std::runtime_error when objects cannot be placed without overlap.
SceneSample generate_scene(const SimConfig& cfg, std::uint64_t scene_id, Rng& rng);

/// Points on sensor-facing box faces (density falling with squared range,
/// occluded samples removed) plus uniform ground clutter.
PointCloud lidar_points(const std::vector<Box3D>& boxes, const SimConfig& cfg, Rng& rng);

/// Number of per-cell hand features embedded into the BEV channels.
inline constexpr std::size_t kPillarFeatures = 5;

/// Pillar features (log count, max height, mean intensity, centroid
/// offsets) embedded linearly into C channels; coarser scales average-pool
/// 2x2 children.
LidarFeaturePyramid lidar_bev_features(const PointCloud& points, const DetectionRange& range,
                                       std::size_t cells, std::size_t scales,
                                       std::size_t channels);

/// Channel layout of the procedural camera features.
namespace camera_channel {
inline constexpr std::size_t kClass = 0;        // one-hot, kNumClasses wide
inline constexpr std::size_t kInverseDepth = 3;
inline constexpr std::size_t kLogSize = 4;      // l, w, h
inline constexpr std::size_t kHeading = 7;      // sin, cos
inline constexpr std::size_t kVelocity = 9;     // vx, vy
inline constexpr std::size_t kOffset = 11;      // offset to the blob center, texels
inline constexpr std::size_t kObjectness = 13;
inline constexpr std::size_t kPosition = 14;    // sinusoidal code of the center pixel
}  // namespace camera_channel

/// Gaussian blobs at projected object centers carrying class, inverse
/// depth, size, heading, velocity, sub-texel offset and positional code,
/// plus seeded additive noise.
CameraFeatureSet camera_features(const SceneSample& scene, const SimConfig& cfg, Rng& rng);

}  // namespace lcf
