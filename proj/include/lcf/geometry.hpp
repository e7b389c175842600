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
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace lcf {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rigid3 = Eigen::Isometry3d;

// Frames: the reference frame at the current timestamp is right-handed
// Z-up with X pointing along the ego heading. Camera frames are X-right,
// Y-down, Z-forward.

/// Pinhole camera. \c extrinsics maps the ego reference frame into the
/// camera frame.
struct CameraView {
  Mat3 intrinsics = Mat3::Identity();
  Rigid3 extrinsics = Rigid3::Identity();
  int width = 0;
  int height = 0;

  /// Throws std::invalid_argument when focal lengths are not positive or
  /// the rotation is not a proper orthonormal matrix.
  void validate() const;
};

/// Views plus per-frame ego poses. Frame 0 is the current timestamp and
/// frame t lies t steps in the past; ego_poses[t] maps ego(t) to the
/// world frame.
struct CameraRig {
  std::vector<CameraView> views;
  std::vector<Rigid3> ego_poses{Rigid3::Identity()};

  std::size_t num_views() const { return views.size(); }
  std::size_t num_frames() const { return ego_poses.size(); }
  void validate() const;
};

struct Box3D {
  Vec3 center = Vec3::Zero();
  Vec3 size = Vec3::Ones();  // length (along heading), width, height
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
  int class_id = 0;
  double score = 1.0;
};

struct DetectionRange {
  double x_min = -54.0;
  double x_max = 54.0;
  double y_min = -54.0;
  double y_max = 54.0;
  double z_min = -5.0;
  double z_max = 3.0;

  Vec3 extent() const { return {x_max - x_min, y_max - y_min, z_max - z_min}; }
  bool contains(const Vec3& p) const;
  Vec3 clamp(const Vec3& p) const;
  void validate() const;
};

struct PixelDepth {
  double u = 0.0;
  double v = 0.0;
  double depth = 0.0;
};

/// Points closer than this along the optical axis are never hits.
inline constexpr double kMinHitDepth = 0.1;

/// Wraps to (-pi, pi].
double normalize_yaw(double yaw);

/// Lifts pixel center (cx, cy) at depth d into the reference frame.
Vec3 unproject_center(double cx, double cy, double depth, const CameraView& view);

/// Pinhole projection; empty when depth <= kMinHitDepth or the pixel
/// falls outside [0, W) x [0, H).
std::optional<PixelDepth> project_to_view(const Vec3& point, const CameraView& view);

/// Re-expresses a static point given in the ego frame of frame \p from in
/// the ego frame of frame \p to.
Vec3 transform_between_frames(const Vec3& point, const CameraRig& rig, std::size_t from,
                              std::size_t to);

/// Maps a point expressed in the current reference frame into the ego
/// frame of past frame t.
Vec3 align_temporal(const Vec3& point, const CameraRig& rig, std::size_t frame);

/// Views in which the point (current frame) is visible at frame t.
std::vector<std::size_t> hit_views(const Vec3& point, const CameraRig& rig, std::size_t frame);

/// Continuous BEV grid coordinates (x -> column, y -> row).
Vec2 project_to_bev(const Vec3& point, const DetectionRange& range, std::size_t cols,
                    std::size_t rows);

/// Corners of the yaw-rotated footprint, counter-clockwise.
std::array<Vec2, 4> bev_corners(const Box3D& box);

/// IoU of the yaw-rotated BEV rectangles.
double bev_rotated_iou(const Box3D& a, const Box3D& b);

/// Greedy NMS on rotated BEV IoU. Returns kept indices in descending score
/// order; ties break toward the lower index.
std::vector<std::size_t> nms_3d(std::span<const Box3D> boxes, double iou_threshold = 0.5);

}  // namespace lcf
