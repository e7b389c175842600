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

#include "lcf/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>

namespace lcf {
namespace {

using Polygon = std::vector<Vec2>;

double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

double polygon_area(const Polygon& poly) {
  double area = 0.0;
  for (std::size_t i = 0; i < poly.size(); ++i) {
    area += cross(poly[i], poly[(i + 1) % poly.size()]);
  }
  return 0.5 * std::fabs(area);
}

// Sutherland-Hodgman against each edge of a convex CCW clip polygon.
Polygon clip_convex(Polygon subject, const std::array<Vec2, 4>& clip) {
  for (std::size_t e = 0; e < clip.size() && !subject.empty(); ++e) {
    const Vec2& a = clip[e];
    const Vec2& b = clip[(e + 1) % clip.size()];
    const Vec2 edge = b - a;
    auto side = [&](const Vec2& p) { return cross(edge, p - a); };
    Polygon out;
    out.reserve(subject.size() + 2);
    for (std::size_t i = 0; i < subject.size(); ++i) {
      const Vec2& cur = subject[i];
      const Vec2& nxt = subject[(i + 1) % subject.size()];
      const double sc = side(cur);
      const double sn = side(nxt);
      if (sc >= 0.0) out.push_back(cur);
      if ((sc >= 0.0) != (sn >= 0.0)) {
        const double t = sc / (sc - sn);
        out.push_back(cur + t * (nxt - cur));
      }
    }
    subject = std::move(out);
  }
  return subject;
}

}  // namespace

void CameraView::validate() const {
  if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
    throw std::invalid_argument("camera focal lengths must be positive");
  }
  if (width <= 0 || height <= 0) throw std::invalid_argument("camera image size must be positive");
  const Mat3 r = extrinsics.linear();
  if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::fabs(r.determinant() - 1.0) > 1e-9) {
    throw std::invalid_argument("camera rotation is not a proper rotation");
  }
}

void CameraRig::validate() const {
  if (views.empty()) throw std::invalid_argument("camera rig has no views");
  if (ego_poses.empty()) throw std::invalid_argument("camera rig has no ego poses");
  for (const CameraView& v : views) v.validate();
  for (const Rigid3& pose : ego_poses) {
    const Mat3 r = pose.linear();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9) {
      throw std::invalid_argument("ego pose is not rigid");
    }
  }
}

bool DetectionRange::contains(const Vec3& p) const {
  return p.x() >= x_min && p.x() <= x_max && p.y() >= y_min && p.y() <= y_max &&
         p.z() >= z_min && p.z() <= z_max;
}

Vec3 DetectionRange::clamp(const Vec3& p) const {
  return {std::clamp(p.x(), x_min, x_max), std::clamp(p.y(), y_min, y_max),
          std::clamp(p.z(), z_min, z_max)};
}

void DetectionRange::validate() const {
  if (!(x_min < x_max) || !(y_min < y_max) || !(z_min < z_max)) {
    throw std::invalid_argument("detection range must satisfy min < max on every axis");
  }
}

double normalize_yaw(double yaw) {
  constexpr double kPi = std::numbers::pi;
  double y = std::fmod(yaw + kPi, 2.0 * kPi);
  if (y < 0.0) y += 2.0 * kPi;
  y -= kPi;
  return y == -kPi ? kPi : y;
}

Vec3 unproject_center(double cx, double cy, double depth, const CameraView& view) {
  if (std::fabs(view.intrinsics.determinant()) < 1e-300) {
    throw std::invalid_argument("unproject_center: singular intrinsics");
  }
  const Vec3 cam = view.intrinsics.inverse() * Vec3(cx * depth, cy * depth, depth);
  return view.extrinsics.inverse() * cam;
}

std::optional<PixelDepth> project_to_view(const Vec3& point, const CameraView& view) {
  const Vec3 cam = view.extrinsics * point;
  if (cam.z() <= kMinHitDepth) return std::nullopt;
  const Vec3 pix = view.intrinsics * cam;
  const double u = pix.x() / cam.z();
  const double v = pix.y() / cam.z();
  if (!(u >= 0.0 && u < view.width && v >= 0.0 && v < view.height)) return std::nullopt;
  return PixelDepth{u, v, cam.z()};
}

Vec3 transform_between_frames(const Vec3& point, const CameraRig& rig, std::size_t from,
                              std::size_t to) {
  if (from >= rig.num_frames() || to >= rig.num_frames()) {
    throw std::out_of_range("frame index out of range");
  }
  if (from == to) return point;
  return rig.ego_poses[to].inverse() * (rig.ego_poses[from] * point);
}

Vec3 align_temporal(const Vec3& point, const CameraRig& rig, std::size_t frame) {
  return transform_between_frames(point, rig, 0, frame);
}

std::vector<std::size_t> hit_views(const Vec3& point, const CameraRig& rig, std::size_t frame) {
  const Vec3 aligned = align_temporal(point, rig, frame);
  std::vector<std::size_t> hits;
  for (std::size_t v = 0; v < rig.views.size(); ++v) {
    if (project_to_view(aligned, rig.views[v])) hits.push_back(v);
  }
  return hits;
}

Vec2 project_to_bev(const Vec3& point, const DetectionRange& range, std::size_t cols,
                    std::size_t rows) {
  if (!(range.x_max > range.x_min) || !(range.y_max > range.y_min)) {
    throw std::invalid_argument("project_to_bev: degenerate range");
  }
  return {(point.x() - range.x_min) / (range.x_max - range.x_min) * static_cast<double>(cols),
          (point.y() - range.y_min) / (range.y_max - range.y_min) * static_cast<double>(rows)};
}

std::array<Vec2, 4> bev_corners(const Box3D& box) {
  const double c = std::cos(box.yaw);
  const double s = std::sin(box.yaw);
  const double hl = 0.5 * box.size.x();
  const double hw = 0.5 * box.size.y();
  const Vec2 center = box.center.head<2>();
  const Vec2 ax(c * hl, s * hl);
  const Vec2 ay(-s * hw, c * hw);
  return {center - ax - ay, center + ax - ay, center + ax + ay, center - ax + ay};
}

double bev_rotated_iou(const Box3D& a, const Box3D& b) {
  const double area_a = a.size.x() * a.size.y();
  const double area_b = b.size.x() * b.size.y();
  const double reach = 0.5 * (a.size.head<2>().norm() + b.size.head<2>().norm());
  if ((a.center.head<2>() - b.center.head<2>()).norm() > reach) return 0.0;
  const auto ca = bev_corners(a);
  const Polygon inter = clip_convex(Polygon(ca.begin(), ca.end()), bev_corners(b));
  const double overlap = inter.size() < 3 ? 0.0 : polygon_area(inter);
  const double uni = area_a + area_b - overlap;
  if (uni <= 0.0) return 0.0;
  return std::clamp(overlap / uni, 0.0, 1.0);
}

std::vector<std::size_t> nms_3d(std::span<const Box3D> boxes, double iou_threshold) {
  std::vector<std::size_t> order(boxes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    return boxes[i].score > boxes[j].score;
  });
  std::vector<char> suppressed(boxes.size(), 0);
  std::vector<std::size_t> kept;
  for (std::size_t oi = 0; oi < order.size(); ++oi) {
    const std::size_t i = order[oi];
    if (suppressed[i]) continue;
    kept.push_back(i);
    for (std::size_t oj = oi + 1; oj < order.size(); ++oj) {
      const std::size_t j = order[oj];
      if (!suppressed[j] && bev_rotated_iou(boxes[i], boxes[j]) > iou_threshold) {
        suppressed[j] = 1;
      }
    }
  }
  return kept;
}

}  // namespace lcf
