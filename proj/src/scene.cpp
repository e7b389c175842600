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

#include "lcf/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lcf {
namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;
constexpr std::uint64_t kBevEmbeddingSeed = 0x5eedb0b5eedb0bULL;

double class_intensity(int class_id) {
  switch (class_id) {
    case kCar: return 0.8;
    case kPedestrian: return 0.3;
    default: return 0.6;
  }
}

double class_max_speed(int class_id) {
  switch (class_id) {
    case kCar: return 3.0;
    case kPedestrian: return 1.0;
    default: return 0.0;
  }
}

// Segment p0 -> p1 against a box; true if it enters the box before reaching
// p1.
bool segment_hits_box(const Vec3& p0, const Vec3& p1, const Box3D& box) {
  const double c = std::cos(box.yaw), s = std::sin(box.yaw);
  auto local = [&](const Vec3& p) {
    const Vec3 d = p - box.center;
    return Vec3(c * d.x() + s * d.y(), -s * d.x() + c * d.y(), d.z());
  };
  const Vec3 a = local(p0);
  const Vec3 dir = local(p1) - a;
  const Vec3 half = 0.5 * box.size;
  double t0 = 0.0, t1 = 1.0 - 1e-6;
  for (int k = 0; k < 3; ++k) {
    if (std::fabs(dir[k]) < 1e-12) {
      if (std::fabs(a[k]) > half[k]) return false;
      continue;
    }
    double ta = (-half[k] - a[k]) / dir[k];
    double tb = (half[k] - a[k]) / dir[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
    if (t0 > t1) return false;
  }
  return true;
}

bool footprints_overlap(const Box3D& a, const Box3D& b, double margin) {
  Box3D ia = a, ib = b;
  ia.size.head<2>() += Vec2::Constant(margin);
  ib.size.head<2>() += Vec2::Constant(margin);
  return bev_rotated_iou(ia, ib) > 0.0;
}

std::vector<double> bev_embedding(std::size_t channels) {
  Rng rng(kBevEmbeddingSeed);
  std::vector<double> w(kPillarFeatures * channels);
  const double scale = 1.0 / std::sqrt(static_cast<double>(kPillarFeatures));
  for (double& v : w) v = scale * rng.normal();
  return w;
}

}  // namespace

const char* class_name(int class_id) {
  switch (class_id) {
    case kCar: return "car";
    case kPedestrian: return "pedestrian";
    case kBarrier: return "barrier";
  }
  return "unknown";
}

Vec3 class_size_prior(int class_id) {
  switch (class_id) {
    case kCar: return {4.5, 1.9, 1.6};
    case kPedestrian: return {0.7, 0.7, 1.75};
    case kBarrier: return {0.5, 2.5, 1.0};
  }
  throw std::invalid_argument("unknown class id " + std::to_string(class_id));
}

void SimConfig::validate() const {
  if (num_views == 0) throw std::invalid_argument("sim: num_views must be >= 1");
  if (num_frames == 0) throw std::invalid_argument("sim: num_frames must be >= 1");
  if (camera_strides.empty()) throw std::invalid_argument("sim: need at least one camera scale");
  if (bev_scales == 0 || (bev_cells >> (bev_scales - 1)) == 0) {
    throw std::invalid_argument("sim: invalid BEV grid");
  }
  if (channels == 0) throw std::invalid_argument("sim: channels must be >= 1");
  if (min_objects > max_objects) throw std::invalid_argument("sim: min_objects > max_objects");
  if (!(min_distance >= 0.0 && min_distance < max_distance)) {
    throw std::invalid_argument("sim: invalid placement distances");
  }
  double total = 0.0;
  for (double p : class_mix) {
    if (p < 0.0) throw std::invalid_argument("sim: negative class probability");
    total += p;
  }
  if (total <= 0.0) throw std::invalid_argument("sim: class mixture sums to zero");
  if (!(horizontal_fov_deg > 0.0 && horizontal_fov_deg < 180.0)) {
    throw std::invalid_argument("sim: horizontal_fov_deg must be in (0, 180)");
  }
  range.validate();
}

CameraRig make_surround_rig(const SimConfig& cfg) {
  CameraRig rig;
  const double f = 0.5 * static_cast<double>(cfg.image_width) /
                   std::tan(0.5 * cfg.horizontal_fov_deg * kDegToRad);
  for (std::size_t v = 0; v < cfg.num_views; ++v) {
    const double yaw = 2.0 * std::numbers::pi * static_cast<double>(v) /
                       static_cast<double>(cfg.num_views);
    CameraView view;
    view.width = static_cast<int>(cfg.image_width);
    view.height = static_cast<int>(cfg.image_height);
    view.intrinsics << f, 0, 0.5 * static_cast<double>(cfg.image_width), 0, f,
        0.5 * static_cast<double>(cfg.image_height), 0, 0, 1;
    Mat3 r;
    r.row(0) = Vec3(std::sin(yaw), -std::cos(yaw), 0.0);
    r.row(1) = Vec3(0.0, 0.0, -1.0);
    r.row(2) = Vec3(std::cos(yaw), std::sin(yaw), 0.0);
    view.extrinsics = Rigid3::Identity();
    view.extrinsics.linear() = r;
    view.extrinsics.translation() = -r * Vec3(0.0, 0.0, cfg.camera_height);
    rig.views.push_back(view);
  }
  rig.ego_poses.clear();
  for (std::size_t t = 0; t < cfg.num_frames; ++t) {
    rig.ego_poses.push_back(Rigid3(Eigen::Translation3d(
        -cfg.ego_speed * cfg.frame_interval * static_cast<double>(t), 0.0, 0.0)));
  }
  return rig;
}

std::vector<Box3D> boxes_at_frame(const SceneSample& scene, std::size_t frame) {
  std::vector<Box3D> out = scene.boxes;
  const double dt = scene.frame_interval * static_cast<double>(frame);
  const Rigid3 to_frame = scene.rig.ego_poses.at(frame).inverse() * scene.rig.ego_poses[0];
  const double yaw_offset = std::atan2(to_frame.linear()(1, 0), to_frame.linear()(0, 0));
  for (Box3D& b : out) {
    Vec3 c = b.center;
    c.x() -= b.velocity.x() * dt;
    c.y() -= b.velocity.y() * dt;
    b.center = to_frame * c;
    b.yaw = normalize_yaw(b.yaw + yaw_offset);
    b.velocity = to_frame.linear().topLeftCorner<2, 2>() * b.velocity;
  }
  return out;
}

PointCloud lidar_points(const std::vector<Box3D>& boxes, const SimConfig& cfg, Rng& rng) {
  PointCloud cloud;
  const Vec3 sensor(0.0, 0.0, cfg.lidar_height);
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    const double c = std::cos(b.yaw), s = std::sin(b.yaw);
    const Vec3 ex(c, s, 0.0), ey(-s, c, 0.0), ez(0.0, 0.0, 1.0);
    const double l = b.size.x(), w = b.size.y(), h = b.size.z();
    struct Face {
      Vec3 normal;
      double offset;
      Vec3 u;
      double du;
      Vec3 v;
      double dv;
    };
    const Face faces[5] = {
        {ex, 0.5 * l, ey, w, ez, h},  {-ex, 0.5 * l, ey, w, ez, h}, {ey, 0.5 * w, ex, l, ez, h},
        {-ey, 0.5 * w, ex, l, ez, h}, {ez, 0.5 * h, ex, l, ey, w},
    };
    const double intensity = class_intensity(b.class_id);
    for (const Face& f : faces) {
      const Vec3 center = b.center + f.offset * f.normal;
      const Vec3 to_sensor = sensor - center;
      if (f.normal.dot(to_sensor) <= 0.0) continue;
      const double dist2 = std::max(to_sensor.squaredNorm(), 1.0);
      const std::uint64_t n = rng.poisson(cfg.lidar_density * f.du * f.dv / dist2);
      for (std::uint64_t k = 0; k < n; ++k) {
        const Vec3 p = center + rng.uniform(-0.5, 0.5) * f.du * f.u +
                       rng.uniform(-0.5, 0.5) * f.dv * f.v;
        bool occluded = false;
        for (std::size_t j = 0; j < boxes.size() && !occluded; ++j) {
          if (j != i && segment_hits_box(sensor, p, boxes[j])) occluded = true;
        }
        if (occluded) continue;
        if (p.x() < cfg.range.x_min || p.x() > cfg.range.x_max || p.y() < cfg.range.y_min ||
            p.y() > cfg.range.y_max) {
          continue;
        }
        cloud.push_back({p.x(), p.y(), p.z(), intensity, static_cast<int>(i)});
      }
    }
  }
  const double radius = cfg.max_distance + 5.0;
  for (std::size_t k = 0; k < cfg.clutter_points; ++k) {
    const double r = radius * std::sqrt(rng.uniform());
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double x = r * std::cos(a), y = r * std::sin(a);
    const double z = rng.uniform(0.0, 0.15);
    if (x < cfg.range.x_min || x > cfg.range.x_max || y < cfg.range.y_min || y > cfg.range.y_max) {
      continue;
    }
    cloud.push_back({x, y, z, 0.1, -1});
  }
  return cloud;
}

LidarFeaturePyramid lidar_bev_features(const PointCloud& points, const DetectionRange& range,
                                       std::size_t cells, std::size_t scales,
                                       std::size_t channels) {
  LidarFeaturePyramid pyramid(range, cells, scales, channels);
  const std::size_t ncell = cells * cells;
  std::vector<double> count(ncell, 0.0), zmax(ncell, 0.0), isum(ncell, 0.0), xsum(ncell, 0.0),
      ysum(ncell, 0.0);
  const double cw = (range.x_max - range.x_min) / static_cast<double>(cells);
  const double ch = (range.y_max - range.y_min) / static_cast<double>(cells);
  for (const LidarPoint& p : points) {
    const Vec2 g = project_to_bev(Vec3(p.x, p.y, p.z), range, cells, cells);
    if (g.x() < 0.0 || g.y() < 0.0 || g.x() >= static_cast<double>(cells) ||
        g.y() >= static_cast<double>(cells)) {
      continue;
    }
    const auto ix = static_cast<std::size_t>(g.x());
    const auto iy = static_cast<std::size_t>(g.y());
    const std::size_t k = iy * cells + ix;
    zmax[k] = count[k] == 0.0 ? p.z : std::max(zmax[k], p.z);
    count[k] += 1.0;
    isum[k] += p.intensity;
    xsum[k] += (p.x - (range.x_min + (static_cast<double>(ix) + 0.5) * cw)) / cw;
    ysum[k] += (p.y - (range.y_min + (static_cast<double>(iy) + 0.5) * ch)) / ch;
  }
  const std::vector<double> embed = bev_embedding(channels);
  FeatureMap& fine = pyramid.at(0);
  for (std::size_t k = 0; k < ncell; ++k) {
    if (count[k] == 0.0) continue;
    const double hand[kPillarFeatures] = {std::log1p(count[k]), zmax[k], isum[k] / count[k],
                                          xsum[k] / count[k], ysum[k] / count[k]};
    double* out = fine.data.raw() + k * channels;
    for (std::size_t f = 0; f < kPillarFeatures; ++f) {
      for (std::size_t c = 0; c < channels; ++c) out[c] += hand[f] * embed[f * channels + c];
    }
  }
  for (std::size_t r = 1; r < scales; ++r) {
    const FeatureMap& src = pyramid.at(r - 1);
    FeatureMap& dst = pyramid.at(r);
    for (std::size_t y = 0; y < dst.height; ++y) {
      for (std::size_t x = 0; x < dst.width; ++x) {
        double* out = dst.texel(x, y);
        for (std::size_t dy = 0; dy < 2; ++dy) {
          for (std::size_t dx = 0; dx < 2; ++dx) {
            const double* in = src.texel(2 * x + dx, 2 * y + dy);
            for (std::size_t c = 0; c < channels; ++c) out[c] += 0.25 * in[c];
          }
        }
      }
    }
  }
  return pyramid;
}

CameraFeatureSet camera_features(const SceneSample& scene, const SimConfig& cfg, Rng& rng) {
  namespace cc = camera_channel;
  CameraFeatureSet set(cfg.num_views, cfg.camera_strides, cfg.num_frames, cfg.image_width,
                       cfg.image_height, cfg.channels);
  const std::size_t channels = cfg.channels;
  std::vector<double> content(channels);
  for (std::size_t t = 0; t < cfg.num_frames; ++t) {
    const std::vector<Box3D> boxes = boxes_at_frame(scene, t);
    for (std::size_t v = 0; v < cfg.num_views; ++v) {
      const CameraView& view = scene.rig.views[v];
      for (const Box3D& b : boxes) {
        const auto proj = project_to_view(b.center, view);
        if (!proj) continue;
        std::fill(content.begin(), content.end(), 0.0);
        auto put = [&](std::size_t c, double value) {
          if (c < channels) content[c] = value;
        };
        put(cc::kClass + static_cast<std::size_t>(b.class_id), 1.0);
        put(cc::kInverseDepth, std::min(10.0 / proj->depth, 2.0));
        for (std::size_t k = 0; k < 3; ++k) put(cc::kLogSize + k, std::log(b.size[k]));
        put(cc::kHeading, std::sin(b.yaw));
        put(cc::kHeading + 1, std::cos(b.yaw));
        put(cc::kVelocity, b.velocity.x() / 5.0);
        put(cc::kVelocity + 1, b.velocity.y() / 5.0);
        put(cc::kObjectness, 1.0);
        for (std::size_t c = cc::kPosition; c < channels; ++c) {
          const std::size_t k = c - cc::kPosition;
          const double coord = (k % 2 == 0) ? proj->u / static_cast<double>(cfg.image_width)
                                             : proj->v / static_cast<double>(cfg.image_height);
          const double freq = std::numbers::pi * static_cast<double>(1u << ((k / 4) % 6));
          put(c, (k / 2) % 2 == 0 ? std::sin(freq * coord) : std::cos(freq * coord));
        }
        for (std::size_t m = 0; m < cfg.camera_strides.size(); ++m) {
          FeatureMap& map = set.at(v, m, t);
          const double stride = static_cast<double>(cfg.camera_strides[m]);
          const double cx = proj->u / stride, cy = proj->v / stride;
          const double extent =
              view.intrinsics(0, 0) * 0.5 * std::max(b.size.x(), b.size.y()) / proj->depth;
          const double sigma = std::clamp(0.5 * extent / stride, 0.6, 3.0);
          const double reach = 3.0 * sigma;
          const auto x0 = static_cast<long>(std::max(0.0, std::floor(cx - reach)));
          const auto x1 = static_cast<long>(std::min<double>(map.width - 1, std::floor(cx + reach)));
          const auto y0 = static_cast<long>(std::max(0.0, std::floor(cy - reach)));
          const auto y1 = static_cast<long>(std::min<double>(map.height - 1, std::floor(cy + reach)));
          for (long y = y0; y <= y1; ++y) {
            for (long x = x0; x <= x1; ++x) {
              const double dx = cx - (static_cast<double>(x) + 0.5);
              const double dy = cy - (static_cast<double>(y) + 0.5);
              const double g = std::exp(-(dx * dx + dy * dy) / (2.0 * sigma * sigma));
              double* texel = map.texel(static_cast<std::size_t>(x), static_cast<std::size_t>(y));
              for (std::size_t c = 0; c < channels; ++c) texel[c] += g * content[c];
              if (cc::kOffset + 1 < channels) {
                texel[cc::kOffset] += g * dx;
                texel[cc::kOffset + 1] += g * dy;
              }
            }
          }
        }
      }
    }
  }
  if (cfg.camera_noise > 0.0) {
    for (std::size_t v = 0; v < cfg.num_views; ++v) {
      for (std::size_t m = 0; m < cfg.camera_strides.size(); ++m) {
        for (std::size_t t = 0; t < cfg.num_frames; ++t) {
          for (double& x : set.at(v, m, t).data.data()) x += cfg.camera_noise * rng.normal();
        }
      }
    }
  }
  return set;
}

SceneSample generate_scene(const SimConfig& cfg, std::uint64_t scene_id, Rng& rng) {
  cfg.validate();
  SceneSample scene;
  scene.scene_id = scene_id;
  scene.seed = rng.seed();
  scene.frame_interval = cfg.frame_interval;
  scene.rig = make_surround_rig(cfg);

  const std::size_t n = cfg.min_objects + rng.below(cfg.max_objects - cfg.min_objects + 1);
  double mix_total = 0.0;
  for (double p : cfg.class_mix) mix_total += p;
  for (std::size_t i = 0; i < n; ++i) {
    double pick = rng.uniform() * mix_total;
    int cls = kNumClasses - 1;
    for (int k = 0; k < kNumClasses; ++k) {
      if (pick < cfg.class_mix[k]) {
        cls = k;
        break;
      }
      pick -= cfg.class_mix[k];
    }
    Box3D box;
    box.class_id = cls;
    box.score = 1.0;
    const Vec3 prior = class_size_prior(cls);
    for (int k = 0; k < 3; ++k) box.size[k] = prior[k] * rng.uniform(0.9, 1.1);
    box.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double speed = rng.uniform(0.0, class_max_speed(cls));
    box.velocity = Vec2(speed * std::cos(box.yaw), speed * std::sin(box.yaw));
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_placement_retries && !placed; ++attempt) {
      const double r = rng.uniform(cfg.min_distance, cfg.max_distance);
      const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
      box.center = Vec3(r * std::cos(a), r * std::sin(a), 0.5 * box.size.z());
      if (!cfg.range.contains(box.center)) continue;
      placed = std::none_of(scene.boxes.begin(), scene.boxes.end(),
                            [&](const Box3D& o) { return footprints_overlap(box, o, 0.5); });
    }
    if (!placed) {
      throw std::runtime_error("generate_scene: could not place object " + std::to_string(i) +
                               " without overlap");
    }
    scene.boxes.push_back(box);
  }

  Rng lidar_rng = rng.substream(1);
  for (std::size_t t = 0; t < cfg.num_frames; ++t) {
    scene.points.push_back(lidar_points(boxes_at_frame(scene, t), cfg, lidar_rng));
  }
  scene.lidar =
      lidar_bev_features(scene.points[0], cfg.range, cfg.bev_cells, cfg.bev_scales, cfg.channels);
  Rng camera_rng = rng.substream(2);
  scene.camera = camera_features(scene, cfg, camera_rng);
  return scene;
}

}  // namespace lcf
