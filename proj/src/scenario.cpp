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

#include "lcf/scenario.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lcf/random.hpp"

namespace lcf {
namespace {

void check_rate(double r, const char* what) {
  if (!(r >= 0.0 && r <= 1.0)) {
    throw std::invalid_argument(std::string("scenario: ") + what + " must be in [0, 1]");
  }
}

void rebuild_lidar(SceneSample& s) {
  const LidarFeaturePyramid& old = s.lidar;
  if (old.num_scales() == 0 || s.points.empty()) return;
  s.lidar = lidar_bev_features(s.points[0], old.range(), old.at(0).width, old.num_scales(),
                               old.channels());
}

}  // namespace

void ScenarioSpec::validate() const {
  check_rate(frame_rate, "frame_rate");
  check_rate(object_rate, "object_rate");
  if (kind == ScenarioKind::kFovLimited && !(fov_deg > 0.0 && fov_deg <= 360.0)) {
    throw std::invalid_argument("scenario: fov angle must be in (0, 360]");
  }
}

ScenarioSpec ScenarioSpec::fov_limited(double degrees, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = ScenarioKind::kFovLimited;
  s.fov_deg = degrees;
  s.seed = seed;
  return s;
}

ScenarioSpec ScenarioSpec::object_failure(double frame_rate, double object_rate,
                                          std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = ScenarioKind::kObjectFailure;
  s.frame_rate = frame_rate;
  s.object_rate = object_rate;
  s.seed = seed;
  return s;
}

ScenarioSpec ScenarioSpec::front_occlusion() {
  ScenarioSpec s;
  s.kind = ScenarioKind::kFrontOcclusion;
  return s;
}

ScenarioSpec ScenarioSpec::stuck(double frame_rate, StaleSensor sensor, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = ScenarioKind::kStuck;
  s.frame_rate = frame_rate;
  s.stale = sensor;
  s.seed = seed;
  return s;
}

ScenarioSpec parse_scenario(const std::string& name, std::uint64_t seed) {
  if (name == "none" || name.empty()) return ScenarioSpec::none();
  if (name.rfind("fov", 0) == 0 && name.size() > 3) {
    std::size_t used = 0;
    double deg = 0.0;
    try {
      deg = std::stod(name.substr(3), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != name.size() - 3) throw std::invalid_argument("unknown scenario '" + name + "'");
    ScenarioSpec s = ScenarioSpec::fov_limited(deg, seed);
    s.validate();
    return s;
  }
  if (name == "object_failure") return ScenarioSpec::object_failure(0.5, 0.5, seed);
  if (name == "front_occlusion") return ScenarioSpec::front_occlusion();
  if (name == "stuck" || name == "stuck_camera") {
    return ScenarioSpec::stuck(0.5, StaleSensor::kCamera, seed);
  }
  if (name == "stuck_lidar") return ScenarioSpec::stuck(0.5, StaleSensor::kLidar, seed);
  if (name == "stuck_both") return ScenarioSpec::stuck(0.5, StaleSensor::kBoth, seed);
  throw std::invalid_argument("unknown scenario '" + name + "'");
}

std::string scenario_name(const ScenarioSpec& spec) {
  switch (spec.kind) {
    case ScenarioKind::kNone: return "none";
    case ScenarioKind::kFovLimited: {
      const double r = std::round(spec.fov_deg);
      return "fov" + (r == spec.fov_deg ? std::to_string(static_cast<long>(r))
                                        : std::to_string(spec.fov_deg));
    }
    case ScenarioKind::kObjectFailure: return "object_failure";
    case ScenarioKind::kFrontOcclusion: return "front_occlusion";
    case ScenarioKind::kStuck:
      switch (spec.stale) {
        case StaleSensor::kCamera: return "stuck";
        case StaleSensor::kLidar: return "stuck_lidar";
        case StaleSensor::kBoth: return "stuck_both";
      }
  }
  return "unknown";
}

double forward_azimuth_deg(double x, double y) {
  return std::atan2(y, x) * 180.0 / std::numbers::pi;
}

SceneSample apply_scenario(const SceneSample& sample, const ScenarioSpec& spec) {
  spec.validate();
  SceneSample out = sample;
  Rng rng(mix_seed(spec.seed, sample.scene_id));
  switch (spec.kind) {
    case ScenarioKind::kNone:
      break;
    case ScenarioKind::kFovLimited: {
      const double half = 0.5 * spec.fov_deg;
      for (PointCloud& cloud : out.points) {
        PointCloud kept;
        kept.reserve(cloud.size());
        for (const LidarPoint& p : cloud) {
          if (std::fabs(forward_azimuth_deg(p.x, p.y)) <= half) kept.push_back(p);
        }
        cloud = std::move(kept);
      }
      rebuild_lidar(out);
      break;
    }
    case ScenarioKind::kObjectFailure: {
      const std::size_t n = out.boxes.size();
      for (PointCloud& cloud : out.points) {
        const bool frame_hit = rng.bernoulli(spec.frame_rate);
        std::vector<bool> drop(n, false);
        for (std::size_t i = 0; i < n; ++i) drop[i] = frame_hit && rng.bernoulli(spec.object_rate);
        if (!frame_hit) continue;
        PointCloud kept;
        kept.reserve(cloud.size());
        for (const LidarPoint& p : cloud) {
          if (p.object >= 0 && drop[static_cast<std::size_t>(p.object)]) continue;
          kept.push_back(p);
        }
        cloud = std::move(kept);
      }
      rebuild_lidar(out);
      break;
    }
    case ScenarioKind::kFrontOcclusion: {
      CameraFeatureSet& cam = out.camera;
      for (std::size_t m = 0; m < cam.num_scales(); ++m) {
        for (std::size_t t = 0; t < cam.num_frames(); ++t) cam.at(0, m, t).data.fill(0.0);
      }
      break;
    }
    case ScenarioKind::kStuck: {
      const std::size_t frames = out.rig.num_frames();
      if (frames < 2) throw std::invalid_argument("stuck scenario needs at least 2 frames");
      const bool camera = spec.stale != StaleSensor::kLidar;
      const bool lidar = spec.stale != StaleSensor::kCamera;
      // Frame t+1 is the older one; walk oldest-first so a stale frame never
      // propagates twice.
      for (std::size_t t = frames - 1; t-- > 0;) {
        if (!rng.bernoulli(spec.frame_rate)) continue;
        if (camera) {
          CameraFeatureSet& cam = out.camera;
          for (std::size_t v = 0; v < cam.num_views(); ++v) {
            for (std::size_t m = 0; m < cam.num_scales(); ++m) {
              cam.at(v, m, t) = sample.camera.at(v, m, t + 1);
            }
          }
        }
        if (lidar && t + 1 < sample.points.size()) out.points[t] = sample.points[t + 1];
      }
      if (lidar) rebuild_lidar(out);
      break;
    }
  }
  return out;
}

}  // namespace lcf
