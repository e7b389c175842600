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

#include <cstdint>
#include <string>

#include "lcf/scene.hpp"

namespace lcf {

enum class ScenarioKind { kNone, kFovLimited, kObjectFailure, kFrontOcclusion, kStuck };

enum class StaleSensor { kCamera, kLidar, kBoth };

/// Sensor corruption applied to an already generated scene.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kNone;
  double fov_deg = 360.0;      // fov_limited
  double frame_rate = 0.5;     // object_failure, stuck
  double object_rate = 0.5;    // object_failure
  StaleSensor stale = StaleSensor::kCamera;
  std::uint64_t seed = 0;

  void validate() const;

  static ScenarioSpec none() { return {}; }
  static ScenarioSpec fov_limited(double degrees, std::uint64_t seed = 0);
  static ScenarioSpec object_failure(double frame_rate, double object_rate, std::uint64_t seed);
  static ScenarioSpec front_occlusion();
  static ScenarioSpec stuck(double frame_rate, StaleSensor sensor, std::uint64_t seed);
};

/// Parses "none", "fov120", "fov180", "object_failure", "front_occlusion",
/// "stuck" (optionally "stuck_lidar", "stuck_both"); seed is mixed with the
/// scene id at application time.
ScenarioSpec parse_scenario(const std::string& name, std::uint64_t seed);
std::string scenario_name(const ScenarioSpec& spec);

/// Copy of \p sample with sensor data corrupted. Ground-truth boxes are never
/// touched. Throws std::invalid_argument for stuck with fewer than 2 frames.
SceneSample apply_scenario(const SceneSample& sample, const ScenarioSpec& spec);

/// Forward azimuth of an ego-frame point in degrees, (-180, 180].
double forward_azimuth_deg(double x, double y);

}  // namespace lcf
