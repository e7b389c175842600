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
#include <string>
#include <vector>

#include "lcf/feature_maps.hpp"
#include "lcf/geometry.hpp"
#include "lcf/params.hpp"

namespace lcf {

enum class Modality { kCamera, kLidar };

struct RoiSamplingConfig {
  std::size_t channels = 32;
  std::size_t points = 4;         // K
  std::size_t lidar_scales = 2;   // R
  std::size_t camera_scales = 2;  // M
  std::size_t frames = 2;         // T
  // Offsets stay within offset_limit half-extents of the box on each axis.
  double offset_limit = 2.0;
  // Initial sampling ring, in half-extents.
  double ring_radius = 0.5;

  /// Rows of the RoI feature: K for LiDAR, T*K for camera.
  std::size_t rows(Modality m) const { return m == Modality::kLidar ? points : frames * points; }
  void validate() const;
};

/// Per-query sampling offsets (ego frame, meters) and normalized weights.
///   LiDAR:  offsets [N, R*K, 2] at r*K + k, weights [N, R*K] (one softmax group)
///   camera: offsets [N, T*K, 3] at t*K + k, weights [N, T, M*K] at m*K + k
///           (one softmax group per frame)
struct SamplingPattern {
  Var offsets;
  Var weights;
};

void add_pattern_params(ParameterStore& store, const std::string& prefix,
                        const RoiSamplingConfig& cfg, Modality modality, Rng& rng);

/// queries [N, C]; boxes give the scale and orientation of each query's
/// offsets.
SamplingPattern predict_pattern(const BoundParams& p, const std::string& prefix, Var queries,
                                std::span<const Box3D> boxes, const RoiSamplingConfig& cfg,
                                Modality modality);

/// Feature maps as tape constants, scale-major for LiDAR and in
/// CameraFeatureSet order ((v*M + m)*T + t) for camera.
std::vector<Var> lidar_map_vars(Tape& tape, const LidarFeaturePyramid& pyramid);
std::vector<Var> camera_map_vars(Tape& tape, const CameraFeatureSet& set);

/// RoI features [N, K, C]: row k sums over scales r the weighted BEV samples
/// at center + offset(r, k). centers [N, 3].
Var sample_lidar(Var centers, const SamplingPattern& pattern, const std::vector<Var>& maps,
                 const DetectionRange& range, std::size_t points);

/// RoI features [N, T*K, C]: row (t, k) aligns center + offset(t, k) to frame
/// t and averages the scale-weighted samples over the views that see it.
/// Rows seen by no view are zero.
Var sample_camera(Var centers, const SamplingPattern& pattern, const std::vector<Var>& maps,
                  const CameraRig& rig, std::span<const std::size_t> strides,
                  std::size_t points);

void add_mixer_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                      std::size_t rows, Rng& rng);

/// Query-conditioned channel then spatial mixing of f [N, S, C], aggregated
/// to [N, C] and added to the query with a final layer norm.
Var adaptive_mix(const BoundParams& p, const std::string& prefix, Var queries, Var roi);

}  // namespace lcf
