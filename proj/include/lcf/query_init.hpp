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
#include <vector>

#include "lcf/feature_maps.hpp"
#include "lcf/geometry.hpp"
#include "lcf/random.hpp"
#include "lcf/scene.hpp"

namespace lcf {

/// Image-space detection with monocular 3D attributes, as a 2D/mono-3D
/// detector would emit it.
struct PerspectiveProposal {
  std::size_t view = 0;
  double cx = 0.0;  // pixels
  double cy = 0.0;
  double depth = 0.0;  // meters along the optical axis
  Vec3 size = Vec3::Ones();
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
  double score = 1.0;
  int class_id = 0;
};

struct QueryInitConfig {
  std::size_t num_queries = 60;    // total
  std::size_t num_proposals = 20;  // taken from lifted proposals; the rest are random
  double nms_iou = 0.5;

  // Oracle noise.
  double pixel_sigma = 0.0;
  double depth_log_sigma = 0.0;
  double size_log_sigma = 0.0;
  double yaw_sigma = 0.0;
  double velocity_sigma = 0.0;
  double miss_rate = 0.0;
  double false_positives_per_view = 0.0;
  // score = clamp(1 - score_slope * noise / noise_cap, 0.05, 1) where noise
  // is the pixel error in units of pixel_sigma (0 when noiseless).
  double score_slope = 0.5;
  double noise_cap = 3.0;

  std::size_t num_random() const { return num_queries - num_proposals; }
  void validate() const;
};

struct Query {
  std::vector<double> feature;  // empty when the learned default embedding applies
  Box3D box;
  bool from_proposal = false;

  bool uses_default_embedding() const { return feature.empty(); }
};

/// Noisy proposals for every ground-truth box visible in each view, plus
/// Poisson false positives. Indexed by view.
std::vector<std::vector<PerspectiveProposal>> perspective_oracle(const SceneSample& scene,
                                                                 const QueryInitConfig& cfg,
                                                                 Rng& rng);

/// Lifts image-space centers to 3D in the current ego frame. Throws
/// std::out_of_range for proposals referencing a view the rig lacks.
std::vector<Box3D> lift_proposals(const std::vector<std::vector<PerspectiveProposal>>& proposals,
                                  const CameraRig& rig);

/// Joint NMS over all views, then the num_proposals best by score.
/// May return fewer boxes; callers pad with random queries.
std::vector<Box3D> select_topk(const std::vector<Box3D>& boxes, const QueryInitConfig& cfg);

/// Uniform centers in the range, class-prior sizes, uniform yaw, no velocity.
std::vector<Query> random_queries(std::size_t n, const DetectionRange& range, Rng& rng);

/// Features are the view/scale mean of current-frame camera samples at each
/// box center. Boxes outside every frustum keep the default embedding.
std::vector<Query> init_queries(const std::vector<Box3D>& boxes, const CameraFeatureSet& camera,
                                const CameraRig& rig, const DetectionRange& range);

/// Oracle -> lift -> select -> init, padded to num_queries with random
/// queries.
std::vector<Query> generate_queries(const SceneSample& scene, const QueryInitConfig& cfg,
                                    Rng& rng);

}  // namespace lcf
