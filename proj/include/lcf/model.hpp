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
#include <span>
#include <string>
#include <vector>

#include "lcf/feature_maps.hpp"
#include "lcf/geometry.hpp"
#include "lcf/params.hpp"
#include "lcf/query_init.hpp"
#include "lcf/roi_sampling.hpp"

namespace lcf {

/// Box state rows: x, y, z, log l, log w, log h, yaw, vx, vy.
inline constexpr std::size_t kStateWidth = 9;
/// Regression code rows: x, y, z, log l, log w, log h, sin yaw, cos yaw, vx, vy.
inline constexpr std::size_t kCodeWidth = 10;

struct ModelConfig {
  std::size_t layers = 3;
  std::size_t num_classes = 3;
  RoiSamplingConfig sampling;  // sampling.channels is the model width
  DetectionRange range;

  std::size_t channels() const { return sampling.channels; }
  void validate() const;
};

enum class FusionMode { kUncertainty, kEqual };

/// Seconds spent in each stage of decode_layer, accumulated across calls.
struct LayerProfile {
  double pattern = 0.0;
  double sample_lidar = 0.0;
  double sample_camera = 0.0;
  double mix = 0.0;
  double fusion = 0.0;
  double heads = 0.0;
};

struct DecodeOptions {
  FusionMode fusion = FusionMode::kUncertainty;
  // Replace predicted uncertainties by the distance of each modality's
  // regressed position to the nearest ground-truth center.
  bool oracle_uncertainty = false;
  std::span<const Box3D> ground_truth;
  LayerProfile* profile = nullptr;
};

struct LayerOutput {
  Var features;     // [N, C] fused query features
  Var logits;       // [N, classes]
  Var state;        // [N, 9]
  Var u_camera;     // [N, 1], as used for fusion
  Var u_lidar;
  Var dist_camera;  // [N, 1] predicted BEV error
  Var dist_lidar;
  Var reg_camera;   // [N, 2] regressed BEV position
  Var reg_lidar;
  std::vector<Box3D> boxes;  // score = best class probability
};

ParameterStore init_model(const ModelConfig& cfg, Rng& rng);

Tensor box_state(std::span<const Box3D> boxes);
Box3D state_to_box(const double* row);
Tensor box_code(std::span<const Box3D> boxes);
Var box_code(Var state);

/// BEV center moved by polar_shift(d[0:2]), z += d[2], log size += d[3:6],
/// yaw = atan2(sin yaw + d[6], cos yaw + d[7]), velocity += d[8:10].
Var apply_box_delta(Var state, Var delta);
inline constexpr std::size_t kEncodingWidth = kCodeWidth + 1;

/// Box code with the center mapped to [-1, 1] over \p range, velocity
/// scaled to unit order and the log BEV range appended. Input to the
/// position embedding, [N, kEncodingWidth].
Tensor box_encoding(std::span<const Box3D> boxes, const DetectionRange& range);

/// Residual box update from refined query features [N, C].
Var refine_box(const BoundParams& p, const std::string& prefix, Var features, Var state);

/// Initial query features: sampled features for proposal queries, the
/// learned default embedding otherwise.
Var query_features(const BoundParams& p, std::span<const Query> queries, std::size_t channels);

/// Runs every decoder layer. Refined boxes of layer l (detached) are the
/// sampling centers of layer l + 1.
std::vector<LayerOutput> decode(const BoundParams& p, std::span<const Query> queries,
                                const CameraFeatureSet& camera, const LidarFeaturePyramid& lidar,
                                const CameraRig& rig, const ModelConfig& cfg,
                                const DecodeOptions& options = {});

/// Runs a single decoder layer from explicit features and boxes.
LayerOutput decode_layer(const BoundParams& p, std::size_t layer, Var features,
                         std::span<const Box3D> boxes, const std::vector<Var>& camera_maps,
                         const std::vector<Var>& lidar_maps, const CameraRig& rig,
                         std::span<const std::size_t> strides, const ModelConfig& cfg,
                         const DecodeOptions& options);

struct MatchWeights {
  double classification = 2.0;
  double box = 1.0;
};

struct LossWeights {
  double classification = 2.0;
  double box = 1.0;
  double uncertainty = 0.5;
  double regression = 0.5;
  double focal_alpha = 0.25;
  std::array<double, kCodeWidth> code = {1.0, 1.0, 0.5, 1.0, 1.0, 1.0, 1.0, 1.0, 0.25, 0.25};
  MatchWeights match;
};

/// For each ground-truth box, the index of its matched prediction (-1 when
/// there are more boxes than predictions).
std::vector<int> hungarian_match(const Tensor& scores, const Tensor& codes,
                                 std::span<const Box3D> gts, const LossWeights& weights);

struct LossTerms {
  double classification = 0.0;
  double box = 0.0;
  double uncertainty = 0.0;
  double regression = 0.0;
  double total = 0.0;
};

struct Loss {
  Var total;
  LossTerms terms;
  std::vector<std::vector<int>> matches;  // per layer
};

/// Deep supervision over all layers: focal classification on every query,
/// L1 box code and position regression on matched queries, and |predicted
/// distance - detached oracle distance| per modality.
Loss compute_loss(const std::vector<LayerOutput>& layers, std::span<const Box3D> gts,
                  const LossWeights& weights);

}  // namespace lcf
