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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "lcf/geometry.hpp"

namespace lcf {

/// A box tagged with the scene it belongs to. Used for both predictions
/// and ground truth.
struct Detection {
  std::uint64_t scene = 0;
  Box3D box;
};

/// Greedy score-descending matching on BEV center distance. Returns, per
/// prediction in input order, the index of the matched ground truth or -1.
/// Only boxes of the same scene and class are compared.
std::vector<int> match_for_ap(std::span<const Detection> preds, std::span<const Detection> gts, double threshold);

/// nuScenes-style AP: precision sampled at 101 recall points, points with
/// recall or precision at most 0.1 clipped away, then renormalized.
double average_precision(std::span<const Detection> preds, std::span<const Detection> gts, double threshold);

/// AP from per-prediction TP flags given in score-descending order.
double average_precision_from_flags(std::span<const std::uint8_t> tp_sorted, std::size_t num_gt);

struct TpErrors {
  double translation = 1.0;  // ATE, m
  double scale = 1.0;        // ASE, 1 - aligned IoU
  double orientation = 1.0;  // AOE, rad
  double velocity = 1.0;     // AVE, m/s
  std::size_t matches = 0;
};

/// Mean errors over (prediction, ground truth) pairs. Every field is 1 when
/// there are no pairs.
TpErrors tp_errors(std::span<const std::pair<Box3D, Box3D>> pairs);

/// 1 - IoU of two boxes sharing center and heading.
double aligned_scale_error(const Vec3& a, const Vec3& b);

/// Composite score (weight five on mAP, one per error term).
double nds(double mean_ap, std::span<const double> mean_tp_errors);

struct DistanceBin {
  double min = 0.0;
  double max = 0.0;  // +inf for the open last bin
  std::size_t num_gt = 0;
  std::optional<double> ap;  // absent when the bin has no ground truth
};

/// mAP per ego-distance bin. \p edges are ascending lower bounds; the last
/// bin is open. Matched predictions go to their ground truth's bin, others
/// to their own.
std::vector<DistanceBin> distance_binned_ap(std::span<const Detection> preds, std::span<const Detection> gts,
                                            std::span<const double> edges, std::span<const double> thresholds,
                                            std::size_t num_classes);

struct EvalConfig {
  std::vector<double> thresholds{0.5, 1.0, 2.0, 4.0};
  double tp_threshold = 2.0;
  std::vector<double> bin_edges{0.0, 10.0, 20.0, 30.0};
  std::size_t num_classes = 3;

  void validate() const;
};

struct ClassMetrics {
  std::vector<double> ap;  // one per threshold
  std::size_t num_gt = 0;
  std::size_t num_pred = 0;
  TpErrors errors;
};

struct MetricsReport {
  std::vector<double> thresholds;
  std::vector<ClassMetrics> classes;
  double mean_ap = 0.0;
  TpErrors mean_errors;
  double nds = 0.0;
  std::vector<DistanceBin> bins;
  std::size_t num_scenes = 0;
};

MetricsReport evaluate(std::span<const Detection> preds, std::span<const Detection> gts, std::size_t num_scenes,
                       const EvalConfig& cfg);

/// Mean AP over classes at one threshold, for classes with ground truth.
double mean_ap_at(const MetricsReport& report, double threshold);

nlohmann::json to_json(const MetricsReport& report);
std::string bins_to_csv(const MetricsReport& report);

}  // namespace lcf
