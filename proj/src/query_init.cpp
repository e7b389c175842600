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

#include "lcf/query_init.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lcf {

void QueryInitConfig::validate() const {
  if (num_proposals > num_queries) {
    throw std::invalid_argument("query init: num_proposals exceeds num_queries");
  }
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("query init: nms_iou");
  if (!(miss_rate >= 0.0 && miss_rate <= 1.0)) {
    throw std::invalid_argument("query init: miss_rate must be in [0, 1]");
  }
  if (pixel_sigma < 0.0 || depth_log_sigma < 0.0 || size_log_sigma < 0.0 || yaw_sigma < 0.0 ||
      velocity_sigma < 0.0 || false_positives_per_view < 0.0) {
    throw std::invalid_argument("query init: noise parameters must be non-negative");
  }
  if (noise_cap <= 0.0) throw std::invalid_argument("query init: noise_cap must be positive");
}

std::vector<std::vector<PerspectiveProposal>> perspective_oracle(const SceneSample& scene,
                                                                 const QueryInitConfig& cfg,
                                                                 Rng& rng) {
  const CameraRig& rig = scene.rig;
  std::vector<std::vector<PerspectiveProposal>> out(rig.num_views());
  for (std::size_t v = 0; v < rig.num_views(); ++v) {
    const CameraView& view = rig.views[v];
    Rng vr = rng.substream(v);
    for (const Box3D& box : scene.boxes) {
      const auto px = project_to_view(box.center, view);
      if (!px) continue;
      // Draw every variate even for missed objects so one object's miss
      // does not shift the noise of the next.
      const bool missed = vr.bernoulli(cfg.miss_rate);
      const double du = cfg.pixel_sigma * vr.normal();
      const double dv = cfg.pixel_sigma * vr.normal();
      const double dlog = cfg.depth_log_sigma * vr.normal();
      Vec3 size = box.size;
      for (int k = 0; k < 3; ++k) size[k] *= std::exp(cfg.size_log_sigma * vr.normal());
      const double yaw = normalize_yaw(box.yaw + cfg.yaw_sigma * vr.normal());
      const Vec2 vel(box.velocity.x() + cfg.velocity_sigma * vr.normal(),
                     box.velocity.y() + cfg.velocity_sigma * vr.normal());
      if (missed) continue;
      const double noise =
          cfg.pixel_sigma > 0.0 ? std::hypot(du, dv) / cfg.pixel_sigma : 0.0;
      PerspectiveProposal p;
      p.view = v;
      p.cx = px->u + du;
      p.cy = px->v + dv;
      p.depth = px->depth * std::exp(dlog);
      p.size = size;
      p.yaw = yaw;
      p.velocity = vel;
      p.score = std::clamp(1.0 - cfg.score_slope * noise / cfg.noise_cap, 0.05, 1.0);
      p.class_id = box.class_id;
      out[v].push_back(p);
    }
    const std::uint64_t fps = vr.poisson(cfg.false_positives_per_view);
    for (std::uint64_t i = 0; i < fps; ++i) {
      PerspectiveProposal p;
      p.view = v;
      p.cx = vr.uniform(0.0, static_cast<double>(view.width));
      p.cy = vr.uniform(0.0, static_cast<double>(view.height));
      p.depth = vr.uniform(4.0, 45.0);
      p.class_id = static_cast<int>(vr.below(kNumClasses));
      p.size = class_size_prior(p.class_id);
      p.yaw = vr.uniform(-std::numbers::pi, std::numbers::pi);
      p.score = vr.uniform(0.05, 0.3);
      out[v].push_back(p);
    }
  }
  return out;
}

std::vector<Box3D> lift_proposals(const std::vector<std::vector<PerspectiveProposal>>& proposals,
                                  const CameraRig& rig) {
  std::vector<Box3D> boxes;
  for (const auto& per_view : proposals) {
    for (const PerspectiveProposal& p : per_view) {
      if (p.view >= rig.num_views()) {
        throw std::out_of_range("proposal references missing view " + std::to_string(p.view));
      }
      Box3D b;
      b.center = unproject_center(p.cx, p.cy, p.depth, rig.views[p.view]);
      b.size = p.size;
      b.yaw = p.yaw;
      b.velocity = p.velocity;
      b.score = p.score;
      b.class_id = p.class_id;
      boxes.push_back(b);
    }
  }
  return boxes;
}

std::vector<Box3D> select_topk(const std::vector<Box3D>& boxes, const QueryInitConfig& cfg) {
  const std::vector<std::size_t> keep = nms_3d(boxes, cfg.nms_iou);
  std::vector<Box3D> out;
  for (std::size_t i = 0; i < keep.size() && out.size() < cfg.num_proposals; ++i) {
    out.push_back(boxes[keep[i]]);
  }
  return out;
}

std::vector<Query> random_queries(std::size_t n, const DetectionRange& range, Rng& rng) {
  std::vector<Query> out(n);
  for (Query& q : out) {
    Box3D& b = q.box;
    b.class_id = static_cast<int>(rng.below(kNumClasses));
    b.size = class_size_prior(b.class_id);
    b.center = Vec3(rng.uniform(range.x_min, range.x_max), rng.uniform(range.y_min, range.y_max),
                    0.5 * b.size.z());
    b.yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    b.velocity = Vec2::Zero();
    b.score = 0.0;
  }
  return out;
}

std::vector<Query> init_queries(const std::vector<Box3D>& boxes, const CameraFeatureSet& camera,
                                const CameraRig& rig, const DetectionRange& range) {
  std::vector<Query> out;
  out.reserve(boxes.size());
  for (const Box3D& b : boxes) {
    Query q;
    q.box = b;
    q.box.center = range.clamp(b.center);
    q.from_proposal = true;
    const std::vector<std::size_t> hits = hit_views(q.box.center, rig, 0);
    if (!hits.empty()) q.feature = sample_view_scale_mean(camera, q.box.center, rig, 0, hits);
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<Query> generate_queries(const SceneSample& scene, const QueryInitConfig& cfg,
                                    Rng& rng) {
  cfg.validate();
  Rng oracle_rng = rng.substream(11);
  Rng random_rng = rng.substream(12);
  const std::vector<Box3D> lifted =
      lift_proposals(perspective_oracle(scene, cfg, oracle_rng), scene.rig);
  std::vector<Query> queries =
      init_queries(select_topk(lifted, cfg), scene.camera, scene.rig, scene.lidar.range());
  std::vector<Query> pads = random_queries(cfg.num_queries - queries.size(),
                                           scene.lidar.range(), random_rng);
  queries.insert(queries.end(), pads.begin(), pads.end());
  return queries;
}

}  // namespace lcf
