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

#include "lcf/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "lcf/matching.hpp"
#include "lcf/uncertainty_fusion.hpp"

namespace lcf {
namespace {

std::string layer_prefix(std::size_t layer) { return "layer" + std::to_string(layer); }

// Prior probability of the rare positive class at initialization.
constexpr double kClassPrior = 0.01;
constexpr double kVelocityScale = 5.0;

Var add_terms(const std::vector<Var>& terms) {
  Var acc = terms.at(0);
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace

void ModelConfig::validate() const {
  if (layers == 0) throw std::invalid_argument("model: layers must be >= 1");
  if (num_classes == 0) throw std::invalid_argument("model: num_classes must be >= 1");
  sampling.validate();
  range.validate();
}

ParameterStore init_model(const ModelConfig& cfg, Rng& rng) {
  cfg.validate();
  const std::size_t c = cfg.channels();
  ParameterStore store;
  Tensor embedding({1, c});
  for (double& x : embedding.data()) x = rng.normal(0.0, 1.0);
  store.add("query.embedding", std::move(embedding));
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    const std::string pre = layer_prefix(l);
    add_feed_forward(store, pre + ".pos", kEncodingWidth, c, c, rng);
    add_pattern_params(store, pre + ".lidar.pattern", cfg.sampling, Modality::kLidar, rng);
    add_pattern_params(store, pre + ".camera.pattern", cfg.sampling, Modality::kCamera, rng);
    add_mixer_params(store, pre + ".lidar.mix", c, cfg.sampling.rows(Modality::kLidar), rng);
    add_mixer_params(store, pre + ".camera.mix", c, cfg.sampling.rows(Modality::kCamera), rng);
    add_uncertainty_params(store, pre + ".lidar.unc", c, rng);
    add_uncertainty_params(store, pre + ".camera.unc", c, rng);
    add_fusion_params(store, pre + ".fuse", c, rng);
    add_feed_forward(store, pre + ".cls", c, c, cfg.num_classes, rng);
    store.value(pre + ".cls.1.bias").fill(-std::log((1.0 - kClassPrior) / kClassPrior));
    add_feed_forward(store, pre + ".box", c, c, kCodeWidth, rng, true);
  }
  return store;
}

Tensor box_state(std::span<const Box3D> boxes) {
  Tensor s({boxes.size(), kStateWidth});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    double* r = s.raw() + i * kStateWidth;
    r[0] = b.center.x();
    r[1] = b.center.y();
    r[2] = b.center.z();
    for (int k = 0; k < 3; ++k) r[3 + k] = std::log(b.size[k]);
    r[6] = b.yaw;
    r[7] = b.velocity.x();
    r[8] = b.velocity.y();
  }
  return s;
}

Box3D state_to_box(const double* r) {
  Box3D b;
  b.center = Vec3(r[0], r[1], r[2]);
  b.size = Vec3(std::exp(r[3]), std::exp(r[4]), std::exp(r[5]));
  b.yaw = normalize_yaw(r[6]);
  b.velocity = Vec2(r[7], r[8]);
  return b;
}

Tensor box_code(std::span<const Box3D> boxes) {
  Tensor c({boxes.size(), kCodeWidth});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    const Box3D& b = boxes[i];
    double* r = c.raw() + i * kCodeWidth;
    for (int k = 0; k < 3; ++k) {
      r[k] = b.center[k];
      r[3 + k] = std::log(b.size[k]);
    }
    r[6] = std::sin(b.yaw);
    r[7] = std::cos(b.yaw);
    r[8] = b.velocity.x();
    r[9] = b.velocity.y();
  }
  return c;
}

Var box_code(Var state) {
  Var yaw = slice(state, 1, 6, 7);
  return concat({slice(state, 1, 0, 6), sin(yaw), cos(yaw), slice(state, 1, 7, 9)}, 1);
}

Var apply_box_delta(Var state, Var delta) {
  if (state.shape().size() != 2 || state.dim(1) != kStateWidth || delta.shape().size() != 2 ||
      delta.dim(1) != kCodeWidth || delta.dim(0) != state.dim(0)) {
    throw std::invalid_argument("apply_box_delta: expected [N, 9] state and [N, 10] delta");
  }
  Var yaw = slice(state, 1, 6, 7);
  Var new_yaw = atan2(add(sin(yaw), slice(delta, 1, 6, 7)), add(cos(yaw), slice(delta, 1, 7, 8)));
  Var xy = polar_shift(slice(state, 1, 0, 2), slice(delta, 1, 0, 2));
  return concat({xy, add(slice(state, 1, 2, 6), slice(delta, 1, 2, 6)), new_yaw,
                 add(slice(state, 1, 7, 9), slice(delta, 1, 8, 10))},
                1);
}

Tensor box_encoding(std::span<const Box3D> boxes, const DetectionRange& range) {
  const Vec3 lo(range.x_min, range.y_min, range.z_min);
  const Vec3 half = 0.5 * range.extent();
  const Tensor code = box_code(boxes);
  Tensor e({boxes.size(), kEncodingWidth});
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    double* r = e.raw() + i * kEncodingWidth;
    std::copy_n(code.raw() + i * kCodeWidth, kCodeWidth, r);
    for (int d = 0; d < 3; ++d) r[d] = (r[d] - lo[d]) / half[d] - 1.0;
    r[8] /= kVelocityScale;
    r[9] /= kVelocityScale;
    r[kCodeWidth] = std::log(std::max(boxes[i].center.head<2>().norm(), 1.0));
  }
  return e;
}

Var refine_box(const BoundParams& p, const std::string& prefix, Var features, Var state) {
  return apply_box_delta(state, apply_feed_forward(p, prefix, features));
}

Var query_features(const BoundParams& p, std::span<const Query> queries, std::size_t channels) {
  Tensor base({queries.size(), channels});
  Tensor mask({queries.size(), 1});
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (queries[i].uses_default_embedding()) {
      mask[i] = 1.0;
      continue;
    }
    if (queries[i].feature.size() != channels) {
      throw std::invalid_argument("query feature width " + std::to_string(queries[i].feature.size()) +
                                  " does not match model width " + std::to_string(channels));
    }
    std::copy(queries[i].feature.begin(), queries[i].feature.end(), base.raw() + i * channels);
  }
  Tape& tape = p.tape();
  return add(tape.constant(std::move(base)), mul(tape.constant(std::move(mask)), p("query.embedding")));
}

LayerOutput decode_layer(const BoundParams& p, std::size_t layer, Var features,
                         std::span<const Box3D> boxes, const std::vector<Var>& camera_maps,
                         const std::vector<Var>& lidar_maps, const CameraRig& rig,
                         std::span<const std::size_t> strides, const ModelConfig& cfg,
                         const DecodeOptions& options) {
  Tape& tape = p.tape();
  const std::string pre = layer_prefix(layer);
  const std::size_t n = boxes.size();
  const std::size_t k = cfg.sampling.points;
  Tensor centers({n, 3}), anchors({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) centers[i * 3 + d] = boxes[i].center[d];
    anchors[i * 2] = boxes[i].center.x();
    anchors[i * 2 + 1] = boxes[i].center.y();
  }
  Var centers_v = tape.constant(std::move(centers));
  Var anchors_v = tape.constant(std::move(anchors));
  Var state = tape.constant(box_state(boxes));
  features = add(features, apply_feed_forward(p, pre + ".pos", tape.constant(box_encoding(boxes, cfg.range))));

  LayerProfile* prof = options.profile;
  auto clock = std::chrono::steady_clock::now();
  // Adds the time since the previous lap to *slot when profiling.
  auto lap = [&](double LayerProfile::*slot) {
    if (!prof) return;
    const auto now = std::chrono::steady_clock::now();
    prof->*slot += std::chrono::duration<double>(now - clock).count();
    clock = now;
  };

  const SamplingPattern lp =
      predict_pattern(p, pre + ".lidar.pattern", features, boxes, cfg.sampling, Modality::kLidar);
  const SamplingPattern cp =
      predict_pattern(p, pre + ".camera.pattern", features, boxes, cfg.sampling, Modality::kCamera);
  lap(&LayerProfile::pattern);
  Var lidar_roi = sample_lidar(centers_v, lp, lidar_maps, cfg.range, k);
  lap(&LayerProfile::sample_lidar);
  Var camera_roi = sample_camera(centers_v, cp, camera_maps, rig, strides, k);
  lap(&LayerProfile::sample_camera);
  Var lidar = adaptive_mix(p, pre + ".lidar.mix", features, lidar_roi);
  Var camera = adaptive_mix(p, pre + ".camera.mix", features, camera_roi);
  lap(&LayerProfile::mix);

  LayerOutput out;
  out.reg_lidar = regress_position(p, pre + ".lidar.unc", lidar, anchors_v);
  out.reg_camera = regress_position(p, pre + ".camera.unc", camera, anchors_v);
  out.dist_lidar = predict_distance(p, pre + ".lidar.unc", lidar);
  out.dist_camera = predict_distance(p, pre + ".camera.unc", camera);
  if (options.fusion == FusionMode::kEqual) {
    out.u_lidar = tape.constant(Tensor({n, 1}));
    out.u_camera = tape.constant(Tensor({n, 1}));
  } else if (options.oracle_uncertainty) {
    auto oracle = [&](const Var& reg) {
      Tensor u({n, 1});
      const auto d = nearest_gt_distance(reg.value(), options.ground_truth);
      for (std::size_t i = 0; i < n; ++i) u[i] = uncertainty_from_distance(d[i]);
      return tape.constant(std::move(u));
    };
    out.u_lidar = oracle(out.reg_lidar);
    out.u_camera = oracle(out.reg_camera);
  } else {
    out.u_lidar = uncertainty_from_distance(out.dist_lidar);
    out.u_camera = uncertainty_from_distance(out.dist_camera);
  }
  out.features = fuse(p, pre + ".fuse", camera, out.u_camera, lidar, out.u_lidar);
  lap(&LayerProfile::fusion);
  out.logits = apply_feed_forward(p, pre + ".cls", out.features);
  out.state = refine_box(p, pre + ".box", out.features, state);
  lap(&LayerProfile::heads);

  const Tensor& sv = out.state.value();
  const Tensor& lv = out.logits.value();
  const std::size_t classes = lv.dim(1);
  out.boxes.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Box3D b = state_to_box(sv.raw() + i * kStateWidth);
    const double* logit = lv.raw() + i * classes;
    const std::size_t best = static_cast<std::size_t>(std::max_element(logit, logit + classes) - logit);
    b.class_id = static_cast<int>(best);
    b.score = 1.0 / (1.0 + std::exp(-logit[best]));
    out.boxes.push_back(b);
  }
  return out;
}

std::vector<LayerOutput> decode(const BoundParams& p, std::span<const Query> queries,
                                const CameraFeatureSet& camera, const LidarFeaturePyramid& lidar,
                                const CameraRig& rig, const ModelConfig& cfg,
                                const DecodeOptions& options) {
  if (camera.num_frames() != cfg.sampling.frames || rig.num_frames() != cfg.sampling.frames ||
      camera.num_scales() != cfg.sampling.camera_scales ||
      lidar.num_scales() != cfg.sampling.lidar_scales || camera.num_views() != rig.num_views() ||
      camera.channels() != cfg.channels() || lidar.channels() != cfg.channels()) {
    throw std::invalid_argument("decode: feature sets do not match the model configuration");
  }
  Tape& tape = p.tape();
  const std::vector<Var> camera_maps = camera_map_vars(tape, camera);
  const std::vector<Var> lidar_maps = lidar_map_vars(tape, lidar);
  std::vector<Box3D> boxes;
  boxes.reserve(queries.size());
  for (const Query& q : queries) boxes.push_back(q.box);
  Var features = query_features(p, queries, cfg.channels());
  std::vector<LayerOutput> outputs;
  for (std::size_t l = 0; l < cfg.layers; ++l) {
    outputs.push_back(decode_layer(p, l, features, boxes, camera_maps, lidar_maps, rig,
                                   camera.strides(), cfg, options));
    features = outputs.back().features;
    boxes = outputs.back().boxes;
  }
  return outputs;
}

std::vector<int> hungarian_match(const Tensor& scores, const Tensor& codes,
                                 std::span<const Box3D> gts, const LossWeights& weights) {
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  const Tensor gt_codes = box_code(gts);
  Eigen::MatrixXd cost(static_cast<Eigen::Index>(gts.size()), static_cast<Eigen::Index>(n));
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const auto cls = static_cast<std::size_t>(gts[g].class_id);
    if (cls >= classes) throw std::invalid_argument("hungarian_match: class id out of range");
    for (std::size_t i = 0; i < n; ++i) {
      double l1 = 0.0;
      for (std::size_t d = 0; d < kCodeWidth; ++d) {
        l1 += weights.code[d] * std::fabs(codes[i * kCodeWidth + d] - gt_codes[g * kCodeWidth + d]);
      }
      cost(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(i)) =
          weights.match.classification * (1.0 - scores[i * classes + cls]) + weights.match.box * l1;
    }
  }
  return solve_assignment(cost);
}

Loss compute_loss(const std::vector<LayerOutput>& layers, std::span<const Box3D> gts,
                  const LossWeights& weights) {
  if (layers.empty()) throw std::invalid_argument("compute_loss: no layers");
  Tape& tape = *layers[0].logits.tape;
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, gts.size()));
  const Tensor gt_codes = box_code(gts);
  Loss loss;
  std::vector<Var> totals;
  for (const LayerOutput& layer : layers) {
    const std::size_t n = layer.logits.dim(0), classes = layer.logits.dim(1);
    Var codes = box_code(layer.state);
    Tensor probs = layer.logits.value();
    for (double& x : probs.data()) x = 1.0 / (1.0 + std::exp(-x));
    const std::vector<int> match = hungarian_match(probs, codes.value(), gts, weights);
    loss.matches.push_back(match);

    Tensor target({n, classes});
    std::vector<std::size_t> rows, gt_rows;
    for (std::size_t g = 0; g < match.size(); ++g) {
      if (match[g] < 0) continue;
      target[static_cast<std::size_t>(match[g]) * classes + static_cast<std::size_t>(gts[g].class_id)] = 1.0;
      rows.push_back(static_cast<std::size_t>(match[g]));
      gt_rows.push_back(g);
    }
    // Sigmoid focal loss with gamma = 2.
    Tensor negative({n, classes}, 1.0);
    for (std::size_t i = 0; i < target.size(); ++i) negative[i] -= target[i];
    Var p = sigmoid(layer.logits);
    Var q = add_scalar(scale(p, -1.0), 1.0);
    Var pos = mul(tape.constant(target), mul(mul(q, q), softplus(scale(layer.logits, -1.0))));
    Var neg = mul(tape.constant(std::move(negative)), mul(mul(p, p), softplus(layer.logits)));
    Var cls = scale(add(scale(sum(pos), weights.focal_alpha), scale(sum(neg), 1.0 - weights.focal_alpha)), norm);
    loss.terms.classification += cls.value()[0];
    std::vector<Var> layer_terms = {scale(cls, weights.classification)};

    if (!rows.empty()) {
      const std::size_t m = rows.size();
      Tensor tgt({m, kCodeWidth}), tgt_xy({m, 2}), code_w({1, kCodeWidth});
      for (std::size_t d = 0; d < kCodeWidth; ++d) code_w[d] = weights.code[d];
      for (std::size_t j = 0; j < m; ++j) {
        std::copy_n(gt_codes.raw() + gt_rows[j] * kCodeWidth, kCodeWidth, tgt.raw() + j * kCodeWidth);
        tgt_xy[j * 2] = gts[gt_rows[j]].center.x();
        tgt_xy[j * 2 + 1] = gts[gt_rows[j]].center.y();
      }
      Var box = scale(sum(mul(abs(sub(gather_rows(codes, rows), tape.constant(tgt))), tape.constant(code_w))), norm);
      loss.terms.box += box.value()[0];
      layer_terms.push_back(scale(box, weights.box));

      Var xy_target = tape.constant(tgt_xy);
      std::vector<Var> reg_terms, unc_terms;
      for (const auto& [reg, dist] : {std::pair{layer.reg_camera, layer.dist_camera},
                                      std::pair{layer.reg_lidar, layer.dist_lidar}}) {
        Var picked = gather_rows(reg, rows);
        reg_terms.push_back(sum(abs(sub(picked, xy_target))));
        Tensor oracle({m, 1});
        for (std::size_t j = 0; j < m; ++j) {
          oracle[j] = std::hypot(picked.value()[j * 2] - tgt_xy[j * 2],
                                 picked.value()[j * 2 + 1] - tgt_xy[j * 2 + 1]);
        }
        unc_terms.push_back(sum(abs(sub(gather_rows(dist, rows), tape.constant(std::move(oracle))))));
      }
      Var reg = scale(add_terms(reg_terms), norm);
      Var unc = scale(add_terms(unc_terms), norm);
      loss.terms.regression += reg.value()[0];
      loss.terms.uncertainty += unc.value()[0];
      layer_terms.push_back(scale(reg, weights.regression));
      layer_terms.push_back(scale(unc, weights.uncertainty));
    }
    totals.push_back(add_terms(layer_terms));
  }
  loss.total = add_terms(totals);
  loss.terms.total = loss.total.value()[0];
  return loss;
}

}  // namespace lcf
