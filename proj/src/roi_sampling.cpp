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

#include "lcf/roi_sampling.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lcf/bilinear.hpp"

namespace lcf {
namespace {

void require_shape(const Var& v, const Shape& expected, const char* what) {
  if (v.shape() != expected) {
    throw std::invalid_argument(std::string(what) + ": expected shape " + shape_string(expected) +
                                ", got " + shape_string(v.shape()));
  }
}

// Ego-frame point -> pixel for one view, with the Jacobian rows du/dp and
// dv/dp. False when the point is behind the camera or off the image.
struct Projection {
  double u = 0.0, v = 0.0;
  Vec3 du = Vec3::Zero(), dv = Vec3::Zero();
};

bool project_with_jacobian(const Vec3& p, const Rigid3& to_camera, const CameraView& view,
                           Projection* out) {
  const Vec3 cam = to_camera * p;
  if (cam.z() <= kMinHitDepth) return false;
  const Vec3 pix = view.intrinsics * cam;
  const double u = pix.x() / cam.z();
  const double v = pix.y() / cam.z();
  if (!(u >= 0.0 && u < view.width && v >= 0.0 && v < view.height)) return false;
  out->u = u;
  out->v = v;
  const Vec3 ez(0.0, 0.0, 1.0);
  const Vec3 du_cam = (view.intrinsics.row(0).transpose() - u * ez) / cam.z();
  const Vec3 dv_cam = (view.intrinsics.row(1).transpose() - v * ez) / cam.z();
  out->du = to_camera.linear().transpose() * du_cam;
  out->dv = to_camera.linear().transpose() * dv_cam;
  return true;
}

}  // namespace

void RoiSamplingConfig::validate() const {
  if (channels == 0 || points == 0 || lidar_scales == 0 || camera_scales == 0 || frames == 0) {
    throw std::invalid_argument("sampling config: all counts must be >= 1");
  }
  if (!(offset_limit > 0.0)) throw std::invalid_argument("sampling config: offset_limit <= 0");
  if (!(ring_radius >= 0.0 && ring_radius < offset_limit)) {
    throw std::invalid_argument("sampling config: ring_radius must be in [0, offset_limit)");
  }
}

void add_pattern_params(ParameterStore& store, const std::string& prefix,
                        const RoiSamplingConfig& cfg, Modality modality, Rng& rng) {
  const bool lidar = modality == Modality::kLidar;
  const std::size_t outer = lidar ? cfg.lidar_scales : cfg.frames;
  const std::size_t dims = lidar ? 2 : 3;
  const std::size_t groups = outer * cfg.points;
  add_linear(store, prefix + ".offset", cfg.channels, groups * dims, rng, 1.0, true);
  Tensor& bias = store.value(prefix + ".offset.bias");
  for (std::size_t g = 0; g < groups; ++g) {
    const double angle =
        2.0 * std::numbers::pi * static_cast<double>(g % cfg.points) / static_cast<double>(cfg.points);
    const double target[2] = {cfg.ring_radius * std::cos(angle), cfg.ring_radius * std::sin(angle)};
    for (std::size_t d = 0; d < 2; ++d) {
      const double x = target[d] / cfg.offset_limit;
      bias[g * dims + d] = std::log((1.0 + x) / (1.0 - x));
    }
  }
  const std::size_t weights = lidar ? groups : cfg.frames * cfg.camera_scales * cfg.points;
  add_linear(store, prefix + ".attention", cfg.channels, weights, rng, 1.0, true);
}

SamplingPattern predict_pattern(const BoundParams& p, const std::string& prefix, Var queries,
                                std::span<const Box3D> boxes, const RoiSamplingConfig& cfg,
                                Modality modality) {
  const std::size_t n = queries.dim(0);
  if (boxes.size() != n) throw std::invalid_argument("predict_pattern: one box per query");
  const bool lidar = modality == Modality::kLidar;
  const std::size_t dims = lidar ? 2 : 3;
  const std::size_t groups = (lidar ? cfg.lidar_scales : cfg.frames) * cfg.points;

  Var raw = reshape(apply_linear(p, prefix + ".offset", queries), {n, groups, dims});
  Var bounded = scale(add_scalar(scale(sigmoid(raw), 2.0), -1.0), cfg.offset_limit);
  // Row-vector map from box-local half-extent units to ego meters.
  Tensor frame({n, dims, dims});
  for (std::size_t i = 0; i < n; ++i) {
    const double c = std::cos(boxes[i].yaw), s = std::sin(boxes[i].yaw);
    const double hl = 0.5 * boxes[i].size.x(), hw = 0.5 * boxes[i].size.y();
    double* f = frame.raw() + i * dims * dims;
    f[0] = hl * c;
    f[1] = hl * s;
    f[dims] = -hw * s;
    f[dims + 1] = hw * c;
    if (dims == 3) f[8] = 0.5 * boxes[i].size.z();
  }
  SamplingPattern out;
  out.offsets = matmul(bounded, p.tape().constant(std::move(frame)));
  Var logits = apply_linear(p, prefix + ".attention", queries);
  out.weights = lidar ? softmax(logits)
                      : softmax(reshape(logits, {n, cfg.frames, cfg.camera_scales * cfg.points}));
  return out;
}

std::vector<Var> lidar_map_vars(Tape& tape, const LidarFeaturePyramid& pyramid) {
  std::vector<Var> maps;
  for (std::size_t r = 0; r < pyramid.num_scales(); ++r) maps.push_back(tape.constant(pyramid.at(r).data));
  return maps;
}

std::vector<Var> camera_map_vars(Tape& tape, const CameraFeatureSet& set) {
  std::vector<Var> maps;
  for (std::size_t v = 0; v < set.num_views(); ++v) {
    for (std::size_t m = 0; m < set.num_scales(); ++m) {
      for (std::size_t t = 0; t < set.num_frames(); ++t) maps.push_back(tape.constant(set.at(v, m, t).data));
    }
  }
  return maps;
}

Var sample_lidar(Var centers, const SamplingPattern& pattern, const std::vector<Var>& maps,
                 const DetectionRange& range, std::size_t points) {
  const std::size_t n = centers.dim(0);
  const std::size_t scales = maps.size();
  if (scales == 0 || points == 0) throw std::invalid_argument("sample_lidar: empty pattern");
  const std::size_t groups = scales * points;
  require_shape(centers, {n, 3}, "sample_lidar centers");
  require_shape(pattern.offsets, {n, groups, 2}, "sample_lidar offsets");
  require_shape(pattern.weights, {n, groups}, "sample_lidar weights");
  const std::size_t channels = maps[0].dim(2);
  std::vector<std::size_t> widths, heights;
  for (const Var& m : maps) {
    if (m.shape().size() != 3 || m.dim(2) != channels) {
      throw std::invalid_argument("sample_lidar: maps must be [H, W, C] with equal C");
    }
    heights.push_back(m.dim(0));
    widths.push_back(m.dim(1));
  }
  const double ex = range.x_max - range.x_min, ey = range.y_max - range.y_min;
  if (!(ex > 0.0 && ey > 0.0)) throw std::invalid_argument("sample_lidar: degenerate range");

  // Texel coordinates of every (n, r, k) sample; shared by forward and backward.
  auto coords = [=](const Tensor& c, const Tensor& o, std::size_t i, std::size_t r,
                    std::size_t g) {
    const double px = c[i * 3] + o[(i * groups + g) * 2];
    const double py = c[i * 3 + 1] + o[(i * groups + g) * 2 + 1];
    return Vec2((px - range.x_min) / ex * static_cast<double>(widths[r]),
                (py - range.y_min) / ey * static_cast<double>(heights[r]));
  };

  Tape& tape = *centers.tape;
  Tensor out({n, points, channels});
  const Tensor& cv = centers.value();
  const Tensor& ov = pattern.offsets.value();
  const Tensor& wv = pattern.weights.value();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t r = 0; r < scales; ++r) {
      const Tensor& map = maps[r].value();
      for (std::size_t k = 0; k < points; ++k) {
        const std::size_t g = r * points + k;
        const Vec2 xy = coords(cv, ov, i, r, g);
        const auto taps = kernels::bilinear_taps(xy.x(), xy.y(), widths[r], heights[r]);
        kernels::bilinear_accumulate(map.raw(), channels, taps, wv[i * groups + g],
                                     out.raw() + (i * points + k) * channels);
      }
    }
  }

  std::vector<std::size_t> parents = {centers.id, pattern.offsets.id, pattern.weights.id};
  for (const Var& m : maps) parents.push_back(m.id);
  const std::vector<std::size_t> ids = parents;
  return tape.record(
      OpKind::kSampleLidar, std::move(out), std::move(parents), [=](Tape& t, std::size_t self) {
        const auto g = t.out_grad(self);
        const Tensor& c = t.value(ids[0]);
        const Tensor& o = t.value(ids[1]);
        const Tensor& w = t.value(ids[2]);
        const bool want_pos = t.requires_grad(ids[0]) || t.requires_grad(ids[1]);
        std::span<double> gc, go, gw;
        if (t.requires_grad(ids[0])) gc = t.grad_buffer(ids[0]);
        if (t.requires_grad(ids[1])) go = t.grad_buffer(ids[1]);
        if (t.requires_grad(ids[2])) gw = t.grad_buffer(ids[2]);
        for (std::size_t r = 0; r < scales; ++r) {
          const std::size_t mid = ids[3 + r];
          const Tensor& map = t.value(mid);
          std::span<double> gm;
          if (t.requires_grad(mid)) gm = t.grad_buffer(mid);
          const double sx = static_cast<double>(widths[r]) / ex;
          const double sy = static_cast<double>(heights[r]) / ey;
          for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < points; ++k) {
              const std::size_t gi = r * points + k;
              const Vec2 xy = coords(c, o, i, r, gi);
              const auto taps = kernels::bilinear_taps(xy.x(), xy.y(), widths[r], heights[r]);
              const double* gout = g.data() + (i * points + k) * channels;
              const double weight = w[i * groups + gi];
              if (!gw.empty()) gw[i * groups + gi] += kernels::bilinear_dot(map.raw(), channels, taps, gout);
              if (!gm.empty()) kernels::bilinear_map_grad(gm.data(), channels, taps, weight, gout);
              if (want_pos) {
                double gx = 0.0, gy = 0.0;
                kernels::bilinear_coord_grad(map.raw(), channels, taps, weight, gout, &gx, &gy);
                gx *= sx;
                gy *= sy;
                if (!gc.empty()) {
                  gc[i * 3] += gx;
                  gc[i * 3 + 1] += gy;
                }
                if (!go.empty()) {
                  go[(i * groups + gi) * 2] += gx;
                  go[(i * groups + gi) * 2 + 1] += gy;
                }
              }
            }
          }
        }
      });
}

Var sample_camera(Var centers, const SamplingPattern& pattern, const std::vector<Var>& maps,
                  const CameraRig& rig, std::span<const std::size_t> strides,
                  std::size_t points) {
  const std::size_t n = centers.dim(0);
  const std::size_t views = rig.num_views();
  const std::size_t frames = rig.num_frames();
  const std::size_t scales = strides.size();
  if (views == 0 || frames == 0 || scales == 0 || points == 0) {
    throw std::invalid_argument("sample_camera: empty rig or pattern");
  }
  if (maps.size() != views * scales * frames) {
    throw std::invalid_argument("sample_camera: expected " + std::to_string(views * scales * frames) +
                                " maps, got " + std::to_string(maps.size()));
  }
  require_shape(centers, {n, 3}, "sample_camera centers");
  require_shape(pattern.offsets, {n, frames * points, 3}, "sample_camera offsets");
  require_shape(pattern.weights, {n, frames, scales * points}, "sample_camera weights");
  const std::size_t channels = maps[0].dim(2);
  for (const Var& m : maps) {
    if (m.shape().size() != 3 || m.dim(2) != channels) {
      throw std::invalid_argument("sample_camera: maps must be [H, W, C] with equal C");
    }
  }
  // Ego(0) -> camera of view v at frame t.
  std::vector<Rigid3> to_camera(views * frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const Rigid3 align = rig.ego_poses[t].inverse() * rig.ego_poses[0];
    for (std::size_t v = 0; v < views; ++v) to_camera[v * frames + t] = rig.views[v].extrinsics * align;
  }
  std::vector<std::size_t> stride_copy(strides.begin(), strides.end());
  const std::size_t rows = frames * points;
  auto map_index = [=](std::size_t v, std::size_t m, std::size_t t) {
    return (v * scales + m) * frames + t;
  };

  // Calls visit(view, projection, 1/|hits|) for each view that sees the
  // sample. Two passes so the hit count is known without a buffer.
  auto for_each_hit = [cams = rig.views, to_camera, views, frames](const Vec3& p, std::size_t t, auto&& visit) {
    Projection pr;
    std::size_t count = 0;
    for (std::size_t v = 0; v < views; ++v) {
      count += project_with_jacobian(p, to_camera[v * frames + t], cams[v], &pr) ? 1 : 0;
    }
    if (count == 0) return;
    const double share = 1.0 / static_cast<double>(count);
    for (std::size_t v = 0; v < views; ++v) {
      if (project_with_jacobian(p, to_camera[v * frames + t], cams[v], &pr)) visit(v, pr, share);
    }
  };

  Tape& tape = *centers.tape;
  Tensor out({n, rows, channels});
  {
    const Tensor& cv = centers.value();
    const Tensor& ov = pattern.offsets.value();
    const Tensor& wv = pattern.weights.value();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < frames; ++t) {
        for (std::size_t k = 0; k < points; ++k) {
          const std::size_t row = t * points + k;
          const double* o = ov.raw() + (i * rows + row) * 3;
          const Vec3 p(cv[i * 3] + o[0], cv[i * 3 + 1] + o[1], cv[i * 3 + 2] + o[2]);
          double* dst = out.raw() + (i * rows + row) * channels;
          for_each_hit(p, t, [&](std::size_t v, const Projection& pr, double share) {
            for (std::size_t m = 0; m < scales; ++m) {
              const Tensor& map = maps[map_index(v, m, t)].value();
              const double sd = static_cast<double>(stride_copy[m]);
              const auto taps = kernels::bilinear_taps(pr.u / sd, pr.v / sd, map.dim(1), map.dim(0));
              const double w = wv[(i * frames + t) * scales * points + m * points + k];
              kernels::bilinear_accumulate(map.raw(), channels, taps, share * w, dst);
            }
          });
        }
      }
    }
  }

  std::vector<std::size_t> parents = {centers.id, pattern.offsets.id, pattern.weights.id};
  for (const Var& m : maps) parents.push_back(m.id);
  const std::vector<std::size_t> ids = parents;
  return tape.record(
      OpKind::kSampleCamera, std::move(out), std::move(parents),
      [=](Tape& t_, std::size_t self) {
        const auto g = t_.out_grad(self);
        const Tensor& c = t_.value(ids[0]);
        const Tensor& o = t_.value(ids[1]);
        const Tensor& w = t_.value(ids[2]);
        std::span<double> gc, go, gw;
        if (t_.requires_grad(ids[0])) gc = t_.grad_buffer(ids[0]);
        if (t_.requires_grad(ids[1])) go = t_.grad_buffer(ids[1]);
        if (t_.requires_grad(ids[2])) gw = t_.grad_buffer(ids[2]);
        const bool want_pos = !gc.empty() || !go.empty();
        std::vector<std::span<double>> gm(ids.size() - 3);
        for (std::size_t j = 0; j < gm.size(); ++j) {
          if (t_.requires_grad(ids[3 + j])) gm[j] = t_.grad_buffer(ids[3 + j]);
        }
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t t = 0; t < frames; ++t) {
            for (std::size_t k = 0; k < points; ++k) {
              const std::size_t row = t * points + k;
              const double* off = o.raw() + (i * rows + row) * 3;
              const Vec3 p(c[i * 3] + off[0], c[i * 3 + 1] + off[1], c[i * 3 + 2] + off[2]);
              const double* gout = g.data() + (i * rows + row) * channels;
              Vec3 gp = Vec3::Zero();
              for_each_hit(p, t, [&](std::size_t v, const Projection& pr, double share) {
                for (std::size_t m = 0; m < scales; ++m) {
                  const std::size_t mi = map_index(v, m, t);
                  const Tensor& map = t_.value(ids[3 + mi]);
                  const double sd = static_cast<double>(stride_copy[m]);
                  const auto taps = kernels::bilinear_taps(pr.u / sd, pr.v / sd, map.dim(1), map.dim(0));
                  const std::size_t wi = (i * frames + t) * scales * points + m * points + k;
                  if (!gw.empty()) gw[wi] += share * kernels::bilinear_dot(map.raw(), channels, taps, gout);
                  if (!gm[mi].empty()) kernels::bilinear_map_grad(gm[mi].data(), channels, taps, share * w[wi], gout);
                  if (want_pos) {
                    double gx = 0.0, gy = 0.0;
                    kernels::bilinear_coord_grad(map.raw(), channels, taps, share * w[wi], gout, &gx, &gy);
                    gp += (gx / sd) * pr.du + (gy / sd) * pr.dv;
                  }
                }
              });
              for (int d = 0; d < 3; ++d) {
                if (!gc.empty()) gc[i * 3 + d] += gp[d];
                if (!go.empty()) go[(i * rows + row) * 3 + d] += gp[d];
              }
            }
          }
        }
      });
}

void add_mixer_params(ParameterStore& store, const std::string& prefix, std::size_t channels,
                      std::size_t rows, Rng& rng) {
  // Generators start near identity mixing; the query modulates them.
  add_linear(store, prefix + ".channel_gen", channels, channels * channels, rng, 0.1);
  Tensor& cb = store.value(prefix + ".channel_gen.bias");
  for (std::size_t i = 0; i < channels; ++i) cb[i * channels + i] = 1.0;
  add_linear(store, prefix + ".spatial_gen", channels, rows * rows, rng, 0.1);
  Tensor& sb = store.value(prefix + ".spatial_gen.bias");
  for (std::size_t i = 0; i < rows; ++i) sb[i * rows + i] = 1.0;
  add_layer_norm(store, prefix + ".channel_norm", rows * channels);
  add_layer_norm(store, prefix + ".spatial_norm", rows * channels);
  add_linear(store, prefix + ".out", rows * channels, channels, rng);
  add_layer_norm(store, prefix + ".out_norm", channels);
}

Var adaptive_mix(const BoundParams& p, const std::string& prefix, Var queries, Var roi) {
  if (queries.shape().size() != 2 || roi.shape().size() != 3 || roi.dim(0) != queries.dim(0) ||
      roi.dim(2) != queries.dim(1)) {
    throw std::invalid_argument("adaptive_mix: queries " + shape_string(queries.shape()) +
                                " incompatible with RoI features " + shape_string(roi.shape()));
  }
  const std::size_t n = queries.dim(0), rows = roi.dim(1), channels = queries.dim(1);
  if (p(prefix + ".spatial_gen.bias").dim(0) != rows * rows) {
    throw std::invalid_argument("adaptive_mix: parameters expect a different row count");
  }
  Var wc = reshape(apply_linear(p, prefix + ".channel_gen", queries), {n, channels, channels});
  // Normalizes the whole [S, C] block of each query.
  auto block_norm = [&](const std::string& name, Var x) {
    const Shape shape = x.shape();
    return reshape(apply_layer_norm(p, prefix + name, reshape(x, {n, rows * channels})), shape);
  };
  Var mc = relu(block_norm(".channel_norm", matmul(roi, wc)));
  Var ws = reshape(apply_linear(p, prefix + ".spatial_gen", queries), {n, rows, rows});
  Var ms = relu(block_norm(".spatial_norm", matmul(transpose_last2(mc), ws)));
  Var agg = apply_linear(p, prefix + ".out", reshape(ms, {n, channels * rows}));
  return apply_layer_norm(p, prefix + ".out_norm", add(queries, agg));
}

}  // namespace lcf
