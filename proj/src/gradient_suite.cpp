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

#include "lcf/gradient_suite.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "lcf/grad_check.hpp"
#include "lcf/model.hpp"
#include "lcf/query_init.hpp"
#include "lcf/roi_sampling.hpp"
#include "lcf/scene.hpp"
#include "lcf/uncertainty_fusion.hpp"

namespace lcf {

namespace {

using Body = std::function<Var(Tape&, const BoundParams&, const std::vector<Var>&)>;
using Coords = std::vector<std::pair<std::size_t, std::size_t>>;

Tensor uniform(Rng& rng, Shape shape, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(shape));
  for (double& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

// Each consecutive group of \p group values is positive and sums to one.
Tensor simplex(Rng& rng, Shape shape, std::size_t group) {
  Tensor t(std::move(shape));
  for (std::size_t g = 0; g < t.size() / group; ++g) {
    double total = 0.0;
    for (std::size_t j = 0; j < group; ++j) total += (t[g * group + j] = rng.uniform(0.05, 1.0));
    for (std::size_t j = 0; j < group; ++j) t[g * group + j] /= total;
  }
  return t;
}

void perturb(ParameterStore& store, Rng& rng, double amplitude) {
  for (const std::string& name : store.names()) {
    for (double& x : store.value(name).data()) x += rng.uniform(-amplitude, amplitude);
  }
}

// Inputs are \p extra followed by every parameter of \p store; the body sees
// the parameters through a BoundParams with those inputs bound.
GradCheckReport check(const ParameterStore& store, const std::vector<Tensor>& extra, const Body& body,
                      Rng& rng, double tolerance, const Coords& coords = {}) {
  const std::vector<std::string>& names = store.names();
  std::vector<Tensor> inputs = extra;
  for (const std::string& n : names) inputs.push_back(store.value(n));
  auto forward = [&](Tape& t, const std::vector<Var>& in) {
    BoundParams p(t, store, false);
    for (std::size_t i = 0; i < names.size(); ++i) p.bind(names[i], in[extra.size() + i]);
    return body(t, p, std::vector<Var>(in.begin(), in.begin() + static_cast<std::ptrdiff_t>(extra.size())));
  };
  Tape dry(Precision::kDouble);
  std::vector<Var> leaves;
  for (const Tensor& x : inputs) leaves.push_back(dry.constant(x));
  const Tensor contraction = uniform(rng, forward(dry, leaves).shape());
  auto fn = [&](Tape& t, const std::vector<Var>& in) { return mul(forward(t, in), t.constant(contraction)); };
  return grad_check(fn, inputs, tolerance, 1e-6, coords);
}

SimConfig tiny_sim(std::size_t channels) {
  SimConfig s;
  s.channels = channels;
  s.image_width = 64;
  s.image_height = 32;
  s.camera_strides = {8, 16};
  s.bev_cells = 16;
  s.bev_scales = 2;
  s.lidar_density = 300;
  s.clutter_points = 100;
  s.min_objects = 2;
  s.max_objects = 2;
  s.max_distance = 25;
  return s;
}

ModelConfig tiny_model(std::size_t channels) {
  ModelConfig m;
  m.layers = 1;
  m.sampling.channels = channels;
  m.sampling.points = 2;
  m.sampling.lidar_scales = 2;
  m.sampling.camera_scales = 2;
  m.sampling.frames = 2;
  return m;
}

GradCheckReport check_bilinear(Rng& rng, double tol) {
  ParameterStore none;
  const Tensor map = uniform(rng, {5, 6, 3});
  const Tensor coords = uniform(rng, {4, 2}, -0.5, 6.5);
  return check(none, {map, coords}, [](Tape&, const BoundParams&, const std::vector<Var>& in) {
    return bilinear_sample(in[0], in[1]);
  }, rng, tol);
}

GradCheckReport check_layer_norm(Rng& rng, double tol) {
  ParameterStore none;
  return check(none, {uniform(rng, {3, 5}), uniform(rng, {5}, 0.5, 1.5), uniform(rng, {5})},
               [](Tape&, const BoundParams&, const std::vector<Var>& in) {
                 return layer_norm(in[0], in[1], in[2]);
               }, rng, tol);
}

GradCheckReport check_softmax(Rng& rng, double tol) {
  ParameterStore none;
  return check(none, {uniform(rng, {3, 5}, -2.0, 2.0)},
               [](Tape&, const BoundParams&, const std::vector<Var>& in) { return softmax(in[0]); }, rng, tol);
}

GradCheckReport check_adaptive_mix(Rng& rng, double tol) {
  const std::size_t c = 4, s = 3;
  ParameterStore store;
  add_mixer_params(store, "mix", c, s, rng);
  perturb(store, rng, 0.3);
  return check(store, {uniform(rng, {2, c}), uniform(rng, {2, s, c})},
               [](Tape&, const BoundParams& p, const std::vector<Var>& in) {
                 return adaptive_mix(p, "mix", in[0], in[1]);
               }, rng, tol);
}

GradCheckReport check_sample_lidar(Rng& rng, double tol) {
  const std::size_t n = 2, scales = 2, points = 2, c = 3, cells = 8;
  DetectionRange range;
  range.x_min = range.y_min = -10.0;
  range.x_max = range.y_max = 10.0;
  Tensor centers({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    centers.at(i, 0) = rng.uniform(-7.0, 7.0);
    centers.at(i, 1) = rng.uniform(-7.0, 7.0);
    centers.at(i, 2) = rng.uniform(-1.0, 1.0);
  }
  std::vector<Tensor> inputs = {centers, uniform(rng, {n, scales * points, 2}, -2.0, 2.0),
                                simplex(rng, {n, scales * points}, scales * points)};
  for (std::size_t r = 0; r < scales; ++r) inputs.push_back(uniform(rng, {cells >> r, cells >> r, c}));
  ParameterStore none;
  return check(none, inputs, [&](Tape&, const BoundParams&, const std::vector<Var>& in) {
    return sample_lidar(in[0], {in[1], in[2]}, {in[3], in[4]}, range, points);
  }, rng, tol);
}

GradCheckReport check_sample_camera(Rng& rng, double tol) {
  const SimConfig sim = tiny_sim(2);
  const CameraRig rig = make_surround_rig(sim);
  const std::size_t n = 2, points = 2, frames = rig.num_frames(), scales = sim.camera_strides.size();
  Tensor centers({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.uniform(-std::numbers::pi, std::numbers::pi);
    const double d = rng.uniform(6.0, 15.0);
    centers.at(i, 0) = d * std::cos(a);
    centers.at(i, 1) = d * std::sin(a);
    centers.at(i, 2) = rng.uniform(0.0, 1.5);
  }
  std::vector<Tensor> inputs = {centers, uniform(rng, {n, frames * points, 3}, -1.5, 1.5),
                                simplex(rng, {n, frames, scales * points}, scales * points)};
  for (std::size_t v = 0; v < rig.num_views(); ++v) {
    for (std::size_t m = 0; m < scales; ++m) {
      for (std::size_t t = 0; t < frames; ++t) {
        const std::size_t s = sim.camera_strides[m];
        inputs.push_back(uniform(rng, {(sim.image_height + s - 1) / s, (sim.image_width + s - 1) / s, sim.channels}));
      }
    }
  }
  ParameterStore none;
  return check(none, inputs, [&](Tape&, const BoundParams&, const std::vector<Var>& in) {
    std::vector<Var> maps(in.begin() + 3, in.end());
    return sample_camera(in[0], {in[1], in[2]}, maps, rig, sim.camera_strides, points);
  }, rng, tol);
}

GradCheckReport check_predict_uncertainty(Rng& rng, double tol) {
  const std::size_t c = 4;
  ParameterStore store;
  add_uncertainty_params(store, "unc", c, rng);
  perturb(store, rng, 0.5);
  return check(store, {uniform(rng, {3, 2, c})}, [](Tape&, const BoundParams& p, const std::vector<Var>& in) {
    return predict_uncertainty(p, "unc", in[0]);
  }, rng, tol);
}

GradCheckReport check_fuse(Rng& rng, double tol) {
  const std::size_t c = 4, n = 3;
  ParameterStore store;
  add_fusion_params(store, "fuse", c, rng);
  perturb(store, rng, 0.3);
  return check(store, {uniform(rng, {n, c}), uniform(rng, {n, 1}, 0.0, 0.95), uniform(rng, {n, c}),
                       uniform(rng, {n, 1}, 0.0, 0.95)},
               [](Tape&, const BoundParams& p, const std::vector<Var>& in) {
                 return fuse(p, "fuse", in[0], in[1], in[2], in[3]);
               }, rng, tol);
}

GradCheckReport check_refine_box(Rng& rng, double tol) {
  const std::size_t c = 5, n = 2;
  ParameterStore store;
  add_feed_forward(store, "box", c, c, kCodeWidth, rng);
  for (double& w : store.value("box.1.weight").data()) w = rng.uniform(-0.3, 0.3);
  std::vector<Box3D> boxes(n);
  for (Box3D& b : boxes) {
    b.center = Vec3(rng.uniform(-20, 20), rng.uniform(-20, 20), rng.uniform(-1, 1));
    b.size = Vec3(rng.uniform(0.5, 4.5), rng.uniform(0.5, 2.0), rng.uniform(0.8, 2.0));
    b.yaw = rng.uniform(-3.0, 3.0);
    b.velocity = Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2));
  }
  return check(store, {uniform(rng, {n, c}), box_state(boxes)},
               [](Tape&, const BoundParams& p, const std::vector<Var>& in) {
                 return refine_box(p, "box", in[0], in[1]);
               }, rng, tol);
}

// Boxes passed between layers and the uncertainty target are detached, so
// the loss is checked with one layer: the full objective with the
// uncertainty term off on sampled coordinates, then the uncertainty term
// alone through the distance heads.
GradCheckReport check_compute_loss(Rng& rng, double tol) {
  const std::size_t c = 4;
  const SimConfig sim = tiny_sim(c);
  const ModelConfig model = tiny_model(c);
  Rng scene_rng(rng.next_u64());
  const SceneSample scene = generate_scene(sim, 0, scene_rng);
  QueryInitConfig qc;
  qc.num_queries = 4;
  qc.num_proposals = 2;
  qc.pixel_sigma = 1.0;
  const std::vector<Query> queries = generate_queries(scene, qc, rng);
  ParameterStore store = init_model(model, rng);
  perturb(store, rng, 0.05);

  LossWeights main;
  main.uncertainty = 0.0;
  auto objective = [&](const LossWeights& w) {
    return [&, w](Tape&, const BoundParams& p, const std::vector<Var>&) {
      return compute_loss(decode(p, queries, scene.camera, scene.lidar, scene.rig, model), scene.boxes, w).total;
    };
  };
  Coords coords;
  for (int k = 0; k < 40; ++k) {
    const std::size_t i = rng.below(store.names().size());
    coords.emplace_back(i, rng.below(store.value(store.names()[i]).size()));
  }
  GradCheckReport full = check(store, {}, objective(main), rng, tol, coords);

  LossWeights only;
  only.classification = 0.0;
  only.box = 0.0;
  only.regression = 0.0;
  only.uncertainty = 1.0;
  Coords dist;
  for (std::size_t i = 0; i < store.names().size(); ++i) {
    if (store.names()[i].find(".unc.dist") == std::string::npos) continue;
    for (std::size_t j = 0; j < store.value(store.names()[i]).size(); ++j) dist.emplace_back(i, j);
  }
  const GradCheckReport unc = check(store, {}, objective(only), rng, tol, dist);
  full.checked += unc.checked;
  full.passed = full.passed && unc.passed;
  if (unc.max_relative_error > full.max_relative_error) {
    full.max_relative_error = unc.max_relative_error;
    full.worst_input = unc.worst_input;
    full.worst_index = unc.worst_index;
  }
  return full;
}

using Checker = GradCheckReport (*)(Rng&, double);

const std::vector<std::pair<std::string, Checker>>& checkers() {
  static const std::vector<std::pair<std::string, Checker>> table = {
      {"bilinear_sample", check_bilinear},
      {"layer_norm", check_layer_norm},
      {"softmax", check_softmax},
      {"adaptive_mix", check_adaptive_mix},
      {"sample_lidar", check_sample_lidar},
      {"sample_camera", check_sample_camera},
      {"predict_uncertainty", check_predict_uncertainty},
      {"fuse", check_fuse},
      {"refine_box", check_refine_box},
      {"compute_loss", check_compute_loss},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& gradient_suite_ops() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> out;
    for (const auto& [name, fn] : checkers()) out.push_back(name);
    return out;
  }();
  return names;
}

GradSuiteResult run_gradient_check(const std::string& op, std::size_t seeds, std::uint64_t base_seed,
                                   double tolerance) {
  Checker checker = nullptr;
  for (const auto& [name, fn] : checkers()) {
    if (name == op) checker = fn;
  }
  if (!checker) throw std::invalid_argument("unknown gradient-check op '" + op + "'");
  GradSuiteResult result;
  result.op = op;
  const auto start = std::chrono::steady_clock::now();
  for (std::size_t s = 0; s < seeds; ++s) {
    Rng rng(mix_seed(base_seed, s));
    const GradCheckReport r = checker(rng, tolerance);
    ++result.seeds;
    if (!r.passed) ++result.failures;
    if (r.max_relative_error > result.max_relative_error || s == 0) {
      result.max_relative_error = r.max_relative_error;
      result.worst_seed = s;
    }
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

}  // namespace lcf
