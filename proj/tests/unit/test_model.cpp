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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "lcf/grad_check.hpp"
#include "lcf/matching.hpp"
#include "lcf/model.hpp"
#include "lcf/uncertainty_fusion.hpp"
#include "assignment_oracle.hpp"
#include "model_fixtures.hpp"
#include "sampling_oracles.hpp"

using namespace lcf;
using namespace lcf::testing;

namespace {

Box3D gt_box(int cls, double x, double y) {
  Box3D b;
  b.class_id = cls;
  b.size = class_size_prior(cls);
  b.center = Vec3(x, y, 0.5 * b.size.z());
  b.yaw = 0.3;
  b.velocity = Vec2(1, -0.5);
  return b;
}

Tensor uniform_scores(std::size_t n, double value) { return Tensor({n, 3}, value); }

}  // namespace

TEST_CASE("solve_assignment matches exhaustive search") {
  Rng rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const Eigen::Index rows = 1 + static_cast<Eigen::Index>(rng.below(8));
    const Eigen::Index cols = rows + static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(9 - rows)));
    Eigen::MatrixXd cost(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) cost(i, j) = rng.uniform(0, 10);
    }
    const std::vector<int> a = solve_assignment(cost);
    std::vector<int> seen;
    for (int c : a) {
      REQUIRE(c >= 0);
      seen.push_back(c);
    }
    std::sort(seen.begin(), seen.end());
    CHECK(std::adjacent_find(seen.begin(), seen.end()) == seen.end());
    CHECK(assignment_cost(cost, a) == doctest::Approx(brute_force_assignment(cost)).epsilon(1e-12));
  }
  SUBCASE("more rows than columns leaves rows unassigned") {
    Eigen::MatrixXd cost(3, 2);
    cost << 1, 9, 9, 1, 0, 0;
    const auto a = solve_assignment(cost, 5.0);
    CHECK(std::count(a.begin(), a.end(), -1) == 1);
  }
  CHECK(solve_assignment(Eigen::MatrixXd(0, 0)).empty());
}

TEST_CASE("hungarian_match examples") {
  LossWeights w;
  const std::vector<Box3D> gts = {gt_box(kCar, 10, 5)};
  SUBCASE("exact prediction is matched") {
    const auto m = hungarian_match(uniform_scores(1, 0.5), box_code(gts), gts, w);
    CHECK(m == std::vector<int>{0});
  }
  SUBCASE("the nearer of two predictions wins") {
    const std::vector<Box3D> preds = {gt_box(kCar, 20, 5), gt_box(kCar, 10.5, 5)};
    const auto m = hungarian_match(uniform_scores(2, 0.5), box_code(preds), gts, w);
    CHECK(m == std::vector<int>{1});
  }
  SUBCASE("random 8 x 5 instance against brute force") {
    Rng rng(2);
    std::vector<Box3D> preds, many;
    for (int i = 0; i < 8; ++i) preds.push_back(gt_box(static_cast<int>(rng.below(3)), rng.uniform(-20, 20), rng.uniform(-20, 20)));
    for (int i = 0; i < 5; ++i) many.push_back(gt_box(static_cast<int>(rng.below(3)), rng.uniform(-20, 20), rng.uniform(-20, 20)));
    Tensor scores({8, 3});
    for (double& s : scores.data()) s = rng.uniform();
    const Tensor codes = box_code(preds);
    const auto m = hungarian_match(scores, codes, many, w);
    Eigen::MatrixXd cost(5, 8);
    const Tensor gc = box_code(many);
    for (int g = 0; g < 5; ++g) {
      for (int i = 0; i < 8; ++i) {
        double l1 = 0;
        for (std::size_t d = 0; d < kCodeWidth; ++d) l1 += w.code[d] * std::fabs(codes[i * kCodeWidth + d] - gc[g * kCodeWidth + d]);
        cost(g, i) = w.match.classification * (1 - scores[i * 3 + many[g].class_id]) + w.match.box * l1;
      }
    }
    CHECK(assignment_cost(cost, m) == doctest::Approx(brute_force_assignment(cost)));
  }
}

TEST_CASE("box deltas") {
  Tape tape(Precision::kDouble);
  const std::vector<Box3D> boxes = {gt_box(kCar, 3, 4), gt_box(kPedestrian, -7, 1)};
  Var state = tape.constant(box_state(boxes));
  SUBCASE("zero delta keeps the box") {
    const Tensor out = apply_box_delta(state, tape.constant(Tensor({2, kCodeWidth}))).value();
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(state.value()[i]).epsilon(1e-15));
    const Box3D b = state_to_box(out.raw());
    CHECK((b.center - boxes[0].center).norm() < 1e-12);
    CHECK((b.size - boxes[0].size).norm() < 1e-12);
  }
  SUBCASE("log-size delta of ln 2 doubles the length") {
    Tensor d({2, kCodeWidth});
    d[3] = std::log(2.0);
    const Tensor out = apply_box_delta(state, tape.constant(d)).value();
    CHECK(state_to_box(out.raw()).size.x() == doctest::Approx(2 * boxes[0].size.x()));
    CHECK(state_to_box(out.raw()).size.y() == doctest::Approx(boxes[0].size.y()));
  }
  SUBCASE("heading delta rotates through the sin/cos pair") {
    Tensor d({2, kCodeWidth});
    d[6] = 1.0 - std::sin(0.3);
    d[7] = -std::cos(0.3);
    const Tensor out = apply_box_delta(state, tape.constant(d)).value();
    CHECK(out[6] == doctest::Approx(std::numbers::pi / 2));
  }
  SUBCASE("refine_box gradients") {
    Rng rng(3);
    ParameterStore store;
    add_feed_forward(store, "box", 5, 5, kCodeWidth, rng);
    for (int seed = 0; seed < 20; ++seed) {
      const Tensor weight = random_values(rng, {2, kStateWidth});
      auto fn = [&](Tape& t, const std::vector<Var>& in) {
        BoundParams p(t, store, false);
        p.bind("box.1.weight", in[2]);
        return mul(refine_box(p, "box", in[0], in[1]), t.constant(weight));
      };
      const auto r = grad_check(fn, {random_values(rng, {2, 5}), box_state(boxes), random_values(rng, {5, kCodeWidth}, -0.3, 0.3)}, 1e-4);
      CHECK_MESSAGE(r.passed, "seed ", seed, " err ", r.max_relative_error);
    }
  }
}

TEST_CASE("decode with zero-initialized box heads keeps the query boxes") {
  TinySetup s = tiny_setup();
  Rng rng(4);
  const SceneSample scene = generate_scene(s.sim, 0, rng);
  Rng qrng(5);
  const auto queries = generate_queries(scene, s.queries, qrng);
  Rng prng(6);
  const ParameterStore store = init_model(s.model, prng);
  Tape tape(Precision::kDouble);
  BoundParams p(tape, store, false);
  const auto layers = decode(p, queries, scene.camera, scene.lidar, scene.rig, s.model);
  REQUIRE(layers.size() == s.model.layers);
  for (const LayerOutput& l : layers) {
    REQUIRE(l.boxes.size() == queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) {
      CHECK((l.boxes[i].center - queries[i].box.center).norm() < 1e-9);
      CHECK((l.boxes[i].size - queries[i].box.size).norm() < 1e-9);
      CHECK(std::fabs(normalize_yaw(l.boxes[i].yaw - queries[i].box.yaw)) < 1e-9);
      CHECK(l.boxes[i].score > 0.0);
      CHECK(l.boxes[i].score < 1.0);
    }
    for (double u : l.u_camera.value().data()) CHECK((u >= 0.0 && u < 1.0));
  }

  SUBCASE("one layer equals a manual decode_layer call") {
    ModelConfig one = s.model;
    one.layers = 1;
    Tape t1(Precision::kDouble), t2(Precision::kDouble);
    BoundParams p1(t1, store, false), p2(t2, store, false);
    const auto a = decode(p1, queries, scene.camera, scene.lidar, scene.rig, one);
    std::vector<Box3D> boxes;
    for (const Query& q : queries) boxes.push_back(q.box);
    const LayerOutput b = decode_layer(p2, 0, query_features(p2, queries, 4), boxes,
                                       camera_map_vars(t2, scene.camera), lidar_map_vars(t2, scene.lidar),
                                       scene.rig, scene.camera.strides(), one, {});
    CHECK(std::equal(a[0].logits.value().data().begin(), a[0].logits.value().data().end(),
                     b.logits.value().data().begin()));
    CHECK(std::equal(a[0].state.value().data().begin(), a[0].state.value().data().end(),
                     b.state.value().data().begin()));
  }
  SUBCASE("decode is deterministic") {
    Tape t1(Precision::kDouble);
    BoundParams p1(t1, store, false);
    const auto again = decode(p1, queries, scene.camera, scene.lidar, scene.rig, s.model);
    for (std::size_t l = 0; l < layers.size(); ++l) {
      CHECK(std::equal(again[l].logits.value().data().begin(), again[l].logits.value().data().end(),
                       layers[l].logits.value().data().begin()));
    }
  }
  SUBCASE("equal fusion and oracle modes run") {
    Tape t1(Precision::kDouble);
    BoundParams p1(t1, store, false);
    DecodeOptions eq;
    eq.fusion = FusionMode::kEqual;
    for (const auto& l : decode(p1, queries, scene.camera, scene.lidar, scene.rig, s.model, eq)) {
      for (double u : l.u_lidar.value().data()) CHECK(u == 0.0);
    }
    DecodeOptions oracle;
    oracle.oracle_uncertainty = true;
    oracle.ground_truth = scene.boxes;
    for (const auto& l : decode(p1, queries, scene.camera, scene.lidar, scene.rig, s.model, oracle)) {
      const auto d = nearest_gt_distance(l.reg_camera.value(), scene.boxes);
      for (std::size_t i = 0; i < d.size(); ++i) CHECK(l.u_camera.value()[i] == doctest::Approx(1 - std::exp(-d[i])));
    }
  }
}

TEST_CASE("noiseless proposals decode onto ground truth") {
  TinySetup s = tiny_setup();
  s.queries.pixel_sigma = 0.0;
  s.queries.num_queries = 12;
  s.queries.num_proposals = 8;
  Rng rng(7);
  const SceneSample scene = generate_scene(s.sim, 0, rng);
  Rng qrng(8);
  const auto queries = generate_queries(scene, s.queries, qrng);
  Rng prng(9);
  const ParameterStore store = init_model(s.model, prng);
  Tape tape(Precision::kDouble);
  BoundParams p(tape, store, false);
  const auto layers = decode(p, queries, scene.camera, scene.lidar, scene.rig, s.model);
  std::size_t covered = 0;
  for (const Box3D& g : scene.boxes) {
    double best = 1e9, yaw_err = 0;
    for (const Box3D& b : layers.back().boxes) {
      const double d = (b.center.head<2>() - g.center.head<2>()).norm();
      if (d < best) {
        best = d;
        yaw_err = std::fabs(normalize_yaw(b.yaw - g.yaw));
      }
    }
    if (hit_views(g.center, scene.rig, 0).empty()) continue;
    ++covered;
    CHECK(best < 1e-9);
    CHECK(yaw_err < 1e-9);
  }
  CHECK(covered > 0);
}

TEST_CASE("compute_loss") {
  TinySetup s = tiny_setup();
  Rng rng(10);
  const SceneSample scene = generate_scene(s.sim, 0, rng);
  Rng qrng(11);
  const auto queries = generate_queries(scene, s.queries, qrng);
  Rng prng(12);
  ParameterStore store = init_model(s.model, prng);
  LossWeights w;

  SUBCASE("perfect predictions have zero box and uncertainty terms") {
    Tape tape(Precision::kDouble);
    std::vector<Box3D> preds = scene.boxes;
    preds.push_back(gt_box(kCar, 40, 40));
    LayerOutput l;
    const std::size_t n = preds.size();
    Tensor logits({n, 3}, -8.0);
    for (std::size_t i = 0; i < scene.boxes.size(); ++i) logits[i * 3 + scene.boxes[i].class_id] = 8.0;
    l.logits = tape.leaf(logits);
    l.state = tape.leaf(box_state(preds));
    Tensor xy({n, 2});
    for (std::size_t i = 0; i < n; ++i) {
      xy[i * 2] = preds[i].center.x();
      xy[i * 2 + 1] = preds[i].center.y();
    }
    l.reg_camera = tape.leaf(xy);
    l.reg_lidar = tape.leaf(xy);
    l.dist_camera = tape.leaf(Tensor({n, 1}));
    l.dist_lidar = tape.leaf(Tensor({n, 1}));
    const Loss loss = compute_loss({l}, scene.boxes, w);
    CHECK(loss.terms.box < 1e-12);
    CHECK(loss.terms.uncertainty < 1e-12);
    CHECK(loss.terms.regression < 1e-12);
    CHECK(loss.terms.classification < 1e-3);
    for (std::size_t g = 0; g < scene.boxes.size(); ++g) CHECK(loss.matches[0][g] == static_cast<int>(g));
  }
  SUBCASE("empty ground truth leaves only classification") {
    Tape tape(Precision::kDouble);
    BoundParams p(tape, store, true);
    const auto layers = decode(p, queries, scene.camera, scene.lidar, scene.rig, s.model);
    const Loss loss = compute_loss(layers, {}, w);
    CHECK(loss.terms.box == 0.0);
    CHECK(loss.terms.uncertainty == 0.0);
    CHECK(loss.terms.classification > 0.0);
    CHECK(loss.terms.total == doctest::Approx(w.classification * loss.terms.classification));
  }
  SUBCASE("permutation invariance") {
    Tape t1(Precision::kDouble), t2(Precision::kDouble);
    BoundParams p1(t1, store, false), p2(t2, store, false);
    std::vector<Query> reversed(queries.rbegin(), queries.rend());
    std::vector<Box3D> gts(scene.boxes.rbegin(), scene.boxes.rend());
    const double a = compute_loss(decode(p1, queries, scene.camera, scene.lidar, scene.rig, s.model), scene.boxes, w).terms.total;
    const double b = compute_loss(decode(p2, reversed, scene.camera, scene.lidar, scene.rig, s.model), gts, w).terms.total;
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
  }
  SUBCASE("uncertainty term gradient through the distance heads") {
    s.model.layers = 1;
    Rng ir(12);
    store = init_model(s.model, ir);
    Rng pr(14);
    perturb_parameters(store, pr, 0.05);
    LossWeights only;
    only.classification = 0.0;
    only.box = 0.0;
    only.regression = 0.0;
    only.uncertainty = 1.0;
    std::vector<std::string> dist;
    for (const std::string& n : store.names()) {
      if (n.find(".unc.dist") != std::string::npos) dist.push_back(n);
    }
    REQUIRE(!dist.empty());
    std::vector<Tensor> inputs;
    for (const std::string& n : dist) inputs.push_back(store.value(n));
    auto fn = [&](Tape& t, const std::vector<Var>& in) {
      BoundParams p(t, store, false);
      for (std::size_t i = 0; i < dist.size(); ++i) p.bind(dist[i], in[i]);
      return compute_loss(decode(p, queries, scene.camera, scene.lidar, scene.rig, s.model), scene.boxes, only).total;
    };
    const auto r = grad_check(fn, inputs, 1e-4);
    CHECK_MESSAGE(r.passed, "err ", r.max_relative_error, " at ", dist[r.worst_input]);
  }
  SUBCASE("end-to-end gradient check") {
    // Boxes and the uncertainty target are detached, which finite differences cannot see.
    s.model.layers = 1;
    Rng ir(12);
    store = init_model(s.model, ir);
    w.uncertainty = 0.0;
    Rng pr(13);
    perturb_parameters(store, pr, 0.05);
    const std::vector<std::string> names = store.names();
    std::vector<Tensor> inputs;
    for (const std::string& n : names) inputs.push_back(store.value(n));
    auto fn = [&](Tape& t, const std::vector<Var>& in) {
      BoundParams p(t, store, false);
      for (std::size_t i = 0; i < names.size(); ++i) p.bind(names[i], in[i]);
      return compute_loss(decode(p, queries, scene.camera, scene.lidar, scene.rig, s.model), scene.boxes, w).total;
    };
    for (int seed = 0; seed < 5; ++seed) {
      std::vector<std::pair<std::size_t, std::size_t>> coords;
      for (int k = 0; k < 60; ++k) {
        const std::size_t i = pr.below(inputs.size());
        coords.emplace_back(i, pr.below(inputs[i].size()));
      }
      const auto r = grad_check(fn, inputs, 1e-4, 1e-6, coords);
      CHECK_MESSAGE(r.passed, "seed ", seed, " err ", r.max_relative_error, " at ", names[r.worst_input]);
    }
  }
}
