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

#include <cmath>
#include <limits>
#include <numbers>

#include "lcf/grad_check.hpp"
#include "lcf/uncertainty_fusion.hpp"
#include "sampling_oracles.hpp"

using namespace lcf;
using lcf::testing::random_values;

namespace {

Box3D gt_at(double x, double y) {
  Box3D b;
  b.center = Vec3(x, y, 0.8);
  return b;
}

}  // namespace

TEST_CASE("pool_roi averages rows") {
  Tape tape(Precision::kDouble);
  Var one = tape.constant(Tensor({1, 1, 3}, std::vector<double>{1, -2, 3}));
  CHECK(pool_roi(one).value().data()[1] == -2.0);
  Var opposite = tape.constant(Tensor({1, 2, 2}, std::vector<double>{0.5, -1, -0.5, 1}));
  for (double x : pool_roi(opposite).value().data()) CHECK(x == 0.0);
  Rng rng(1);
  const Tensor r = random_values(rng, {2, 4, 3});
  const Tensor pooled = pool_roi(tape.constant(r)).value();
  for (std::size_t i = 0; i < 2; ++i) {
    for (std::size_t c = 0; c < 3; ++c) {
      double m = 0;
      for (std::size_t s = 0; s < 4; ++s) m += r[(i * 4 + s) * 3 + c];
      CHECK(pooled.at(i, c) == doctest::Approx(m / 4));
    }
  }
}

TEST_CASE("uncertainty_from_distance") {
  CHECK(uncertainty_from_distance(0.0) == 0.0);
  CHECK(uncertainty_from_distance(std::log(2.0)) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(uncertainty_from_distance(10.0) == doctest::Approx(1.0 - std::exp(-10.0)).epsilon(1e-15));
  CHECK(uncertainty_from_distance(10.0) == doctest::Approx(0.9999546).epsilon(1e-7));
  CHECK_THROWS_AS(uncertainty_from_distance(-1e-9), std::invalid_argument);
  CHECK_THROWS_AS(uncertainty_from_distance(std::numeric_limits<double>::quiet_NaN()),
                  std::invalid_argument);
  double prev = -1;
  for (double d = 0; d < 30; d += 0.25) {
    const double u = uncertainty_from_distance(d);
    CHECK(u > prev);
    CHECK(u < 1.0);
    prev = u;
  }
  Tape tape(Precision::kDouble);
  Var d = tape.constant(Tensor({3}, std::vector<double>{0.0, std::log(4.0), std::log(2.0)}));
  const Tensor u = uncertainty_from_distance(d).value();
  CHECK(u[0] == 0.0);
  CHECK(u[1] == doctest::Approx(0.75));
  CHECK(u[2] == doctest::Approx(0.5));
}

TEST_CASE("oracle uncertainty composes distance and mapping") {
  const Box3D gt = gt_at(3, -4);
  CHECK(oracle_uncertainty(Vec2(3, -4), gt) == 0.0);
  CHECK(oracle_uncertainty(Vec2(3 + std::log(2.0), -4), gt) == doctest::Approx(0.5));
  Rng rng(2);
  for (int i = 0; i < 50; ++i) {
    const Vec2 xy(rng.uniform(-10, 10), rng.uniform(-10, 10));
    CHECK(oracle_uncertainty(xy, gt) == uncertainty_from_distance(oracle_distance(xy, gt)));
  }
  const Tensor pos({2, 2}, std::vector<double>{0, 0, 10, 10});
  const std::vector<Box3D> gts = {gt_at(1, 0), gt_at(10, 13)};
  const auto d = nearest_gt_distance(pos, gts);
  CHECK(d[0] == doctest::Approx(1.0));
  CHECK(d[1] == doctest::Approx(3.0));
  CHECK(nearest_gt_distance(pos, {}, 7.0)[1] == 7.0);
}

TEST_CASE("predict_uncertainty and regression") {
  const std::size_t c = 4;
  Rng rng(3);
  ParameterStore store;
  add_uncertainty_params(store, "unc", c, rng);
  Tape tape(Precision::kDouble);
  BoundParams p(tape, store, false);
  const Tensor roi = random_values(rng, {3, 2, c});
  const Tensor u = predict_uncertainty(p, "unc", tape.constant(roi)).value();
  const Tensor d = predict_distance(p, "unc", pool_roi(tape.constant(roi))).value();
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(d[i] >= 0.0);
    CHECK(u[i] == doctest::Approx(uncertainty_from_distance(d[i])));
  }
  // Zero-initialized regressor returns the anchors.
  const Tensor anchors = random_values(rng, {3, 2});
  const Tensor xy = regress_position(p, "unc", pool_roi(tape.constant(roi)), tape.constant(anchors)).value();
  for (std::size_t i = 0; i < xy.size(); ++i) CHECK(xy[i] == anchors[i]);

  for (int seed = 0; seed < 20; ++seed) {
    for (const std::string& name : store.names()) {
      for (double& w : store.value(name).data()) w = rng.uniform(-1, 1);
    }
    const Tensor weight = random_values(rng, {3, 1});
    auto fn = [&](Tape& t, const std::vector<Var>& in) {
      BoundParams bp(t, store, false);
      return mul(predict_uncertainty(bp, "unc", in[0]), t.constant(weight));
    };
    const auto r = grad_check(fn, {random_values(rng, {3, 2, c})}, 1e-4);
    CHECK_MESSAGE(r.passed, "seed ", seed, " err ", r.max_relative_error);
  }
}

TEST_CASE("fuse") {
  const std::size_t c = 6;
  Rng rng(4);
  ParameterStore store;
  add_fusion_params(store, "fuse", c, rng);
  const Tensor fc = random_values(rng, {2, c}), fl = random_values(rng, {2, c});

  auto run = [&](const Tensor& cam, double uc, const Tensor& lid, double ul) {
    Tape tape(Precision::kDouble);
    BoundParams p(tape, store, false);
    return fuse(p, "fuse", tape.constant(cam), tape.constant(Tensor({2, 1}, uc)), tape.constant(lid),
                tape.constant(Tensor({2, 1}, ul)))
        .value();
  };
  auto unweighted = [&](const Tensor& cam, const Tensor& lid) {
    Tape tape(Precision::kDouble);
    BoundParams p(tape, store, false);
    return apply_feed_forward(p, "fuse", concat({tape.constant(cam), tape.constant(lid)}, 1)).value();
  };

  SUBCASE("zero uncertainty is the plain concatenation path") {
    const Tensor a = run(fc, 0.0, fl, 0.0), b = unweighted(fc, fl);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  }
  SUBCASE("half LiDAR uncertainty halves the LiDAR input") {
    Tensor half = fl;
    for (double& x : half.data()) x *= 0.5;
    const Tensor a = run(fc, 0.0, fl, 0.5), b = unweighted(fc, half);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-14));
  }
  SUBCASE("camera sensitivity decays linearly with 1 - u") {
    // Lipschitz bound of the FFN from Frobenius norms.
    double lip = 1.0;
    for (const char* w : {"fuse.0.weight", "fuse.1.weight"}) {
      double f = 0;
      for (double x : store.value(w).data()) f += x * x;
      lip *= std::sqrt(f);
    }
    std::vector<Tensor> perturb;
    for (int j = 0; j < 40; ++j) {
      Tensor d = random_values(rng, {2, c});
      for (std::size_t i = 0; i < 2; ++i) {
        double nrm = 0;
        for (std::size_t k = 0; k < c; ++k) nrm += d.at(i, k) * d.at(i, k);
        for (std::size_t k = 0; k < c; ++k) d.at(i, k) /= std::sqrt(nrm);
      }
      perturb.push_back(d);
    }
    std::vector<double> xs, ys;
    for (double u : {0.9, 0.95, 0.99, 0.995, 0.999}) {
      const Tensor base = run(fc, u, fl, 0.1);
      double sup = 0;
      for (const Tensor& d : perturb) {
        Tensor moved = fc;
        for (std::size_t i = 0; i < moved.size(); ++i) moved[i] += d[i];
        const Tensor out = run(moved, u, fl, 0.1);
        for (std::size_t i = 0; i < 2; ++i) {
          double diff = 0;
          for (std::size_t k = 0; k < c; ++k) diff += std::pow(out.at(i, k) - base.at(i, k), 2);
          sup = std::max(sup, std::sqrt(diff));
          CHECK(std::sqrt(diff) <= lip * (1 - u) + 1e-12);
        }
      }
      xs.push_back(1 - u);
      ys.push_back(sup);
    }
    // Least-squares line and coefficient of determination.
    const double n = static_cast<double>(xs.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sx += xs[i];
      sy += ys[i];
      sxx += xs[i] * xs[i];
      sxy += xs[i] * ys[i];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      ss_res += std::pow(ys[i] - (slope * xs[i] + icpt), 2);
      ss_tot += std::pow(ys[i] - sy / n, 2);
    }
    CHECK(1 - ss_res / ss_tot > 0.99);
    CHECK(slope > 0);
  }
  SUBCASE("gradients") {
    for (int seed = 0; seed < 20; ++seed) {
      const Tensor weight = random_values(rng, {2, c});
      auto fn = [&](Tape& t, const std::vector<Var>& in) {
        BoundParams bp(t, store, false);
        return mul(fuse(bp, "fuse", in[0], in[1], in[2], in[3]), t.constant(weight));
      };
      const auto r = grad_check(fn, {random_values(rng, {2, c}), random_values(rng, {2, 1}, 0, 0.9),
                                     random_values(rng, {2, c}), random_values(rng, {2, 1}, 0, 0.9)},
                                1e-4);
      CHECK_MESSAGE(r.passed, "seed ", seed, " err ", r.max_relative_error);
    }
  }
}
