#include <doctest.h>

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "geometry_oracles.hpp"
#include "lcf/geometry.hpp"

using namespace lcf;

namespace {

CameraView simple_view() {
  CameraView v;
  v.intrinsics << 100, 0, 100, 0, 100, 50, 0, 0, 1;
  v.width = 200;
  v.height = 100;
  return v;
}

// Camera at the origin looking along +X of a Z-up frame.
CameraView looking_along(double yaw_deg, double hfov_deg = 100.0) {
  const double yaw = yaw_deg * std::numbers::pi / 180.0;
  CameraView v;
  v.width = 200;
  v.height = 100;
  const double f = 0.5 * v.width / std::tan(0.5 * hfov_deg * std::numbers::pi / 180.0);
  v.intrinsics << f, 0, 100, 0, f, 50, 0, 0, 1;
  Mat3 r;
  r.row(0) = Vec3(std::sin(yaw), -std::cos(yaw), 0);
  r.row(1) = Vec3(0, 0, -1);
  r.row(2) = Vec3(std::cos(yaw), std::sin(yaw), 0);
  v.extrinsics = Rigid3::Identity();
  v.extrinsics.linear() = r;
  return v;
}

}  // namespace

TEST_CASE("unproject_center examples") {
  CameraView v = simple_view();
  CHECK((unproject_center(100, 50, 10, v) - Vec3(0, 0, 10)).norm() < 1e-12);
  v.extrinsics = Rigid3(Eigen::Translation3d(0, 0, -5));
  CHECK((unproject_center(100, 50, 10, v) - Vec3(0, 0, 15)).norm() < 1e-12);
  v.extrinsics = Rigid3::Identity();
  const Vec3 p = unproject_center(150, 50, 2, v);
  CHECK((p - Vec3(1, 0, 2)).norm() < 1e-12);
  auto back = project_to_view(p, v);
  REQUIRE(back);
  CHECK(back->u == doctest::Approx(150));
  CHECK(back->v == doctest::Approx(50));

  CameraView singular = simple_view();
  singular.intrinsics(1, 1) = 0.0;
  CHECK_THROWS_AS(unproject_center(1, 1, 1, singular), std::invalid_argument);
}

TEST_CASE("project_to_view examples") {
  CameraView v = simple_view();
  auto p = project_to_view(Vec3(0, 0, 10), v);
  REQUIRE(p);
  CHECK(p->u == doctest::Approx(100));
  CHECK(p->v == doctest::Approx(50));
  CHECK(p->depth == doctest::Approx(10));
  CHECK_FALSE(project_to_view(Vec3(0, 0, -1), v));
  // u = 100 + 100 * x / z = W + 5
  CHECK_FALSE(project_to_view(Vec3(1.05, 0, 1), v));
  CHECK_FALSE(project_to_view(Vec3(0, 0, 0.05), v));
}

TEST_CASE("round trip through projection") {
  Rng rng(17);
  CameraView v = looking_along(30.0);
  v.extrinsics.translation() = Vec3(0.3, -1.2, 0.7);
  int checked = 0;
  while (checked < 2000) {
    const Vec3 p(rng.uniform(-60, 60), rng.uniform(-60, 60), rng.uniform(-5, 3));
    auto proj = project_to_view(p, v);
    if (!proj) continue;
    ++checked;
    CHECK((unproject_center(proj->u, proj->v, proj->depth, v) - p).norm() < 1e-6);
  }
}

TEST_CASE("hit_views examples") {
  CameraRig rig;
  rig.views = {looking_along(0.0, 60.0), looking_along(180.0, 60.0)};
  CHECK(hit_views(Vec3(10, 0, 0), rig, 0) == std::vector<std::size_t>{0});
  CHECK(hit_views(Vec3(0, 0, 50), rig, 0).empty());

  CameraRig overlap;
  overlap.views = {looking_along(0.0, 100.0), looking_along(40.0, 100.0)};
  CHECK(hit_views(Vec3(10, 2, 0), overlap, 0) == std::vector<std::size_t>{0, 1});
}

TEST_CASE("project_to_bev examples") {
  DetectionRange r;
  CHECK((project_to_bev(Vec3(0, 0, 0), r, 128, 128) - Vec2(64, 64)).norm() < 1e-12);
  CHECK((project_to_bev(Vec3(-54, -54, 0), r, 128, 128) - Vec2(0, 0)).norm() < 1e-12);
  CHECK((project_to_bev(Vec3(27, 0, 0), r, 128, 128) - Vec2(96, 64)).norm() < 1e-12);
  DetectionRange bad;
  bad.x_max = bad.x_min;
  CHECK_THROWS_AS(project_to_bev(Vec3::Zero(), bad, 128, 128), std::invalid_argument);
}

TEST_CASE("align_temporal examples") {
  CameraRig rig;
  rig.views = {looking_along(0)};
  rig.ego_poses = {Rigid3::Identity(), Rigid3::Identity()};
  const Vec3 p(3, -4, 1);
  CHECK((align_temporal(p, rig, 1) - p).norm() == 0.0);

  rig.ego_poses[1] = Rigid3(Eigen::Translation3d(2, 0, 0));
  CHECK((align_temporal(p, rig, 1) - Vec3(1, -4, 1)).norm() < 1e-12);

  rig.ego_poses[1] = Rigid3(Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitZ()));
  const Vec3 q = align_temporal(p, rig, 1);
  CHECK(q.norm() == doctest::Approx(p.norm()));
  CHECK((q - Vec3(-4, -3, 1)).norm() < 1e-12);
}

TEST_CASE("temporal composition returns to the start") {
  Rng rng(9);
  CameraRig rig;
  rig.views = {looking_along(0)};
  for (int t = 0; t < 3; ++t) {
    Rigid3 pose = Rigid3::Identity();
    pose.linear() = Eigen::AngleAxisd(rng.uniform(-3, 3), Vec3::UnitZ()).toRotationMatrix();
    pose.translation() = Vec3(rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-1, 1));
    rig.ego_poses.push_back(pose);
  }
  for (int i = 0; i < 200; ++i) {
    const Vec3 p(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-5, 3));
    for (std::size_t t = 0; t < rig.num_frames(); ++t) {
      for (std::size_t u = 0; u < rig.num_frames(); ++u) {
        const Vec3 there = transform_between_frames(p, rig, t, u);
        CHECK((transform_between_frames(there, rig, u, t) - p).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("bev_rotated_iou examples") {
  Box3D a;
  a.size = Vec3(2, 1, 1);
  a.yaw = 0.3;
  CHECK(bev_rotated_iou(a, a) == doctest::Approx(1.0));
  Box3D far = a;
  far.center.x() += 100;
  CHECK(bev_rotated_iou(a, far) == 0.0);
  Box3D u1, u2;
  u2.center = Vec3(0.5, 0, 0);
  CHECK(bev_rotated_iou(u1, u2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("bev_rotated_iou properties against Monte Carlo") {
  Rng rng(21);
  Rng mc(22);
  for (int i = 0; i < 100; ++i) {
    Box3D a = testing::random_box(rng, 2.0);
    Box3D b = testing::random_box(rng, 2.0);
    const double iou = bev_rotated_iou(a, b);
    CHECK(iou >= 0.0);
    CHECK(iou <= 1.0);
    CHECK(iou == doctest::Approx(bev_rotated_iou(b, a)).epsilon(1e-12));
    CHECK(std::fabs(iou - testing::monte_carlo_iou(a, b, 100000, mc)) < 0.01);
  }
}

TEST_CASE("nms_3d examples") {
  Box3D a;
  a.score = 0.8;
  Box3D b = a;
  b.score = 0.9;
  std::vector<Box3D> same{a, b};
  CHECK(nms_3d(same, 0.5) == std::vector<std::size_t>{1});
  Box3D c = a;
  c.center.x() = 50;
  std::vector<Box3D> apart{a, c};
  CHECK(nms_3d(apart, 0.5).size() == 2);
}

TEST_CASE("nms_3d matches brute force and ignores input order") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Box3D> boxes;
    for (int i = 0; i < 50; ++i) boxes.push_back(testing::random_box(rng, 6.0));
    const auto kept = nms_3d(boxes, 0.5);
    CHECK(kept == testing::brute_force_nms(boxes, 0.5));

    std::vector<std::size_t> perm(boxes.size());
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = perm.size() - 1 - i;
    std::vector<Box3D> shuffled;
    for (std::size_t i : perm) shuffled.push_back(boxes[i]);
    std::vector<std::size_t> mapped;
    for (std::size_t k : nms_3d(shuffled, 0.5)) mapped.push_back(perm[k]);
    CHECK(mapped == kept);
  }
}

TEST_CASE("normalize_yaw range") {
  CHECK(normalize_yaw(-std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(3 * std::numbers::pi) == doctest::Approx(std::numbers::pi));
  CHECK(normalize_yaw(0.5) == doctest::Approx(0.5));
  CHECK(normalize_yaw(-0.5 - 2 * std::numbers::pi) == doctest::Approx(-0.5));
}

TEST_CASE("camera validation") {
  CameraView v = looking_along(10);
  CHECK_NOTHROW(v.validate());
  v.extrinsics.linear() *= -1.0;
  CHECK_THROWS_AS(v.validate(), std::invalid_argument);
  CameraView w = looking_along(0);
  w.intrinsics(0, 0) = 0;
  CHECK_THROWS_AS(w.validate(), std::invalid_argument);
}
