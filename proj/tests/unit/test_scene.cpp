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
#include <array>
#include <numbers>
#include <stdexcept>

#include "lcf/scenario.hpp"
#include "lcf/scene.hpp"

using namespace lcf;

namespace {

SimConfig small_config() {
  SimConfig cfg;
  cfg.channels = 16;
  cfg.bev_cells = 32;
  cfg.lidar_density = 800;
  cfg.clutter_points = 200;
  return cfg;
}

Box3D make_box(int cls, double x, double y, double yaw = 0.0) {
  Box3D b;
  b.class_id = cls;
  b.size = class_size_prior(cls);
  b.center = Vec3(x, y, 0.5 * b.size.z());
  b.yaw = yaw;
  return b;
}

std::size_t points_of(const PointCloud& cloud, int object) {
  return static_cast<std::size_t>(std::count_if(
      cloud.begin(), cloud.end(), [&](const LidarPoint& p) { return p.object == object; }));
}

bool all_zero(const FeatureMap& m) {
  return std::all_of(m.data.data().begin(), m.data.data().end(),
                     [](double v) { return v == 0.0; });
}

// Scene with the given boxes and features rendered without noise.
SceneSample scene_with(const SimConfig& cfg, std::vector<Box3D> boxes) {
  SceneSample s;
  s.frame_interval = cfg.frame_interval;
  s.rig = make_surround_rig(cfg);
  s.boxes = std::move(boxes);
  Rng rng(1);
  for (std::size_t t = 0; t < cfg.num_frames; ++t) {
    s.points.push_back(lidar_points(boxes_at_frame(s, t), cfg, rng));
  }
  s.lidar = lidar_bev_features(s.points[0], cfg.range, cfg.bev_cells, cfg.bev_scales,
                               cfg.channels);
  s.camera = camera_features(s, cfg, rng);
  return s;
}

}  // namespace

TEST_CASE("empty scene has no boxes and clutter-only points") {
  SimConfig cfg = small_config();
  cfg.min_objects = cfg.max_objects = 0;
  Rng rng(3);
  const SceneSample s = generate_scene(cfg, 0, rng);
  CHECK(s.boxes.empty());
  REQUIRE(s.points.size() == cfg.num_frames);
  CHECK_FALSE(s.points[0].empty());
  for (const LidarPoint& p : s.points[0]) CHECK(p.object == -1);
  CHECK(s.camera.num_views() == cfg.num_views);
  CHECK(s.lidar.num_scales() == cfg.bev_scales);
}

TEST_CASE("generation is a pure function of config and seed") {
  const SimConfig cfg = small_config();
  Rng a(77), b(77);
  const SceneSample x = generate_scene(cfg, 5, a), y = generate_scene(cfg, 5, b);
  REQUIRE(x.boxes.size() == y.boxes.size());
  for (std::size_t i = 0; i < x.boxes.size(); ++i) {
    CHECK(x.boxes[i].center == y.boxes[i].center);
    CHECK(x.boxes[i].yaw == y.boxes[i].yaw);
  }
  CHECK(x.points[1].size() == y.points[1].size());
  CHECK(x.lidar.at(1).data.data().size() == y.lidar.at(1).data.data().size());
  CHECK(std::equal(x.lidar.at(0).data.data().begin(), x.lidar.at(0).data.data().end(),
                   y.lidar.at(0).data.data().begin()));
  CHECK(std::equal(x.camera.at(2, 1, 1).data.data().begin(),
                   x.camera.at(2, 1, 1).data.data().end(),
                   y.camera.at(2, 1, 1).data.data().begin()));
}

TEST_CASE("generated boxes are inside the range and do not overlap") {
  const SimConfig cfg = small_config();
  Rng rng(11);
  for (int k = 0; k < 50; ++k) {
    Rng scene_rng = rng.substream(k);
    const SceneSample s = generate_scene(cfg, k, scene_rng);
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      CHECK(cfg.range.contains(s.boxes[i].center));
      for (std::size_t j = i + 1; j < s.boxes.size(); ++j) {
        CHECK(bev_rotated_iou(s.boxes[i], s.boxes[j]) == 0.0);
      }
    }
  }
}

TEST_CASE("class frequencies follow the configured mixture") {
  SimConfig cfg = small_config();
  cfg.bev_cells = 8;
  cfg.channels = 14;
  cfg.camera_strides = {32};
  cfg.lidar_density = 10;
  cfg.clutter_points = 0;
  std::array<double, kNumClasses> counts{};
  double total = 0;
  Rng master(2024);
  for (int k = 0; k < 1000; ++k) {
    Rng rng = master.substream(k);
    for (const Box3D& b : generate_scene(cfg, k, rng).boxes) {
      counts[b.class_id] += 1;
      total += 1;
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    const double p = cfg.class_mix[c];
    const double sigma = std::sqrt(total * p * (1 - p));
    CHECK(std::fabs(counts[c] - total * p) <= 3 * sigma);
  }
}

TEST_CASE("placement failure is reported") {
  SimConfig cfg = small_config();
  cfg.min_objects = cfg.max_objects = 60;
  cfg.min_distance = 4;
  cfg.max_distance = 6;
  cfg.max_placement_retries = 20;
  Rng rng(1);
  CHECK_THROWS_AS(generate_scene(cfg, 0, rng), std::runtime_error);
}

TEST_CASE("an occluded object receives fewer points than its unoccluded twin") {
  SimConfig cfg = small_config();
  cfg.clutter_points = 0;
  cfg.lidar_density = 20000;
  // The blocker is taller than the sensor so the hidden car's roof is covered too.
  Box3D front = make_box(kCar, 10, 0);
  front.size.z() = 4.0;
  front.center.z() = 2.0;
  const Box3D back = make_box(kCar, 20, 0);
  Rng r1(5), r2(5);
  const std::size_t alone = points_of(lidar_points({back}, cfg, r1), 0);
  const std::size_t hidden = points_of(lidar_points({front, back}, cfg, r2), 1);
  CHECK(alone > 50);
  CHECK(hidden < alone / 2);
}

TEST_CASE("point density falls with squared distance") {
  SimConfig cfg = small_config();
  cfg.clutter_points = 0;
  cfg.lidar_density = 200000;
  double near = 0, far = 0;
  for (int s = 0; s < 5; ++s) {
    Rng a(100 + s), b(200 + s);
    near += static_cast<double>(lidar_points({make_box(kPedestrian, 20, 0)}, cfg, a).size());
    far += static_cast<double>(lidar_points({make_box(kPedestrian, 40, 0)}, cfg, b).size());
  }
  CHECK(far / near == doctest::Approx(0.25).epsilon(0.2));
}

TEST_CASE("points carry a per-class intensity") {
  SimConfig cfg = small_config();
  cfg.clutter_points = 0;
  Rng rng(8);
  const PointCloud cloud =
      lidar_points({make_box(kCar, 8, 0), make_box(kPedestrian, -8, 3)}, cfg, rng);
  for (const LidarPoint& p : cloud) CHECK(p.intensity == (p.object == 0 ? 0.8 : 0.3));
}

TEST_CASE("BEV features") {
  const DetectionRange range;
  SUBCASE("no points gives zero maps") {
    const LidarFeaturePyramid pyr = lidar_bev_features({}, range, 16, 3, 8);
    for (std::size_t r = 0; r < 3; ++r) CHECK(all_zero(pyr.at(r)));
  }
  SUBCASE("one point touches exactly one fine cell") {
    const LidarFeaturePyramid pyr = lidar_bev_features({{3.3, -7.1, 0.4, 0.5, -1}}, range, 16, 2, 8);
    const FeatureMap& m = pyr.at(0);
    int nonzero = 0;
    for (std::size_t y = 0; y < m.height; ++y) {
      for (std::size_t x = 0; x < m.width; ++x) {
        const double* t = m.texel(x, y);
        if (std::any_of(t, t + m.channels, [](double v) { return v != 0.0; })) ++nonzero;
      }
    }
    CHECK(nonzero == 1);
  }
  SUBCASE("coarse cells pool their four children") {
    Rng rng(9);
    PointCloud cloud;
    for (int i = 0; i < 2000; ++i) {
      cloud.push_back({rng.uniform(-54, 54), rng.uniform(-54, 54), rng.uniform(0, 2),
                       rng.uniform(), -1});
    }
    const LidarFeaturePyramid pyr = lidar_bev_features(cloud, range, 16, 3, 6);
    for (std::size_t r = 1; r < 3; ++r) {
      const FeatureMap &fine = pyr.at(r - 1), &coarse = pyr.at(r);
      for (std::size_t y = 0; y < coarse.height; ++y) {
        for (std::size_t x = 0; x < coarse.width; ++x) {
          for (std::size_t c = 0; c < 6; ++c) {
            const double pooled =
                0.25 * (fine.texel(2 * x, 2 * y)[c] + fine.texel(2 * x + 1, 2 * y)[c] +
                        fine.texel(2 * x, 2 * y + 1)[c] + fine.texel(2 * x + 1, 2 * y + 1)[c]);
            CHECK(coarse.texel(x, y)[c] == doctest::Approx(pooled));
          }
        }
      }
    }
  }
}

TEST_CASE("camera blobs") {
  SimConfig cfg = small_config();
  cfg.camera_noise = 0.0;
  namespace cc = camera_channel;

  SUBCASE("object behind the front camera leaves its maps empty") {
    const SceneSample s = scene_with(cfg, {make_box(kCar, -15, 0)});
    for (std::size_t m = 0; m < 2; ++m) CHECK(all_zero(s.camera.at(0, m, 0)));
    CHECK_FALSE(all_zero(s.camera.at(2, 0, 0)));
  }
  SUBCASE("peak sits at the projected center") {
    const Box3D box = make_box(kCar, 15, 2);
    const SceneSample s = scene_with(cfg, {box});
    const auto px = project_to_view(box.center, s.rig.views[0]);
    REQUIRE(px);
    for (std::size_t m = 0; m < 2; ++m) {
      const FeatureMap& map = s.camera.at(0, m, 0);
      std::size_t bx = 0, by = 0;
      double best = -1;
      for (std::size_t y = 0; y < map.height; ++y) {
        for (std::size_t x = 0; x < map.width; ++x) {
          if (map.texel(x, y)[cc::kObjectness] > best) {
            best = map.texel(x, y)[cc::kObjectness];
            bx = x;
            by = y;
          }
        }
      }
      const double stride = static_cast<double>(cfg.camera_strides[m]);
      CHECK(bx == static_cast<std::size_t>(px->u / stride));
      CHECK(by == static_cast<std::size_t>(px->v / stride));
    }
  }
  SUBCASE("two objects decode to their classes") {
    const Box3D car = make_box(kCar, 20, -6), ped = make_box(kPedestrian, 12, 5);
    const SceneSample s = scene_with(cfg, {car, ped});
    const FeatureMap& map = s.camera.at(0, 0, 0);
    for (const Box3D& b : {car, ped}) {
      const auto px = project_to_view(b.center, s.rig.views[0]);
      REQUIRE(px);
      const double* t = map.texel(static_cast<std::size_t>(px->u / 8), static_cast<std::size_t>(px->v / 8));
      const auto decoded = std::max_element(t + cc::kClass, t + cc::kClass + kNumClasses) - t;
      CHECK(decoded == b.class_id);
    }
  }
}

TEST_CASE("boxes move back in time with the ego and their velocity") {
  SimConfig cfg = small_config();
  SceneSample s;
  s.frame_interval = 0.5;
  s.rig = make_surround_rig(cfg);
  Box3D b = make_box(kCar, 10, 0);
  b.velocity = Vec2(2, 0);
  s.boxes = {b};
  const Box3D past = boxes_at_frame(s, 1)[0];
  // Object was 1 m behind; ego was 2.5 m behind as well.
  CHECK(past.center.x() == doctest::Approx(10 - 1 + 2.5));
  CHECK(past.center.y() == doctest::Approx(0));
}

TEST_CASE("fov_limited keeps points inside the forward wedge") {
  SimConfig cfg = small_config();
  SceneSample s = scene_with(cfg, {});
  const double deg = std::numbers::pi / 180;
  s.points[0] = {{10 * std::cos(70 * deg), 10 * std::sin(70 * deg), 0.1, 0.1, -1},
                 {10 * std::cos(50 * deg), 10 * std::sin(50 * deg), 0.1, 0.1, -1}};
  const SceneSample out = apply_scenario(s, ScenarioSpec::fov_limited(120));
  REQUIRE(out.points[0].size() == 1);
  CHECK(out.points[0][0].y == doctest::Approx(10 * std::sin(50 * deg)));
}

TEST_CASE("scenarios never touch ground truth and occlusion/fov are idempotent") {
  const SimConfig cfg = small_config();
  Rng rng(31);
  const SceneSample s = generate_scene(cfg, 4, rng);
  for (const ScenarioSpec& spec :
       {ScenarioSpec::fov_limited(120), ScenarioSpec::fov_limited(180),
        ScenarioSpec::object_failure(0.5, 0.5, 3), ScenarioSpec::front_occlusion(),
        ScenarioSpec::stuck(0.5, StaleSensor::kBoth, 3)}) {
    const SceneSample once = apply_scenario(s, spec);
    REQUIRE(once.boxes.size() == s.boxes.size());
    for (std::size_t i = 0; i < s.boxes.size(); ++i) {
      CHECK(once.boxes[i].center == s.boxes[i].center);
      CHECK(once.boxes[i].size == s.boxes[i].size);
    }
    if (spec.kind == ScenarioKind::kFovLimited || spec.kind == ScenarioKind::kFrontOcclusion) {
      const SceneSample twice = apply_scenario(once, spec);
      CHECK(twice.points[0].size() == once.points[0].size());
      CHECK(std::equal(twice.lidar.at(0).data.data().begin(), twice.lidar.at(0).data.data().end(),
                       once.lidar.at(0).data.data().begin()));
      CHECK(std::equal(twice.camera.at(0, 0, 0).data.data().begin(),
                       twice.camera.at(0, 0, 0).data.data().end(),
                       once.camera.at(0, 0, 0).data.data().begin()));
    }
  }
}

TEST_CASE("front_occlusion zeroes only the front view") {
  const SimConfig cfg = small_config();
  Rng rng(32);
  const SceneSample s = generate_scene(cfg, 1, rng);
  const SceneSample out = apply_scenario(s, ScenarioSpec::front_occlusion());
  for (std::size_t m = 0; m < 2; ++m) {
    for (std::size_t t = 0; t < 2; ++t) {
      CHECK(all_zero(out.camera.at(0, m, t)));
      for (std::size_t v = 1; v < cfg.num_views; ++v) {
        CHECK(std::equal(out.camera.at(v, m, t).data.data().begin(),
                         out.camera.at(v, m, t).data.data().end(),
                         s.camera.at(v, m, t).data.data().begin()));
      }
    }
  }
}

TEST_CASE("object_failure drops about a quarter of objects") {
  SimConfig cfg = small_config();
  cfg.num_frames = 1;
  int dropped = 0;
  const int n = 1000;
  for (int k = 0; k < n; ++k) {
    SceneSample s;
    s.scene_id = static_cast<std::uint64_t>(k);
    s.rig = make_surround_rig(cfg);
    s.boxes = {make_box(kCar, 10, 0)};
    s.points = {{{8, 0, 1, 0.8, 0}, {8, 0.5, 1, 0.8, 0}, {1, 1, 0.1, 0.1, -1}}};
    const SceneSample out = apply_scenario(s, ScenarioSpec::object_failure(0.5, 0.5, 99));
    const std::size_t left = points_of(out.points[0], 0);
    CHECK((left == 0 || left == 2));
    CHECK(points_of(out.points[0], -1) == 1);
    if (left == 0) ++dropped;
  }
  const double sigma = std::sqrt(0.25 * 0.75 / n);
  CHECK(std::fabs(dropped / static_cast<double>(n) - 0.25) <= 3 * sigma);
}

TEST_CASE("stuck replaces camera frames with the previous timestamp") {
  SimConfig cfg = small_config();
  Rng rng(40);
  const SceneSample s = generate_scene(cfg, 2, rng);
  int stale = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const SceneSample out = apply_scenario(s, ScenarioSpec::stuck(0.5, StaleSensor::kCamera, seed));
    const auto& now = out.camera.at(1, 0, 0).data.data();
    const bool copied =
        std::equal(now.begin(), now.end(), s.camera.at(1, 0, 1).data.data().begin());
    const bool kept = std::equal(now.begin(), now.end(), s.camera.at(1, 0, 0).data.data().begin());
    CHECK((copied || kept));
    stale += copied;
    CHECK(out.points[0].size() == s.points[0].size());
  }
  CHECK(stale > 5);
  CHECK(stale < 35);

  cfg.num_frames = 1;
  Rng rng1(41);
  const SceneSample single = generate_scene(cfg, 0, rng1);
  CHECK_THROWS_AS(apply_scenario(single, ScenarioSpec::stuck(0.5, StaleSensor::kCamera, 1)),
                  std::invalid_argument);
}

TEST_CASE("scenario names round trip") {
  for (const char* name : {"none", "fov120", "fov180", "object_failure", "front_occlusion",
                           "stuck", "stuck_lidar"}) {
    CHECK(scenario_name(parse_scenario(name, 0)) == name);
  }
  CHECK_THROWS_AS(parse_scenario("fog", 0), std::invalid_argument);
  CHECK_THROWS_AS(parse_scenario("fov400", 0), std::invalid_argument);
  CHECK_THROWS_AS(ScenarioSpec::object_failure(1.5, 0.5, 0).validate(), std::invalid_argument);
}
