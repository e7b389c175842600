#pragma once

// Independent references for geometry checks. They share nothing with the
// library implementation beyond the Box3D type.

#include <algorithm>
#include <cmath>
#include <vector>

#include "lcf/geometry.hpp"
#include "lcf/random.hpp"

namespace lcf::testing {

inline bool inside_footprint(const Box3D& b, double x, double y) {
  const double dx = x - b.center.x();
  const double dy = y - b.center.y();
  const double c = std::cos(b.yaw), s = std::sin(b.yaw);
  const double lx = c * dx + s * dy;
  const double ly = -s * dx + c * dy;
  return std::fabs(lx) <= 0.5 * b.size.x() && std::fabs(ly) <= 0.5 * b.size.y();
}

inline double monte_carlo_iou(const Box3D& a, const Box3D& b, int samples, Rng& rng) {
  const double ra = 0.5 * a.size.head<2>().norm();
  const double rb = 0.5 * b.size.head<2>().norm();
  const double x0 = std::min(a.center.x() - ra, b.center.x() - rb);
  const double x1 = std::max(a.center.x() + ra, b.center.x() + rb);
  const double y0 = std::min(a.center.y() - ra, b.center.y() - rb);
  const double y1 = std::max(a.center.y() + ra, b.center.y() + rb);
  int in_a = 0, in_b = 0, in_both = 0;
  for (int i = 0; i < samples; ++i) {
    const double x = rng.uniform(x0, x1);
    const double y = rng.uniform(y0, y1);
    const bool ia = inside_footprint(a, x, y);
    const bool ib = inside_footprint(b, x, y);
    in_a += ia;
    in_b += ib;
    in_both += ia && ib;
  }
  const int uni = in_a + in_b - in_both;
  return uni == 0 ? 0.0 : static_cast<double>(in_both) / uni;
}

// O(n^2) greedy: repeatedly take the best remaining box (score, then lowest
// index) and discard everything overlapping it.
inline std::vector<std::size_t> brute_force_nms(const std::vector<Box3D>& boxes, double thr) {
  std::vector<bool> alive(boxes.size(), true);
  std::vector<std::size_t> kept;
  while (true) {
    std::size_t best = boxes.size();
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (!alive[i]) continue;
      if (best == boxes.size() || boxes[i].score > boxes[best].score) best = i;
    }
    if (best == boxes.size()) break;
    kept.push_back(best);
    alive[best] = false;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
      if (alive[i] && bev_rotated_iou(boxes[best], boxes[i]) > thr) alive[i] = false;
    }
  }
  return kept;
}

inline Box3D random_box(Rng& rng, double spread) {
  Box3D b;
  b.center = Vec3(rng.uniform(-spread, spread), rng.uniform(-spread, spread), rng.uniform(-1, 1));
  b.size = Vec3(rng.uniform(0.5, 5.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.0));
  b.yaw = rng.uniform(-3.14159, 3.14159);
  b.score = rng.uniform();
  return b;
}

}  // namespace lcf::testing
