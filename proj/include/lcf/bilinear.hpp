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

#include <array>
#include <cmath>
#include <cstddef>

// Bilinear tap computation shared by the generic sampling op and the fused
// LiDAR/camera kernels. Texel (i, j) has its center at (i + 0.5, j + 0.5);
// taps outside the map are dropped (zero padding).
namespace lcf::kernels {

struct BilinearTaps {
  std::array<std::ptrdiff_t, 4> texel{};  // flat texel index, -1 when outside
  std::array<double, 4> weight{};
  std::array<double, 4> dweight_dx{};
  std::array<double, 4> dweight_dy{};
};

inline BilinearTaps bilinear_taps(double x, double y, std::size_t width, std::size_t height) {
  BilinearTaps taps;
  const double gx = x - 0.5;
  const double gy = y - 0.5;
  const double x0 = std::floor(gx);
  const double y0 = std::floor(gy);
  const double fx = gx - x0;
  const double fy = gy - y0;
  const double wx[2] = {1.0 - fx, fx};
  const double wy[2] = {1.0 - fy, fy};
  const double dwx[2] = {-1.0, 1.0};
  const double dwy[2] = {-1.0, 1.0};
  for (int j = 0; j < 2; ++j) {
    for (int i = 0; i < 2; ++i) {
      const int k = j * 2 + i;
      const double ix = x0 + i;
      const double iy = y0 + j;
      const bool inside = ix >= 0.0 && iy >= 0.0 && ix < static_cast<double>(width) &&
                          iy < static_cast<double>(height);
      taps.texel[k] = inside ? static_cast<std::ptrdiff_t>(iy) * static_cast<std::ptrdiff_t>(width) +
                                   static_cast<std::ptrdiff_t>(ix)
                             : -1;
      taps.weight[k] = wx[i] * wy[j];
      taps.dweight_dx[k] = dwx[i] * wy[j];
      taps.dweight_dy[k] = wx[i] * dwy[j];
    }
  }
  return taps;
}

/// out[c] += scale * BS(map, x, y)[c]
inline void bilinear_accumulate(const double* map, std::size_t channels, const BilinearTaps& taps,
                                double scale, double* out) {
  for (int k = 0; k < 4; ++k) {
    if (taps.texel[k] < 0) continue;
    const double w = scale * taps.weight[k];
    if (w == 0.0) continue;
    const double* texel = map + static_cast<std::size_t>(taps.texel[k]) * channels;
    for (std::size_t c = 0; c < channels; ++c) out[c] += w * texel[c];
  }
}

/// Returns sum_c BS(map, x, y)[c] * g[c].
inline double bilinear_dot(const double* map, std::size_t channels, const BilinearTaps& taps,
                           const double* g) {
  double acc = 0.0;
  for (int k = 0; k < 4; ++k) {
    if (taps.texel[k] < 0 || taps.weight[k] == 0.0) continue;
    const double* texel = map + static_cast<std::size_t>(taps.texel[k]) * channels;
    double d = 0.0;
    for (std::size_t c = 0; c < channels; ++c) d += texel[c] * g[c];
    acc += taps.weight[k] * d;
  }
  return acc;
}

/// Accumulates d(scale * g . BS)/d(x, y) into (*gx, *gy).
inline void bilinear_coord_grad(const double* map, std::size_t channels, const BilinearTaps& taps,
                                double scale, const double* g, double* gx, double* gy) {
  for (int k = 0; k < 4; ++k) {
    if (taps.texel[k] < 0) continue;
    const double* texel = map + static_cast<std::size_t>(taps.texel[k]) * channels;
    double d = 0.0;
    for (std::size_t c = 0; c < channels; ++c) d += texel[c] * g[c];
    *gx += scale * taps.dweight_dx[k] * d;
    *gy += scale * taps.dweight_dy[k] * d;
  }
}

/// map_grad[texel, c] += scale * weight * g[c]
inline void bilinear_map_grad(double* map_grad, std::size_t channels, const BilinearTaps& taps,
                              double scale, const double* g) {
  for (int k = 0; k < 4; ++k) {
    if (taps.texel[k] < 0) continue;
    const double w = scale * taps.weight[k];
    if (w == 0.0) continue;
    double* texel = map_grad + static_cast<std::size_t>(taps.texel[k]) * channels;
    for (std::size_t c = 0; c < channels; ++c) texel[c] += w * g[c];
  }
}

}  // namespace lcf::kernels
