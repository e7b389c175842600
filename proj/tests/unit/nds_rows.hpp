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

namespace lcf::testing {

/// Published nuScenes test-set rows with all five error columns, in
/// percent: mATE, mASE, mAOE, mAVE, mAAE, mAP, NDS.
struct NdsRow {
  const char* method;
  std::array<double, 5> errors;
  double map;
  double nds;
};

inline constexpr std::array<NdsRow, 22> kNdsRows{{
    {"TransFusion", {25.9, 24.3, 35.9, 28.8, 12.7}, 68.9, 71.7},
    {"FUTR3D", {28.4, 24.1, 31.0, 30.0, 12.0}, 69.4, 72.1},
    {"AutoAlignV2", {24.5, 23.3, 31.1, 25.8, 13.3}, 68.4, 72.4},
    {"BEVFusion (MIT)", {26.1, 23.9, 32.9, 26.0, 13.4}, 70.2, 72.9},
    {"BEVFusion (PKU)", {25.0, 24.0, 35.9, 25.4, 13.2}, 71.3, 73.3},
    {"DeepInteraction", {25.7, 24.0, 32.5, 24.5, 12.8}, 70.8, 73.4},
    {"MSMDFusion", {25.5, 23.8, 31.0, 24.4, 13.2}, 71.5, 74.0},
    {"CMT", {27.9, 23.5, 30.8, 25.9, 11.2}, 72.0, 74.1},
    {"EA-LSS", {24.7, 23.7, 30.4, 25.0, 13.3}, 72.2, 74.4},
    {"UniTR", {24.1, 22.9, 25.6, 24.0, 13.1}, 70.9, 74.5},
    {"FocalFormer3D-F", {25.1, 24.2, 32.8, 22.6, 12.6}, 72.4, 74.5},
    {"DAL", {25.3, 23.8, 33.4, 17.4, 12.0}, 72.0, 74.8},
    {"FusionFormer", {26.7, 23.6, 28.6, 22.5, 10.5}, 72.6, 75.1},
    {"SparseLIF-T", {24.1, 22.9, 27.8, 15.4, 11.8}, 74.4, 77.0},
    {"PAI3D ensemble", {24.5, 23.3, 30.8, 23.3, 13.1}, 71.4, 74.2},
    {"Lift-Attend-Splat ensemble", {24.3, 23.8, 34.5, 32.8, 13.3}, 75.5, 74.9},
    {"BEVFusion ensemble", {24.2, 22.7, 32.0, 22.2, 13.0}, 75.0, 76.1},
    {"DeepInteraction ensemble", {23.5, 23.3, 32.8, 22.6, 13.0}, 75.6, 76.3},
    {"CMT ensemble", {23.3, 22.0, 27.1, 21.2, 12.7}, 75.3, 77.0},
    {"BEVFusion4D ensemble", {22.9, 22.9, 30.2, 22.5, 13.5}, 76.8, 77.2},
    {"EA-LSS ensemble", {23.4, 22.8, 27.8, 20.4, 12.4}, 76.6, 77.6},
    {"SparseLIF-T ensemble", {24.3, 23.1, 28.4, 15.2, 11.7}, 75.9, 77.7},
}};

/// Rows are rounded to 0.1 percent, so two of them land exactly on the
/// tolerance. The slack absorbs floating-point error only.
inline constexpr double kNdsTolerance = 5e-4 + 1e-12;

}  // namespace lcf::testing
