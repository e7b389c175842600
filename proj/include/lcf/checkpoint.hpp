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

#include <cstdint>
#include <string>

#include "lcf/params.hpp"

namespace lcf {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointInfo {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t model_hash = 0;
  std::uint64_t steps = 0;
};

/// Binary: "LCFCKPT" NUL, u32 version, u32 count, u64 steps, u64
/// model_hash, then per tensor u32 name length, name, u32 rank, u64
/// dims[rank] and float64 value, momentum and second moment.
void save_checkpoint(const std::string& path, const ParameterStore& store, std::uint64_t model_hash);
ParameterStore load_checkpoint(const std::string& path, CheckpointInfo* info = nullptr);

/// Throws std::runtime_error unless \p b has the same names and shapes as
/// \p a, in the same order.
void check_same_layout(const ParameterStore& a, const ParameterStore& b);

}  // namespace lcf
