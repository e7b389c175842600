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

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "lcf/tape.hpp"

// Differentiable primitives recorded on a Tape. Binary arithmetic ops
// broadcast numpy-style (right-aligned, size-1 dims stretch).
namespace lcf {

/// [m,k]x[k,n], [B,m,k]x[B,k,n] or [B,m,k]x[k,n].
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var x, double factor);
Var add_scalar(Var x, double offset);

Var relu(Var x);
Var exp(Var x);
Var log(Var x);
/// log(1 + e^x)
Var softplus(Var x);
Var sigmoid(Var x);
Var abs(Var x);
Var sin(Var x);
Var cos(Var x);
Var sqrt(Var x);
Var atan2(Var y, Var x);

/// Normalizes over the last axis, then applies gain and shift (both [C]).
/// Throws on a zero-length last axis.
Var layer_norm(Var x, Var gain, Var shift, double epsilon = 1e-5);
/// Softmax over the last axis. Throws on a zero-length last axis.
Var softmax(Var x);

Var mean(Var x, std::size_t axis);
/// Sum of all elements, shape [1].
Var sum(Var x);
Var concat(const std::vector<Var>& parts, std::size_t axis);

Var reshape(Var x, Shape shape);
Var transpose_last2(Var x);
Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end);
Var gather_rows(Var x, std::vector<std::size_t> rows);

/// Samples map [H,W,C] at continuous texel coordinates coords [P,2] (x, y)
/// with texel centers at (i+0.5, j+0.5) and zero padding. Output [P,C].
Var bilinear_sample(Var map, Var coords);

/// x W + b with W stored [in, out].
Var linear(Var x, Var weight, Var bias);

}  // namespace lcf
