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
#include <functional>
#include <span>
#include <vector>

#include "lcf/tensor.hpp"

namespace lcf {

class Tape;

enum class OpKind {
  kLeaf,
  kConstant,
  // Arithmetic vocabulary.
  kMatmul,
  kAdd,
  kMul,
  kRelu,
  kLayerNorm,
  kSoftmax,
  kExp,
  kBilinearSample,
  kMean,
  kConcat,
  // Pointwise helpers used by heads and losses.
  kLog,
  kSoftplus,
  kSigmoid,
  kAbs,
  kSin,
  kCos,
  kAtan2,
  kSqrt,
  // Data movement (no arithmetic).
  kReshape,
  kTranspose,
  kSlice,
  kGather,
  kSum,
  // Fused sampling kernels.
  kSampleLidar,
  kSampleCamera,
};

const char* op_name(OpKind kind);

/// Handle to a node on a tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
};

/// Append-only record of a forward pass. Nodes are stored in creation
/// order, which is a topological order of the graph.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t node)>;

  explicit Tape(Precision precision = Precision::kSingle) : precision_(precision) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Precision precision() const noexcept { return precision_; }
  std::size_t size() const noexcept { return nodes_.size(); }

  /// Trainable input; gradients are accumulated for it.
  Var leaf(Tensor value);
  /// Input that never receives gradients.
  Var constant(Tensor value);

  /// Records an op output. The value is rounded to the tape precision and
  /// must be finite.
  Var record(OpKind kind, Tensor value, std::vector<std::size_t> parents, BackwardFn backward);

  const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
  OpKind kind(std::size_t id) const { return nodes_.at(id).kind; }
  const std::vector<std::size_t>& parents(std::size_t id) const { return nodes_.at(id).parents; }
  bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }

  /// Gradient of the last backward pass; zeros if the node received none.
  Tensor grad(Var v) const;
  bool has_grad(std::size_t id) const { return !nodes_.at(id).grad.empty(); }
  /// Mutable gradient buffer, allocated on first use. Used by backward fns.
  std::span<double> grad_buffer(std::size_t id);
  std::span<const double> out_grad(std::size_t id) const { return nodes_.at(id).grad.data(); }

  /// Seeds root with ones and propagates to all leaves.
  void backward(Var root);
  void backward(Var root, const Tensor& seed);
  void zero_grad();

 private:
  struct Node {
    OpKind kind = OpKind::kLeaf;
    Tensor value;
    Tensor grad;
    std::vector<std::size_t> parents;
    BackwardFn backward;
    bool requires_grad = false;
  };

  Precision precision_;
  std::vector<Node> nodes_;
};

}  // namespace lcf
