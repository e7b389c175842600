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

#include "lcf/tape.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace lcf {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kConstant: return "constant";
    case OpKind::kMatmul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kMul: return "mul";
    case OpKind::kRelu: return "relu";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kExp: return "exp";
    case OpKind::kBilinearSample: return "bilinear_sample";
    case OpKind::kMean: return "mean";
    case OpKind::kConcat: return "concat";
    case OpKind::kLog: return "log";
    case OpKind::kSoftplus: return "softplus";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kAbs: return "abs";
    case OpKind::kSin: return "sin";
    case OpKind::kCos: return "cos";
    case OpKind::kAtan2: return "atan2";
    case OpKind::kSqrt: return "sqrt";
    case OpKind::kReshape: return "reshape";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kSlice: return "slice";
    case OpKind::kGather: return "gather";
    case OpKind::kSum: return "sum";
    case OpKind::kSampleLidar: return "sample_lidar";
    case OpKind::kSampleCamera: return "sample_camera";
  }
  return "unknown";
}

const Tensor& Var::value() const { return tape->value(id); }
const Shape& Var::shape() const { return tape->value(id).shape(); }
std::size_t Var::dim(std::size_t axis) const { return shape().at(axis); }

Var Tape::leaf(Tensor value) {
  value.round_to(precision_);
  nodes_.push_back(Node{OpKind::kLeaf, std::move(value), {}, {}, {}, true});
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  value.round_to(precision_);
  nodes_.push_back(Node{OpKind::kConstant, std::move(value), {}, {}, {}, false});
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(OpKind kind, Tensor value, std::vector<std::size_t> parents,
                 BackwardFn backward) {
  value.round_to(precision_);
  if (!value.all_finite()) {
    throw std::domain_error(std::string("non-finite output from op ") + op_name(kind));
  }
  bool needs = false;
  for (std::size_t p : parents) {
    if (p < nodes_.size() && nodes_[p].requires_grad) needs = true;
  }
  nodes_.push_back(
      Node{kind, std::move(value), {}, std::move(parents), std::move(backward), needs});
  return Var{this, nodes_.size() - 1};
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_.at(v.id);
  if (n.grad.empty()) return Tensor(n.value.shape());
  return n.grad;
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_.at(id);
  if (n.grad.empty() && n.value.size() > 0) n.grad = Tensor(n.value.shape());
  return n.grad.data();
}

void Tape::zero_grad() {
  for (Node& n : nodes_) n.grad = Tensor();
}

void Tape::backward(Var root) { backward(root, Tensor(value(root.id).shape(), 1.0)); }

void Tape::backward(Var root, const Tensor& seed) {
  if (root.tape != this) throw std::invalid_argument("backward: variable from another tape");
  if (seed.shape() != value(root.id).shape()) {
    throw std::invalid_argument("backward: seed shape " + shape_string(seed.shape()) +
                                " does not match root " + shape_string(value(root.id).shape()));
  }
  // Parents must precede children; anything else means the record is cyclic.
  for (std::size_t i = 0; i <= root.id; ++i) {
    for (std::size_t p : nodes_[i].parents) {
      if (p >= i) {
        throw std::logic_error("tape is not acyclic: node " + std::to_string(i) +
                               " depends on node " + std::to_string(p));
      }
    }
  }
  zero_grad();
  auto g = grad_buffer(root.id);
  std::copy(seed.data().begin(), seed.data().end(), g.begin());
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
    n.backward(*this, i);
  }
}

}  // namespace lcf
