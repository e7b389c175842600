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
#include <map>
#include <string>
#include <vector>

#include "lcf/ops.hpp"
#include "lcf/random.hpp"
#include "lcf/tape.hpp"
#include "lcf/tensor.hpp"

namespace lcf {

/// Named trainable tensors plus their momentum buffers, kept in insertion
/// order so serialization is stable.
class ParameterStore {
 public:
  void add(const std::string& name, Tensor init);
  bool contains(const std::string& name) const { return entries_.count(name) != 0; }
  Tensor& value(const std::string& name);
  const Tensor& value(const std::string& name) const;
  Tensor& momentum(const std::string& name);
  const Tensor& momentum(const std::string& name) const;
  /// Running mean of squared gradients (adaptive steps only).
  Tensor& second_moment(const std::string& name);
  const Tensor& second_moment(const std::string& name) const;
  std::uint64_t steps() const noexcept { return steps_; }
  void set_steps(std::uint64_t n) noexcept { steps_ = n; }
  const std::vector<std::string>& names() const { return order_; }
  std::size_t num_scalars() const;

 private:
  struct Entry {
    Tensor value;
    Tensor momentum;
    Tensor second_moment;
  };
  const Entry& entry(const std::string& name) const;

  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
  std::uint64_t steps_ = 0;
};

/// Parameters placed on one tape. Each tensor is copied onto the tape the
/// first time it is requested; trainable bindings become leaves.
class BoundParams {
 public:
  BoundParams(Tape& tape, const ParameterStore& store, bool trainable);

  Var operator()(const std::string& name) const;
  /// Uses \p v for \p name instead of copying the stored tensor.
  void bind(const std::string& name, Var v);
  Tape& tape() const { return *tape_; }
  bool trainable() const { return trainable_; }
  /// Bindings created so far, in creation order.
  const std::vector<std::pair<std::string, Var>>& bound() const { return order_; }

 private:
  Tape* tape_;
  const ParameterStore* store_;
  bool trainable_;
  mutable std::map<std::string, Var> vars_;
  mutable std::vector<std::pair<std::string, Var>> order_;
};

/// Adds prefix.weight [in,out] and prefix.bias [out]. Weights are uniform in
/// +-gain*sqrt(6/(in+out)); zero_init leaves both at zero.
void add_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng, double gain = 1.0, bool zero_init = false);
Var apply_linear(const BoundParams& p, const std::string& prefix, Var x);

/// Two linear layers with a ReLU in between (prefix.0, prefix.1).
void add_feed_forward(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::size_t out, Rng& rng, bool zero_last = false);
Var apply_feed_forward(const BoundParams& p, const std::string& prefix, Var x);

/// prefix.gain = 1, prefix.shift = 0 over the last axis of width n.
void add_layer_norm(ParameterStore& store, const std::string& prefix, std::size_t n);
Var apply_layer_norm(const BoundParams& p, const std::string& prefix, Var x);

struct SgdConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  double clip_norm = 5.0;  // global L2 gradient clip; <= 0 disables
};

/// One momentum step from the gradients of the last backward pass on the
/// bound tape. Returns the global gradient norm before clipping.
double sgd_step(ParameterStore& store, const BoundParams& bound, const SgdConfig& cfg);

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double clip_norm = 5.0;
};

/// Bias-corrected adaptive step. Returns the gradient norm before clipping.
double adam_step(ParameterStore& store, const BoundParams& bound, const AdamConfig& cfg);

}  // namespace lcf
