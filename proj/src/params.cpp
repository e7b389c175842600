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

#include "lcf/params.hpp"

#include <cmath>
#include <stdexcept>

namespace lcf {

void ParameterStore::add(const std::string& name, Tensor init) {
  if (contains(name)) throw std::invalid_argument("duplicate parameter '" + name + "'");
  Tensor zeros(init.shape());
  Tensor zeros2(init.shape());
  entries_.emplace(name, Entry{std::move(init), std::move(zeros), std::move(zeros2)});
  order_.push_back(name);
}

const ParameterStore::Entry& ParameterStore::entry(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

Tensor& ParameterStore::value(const std::string& name) {
  return const_cast<Entry&>(entry(name)).value;
}
const Tensor& ParameterStore::value(const std::string& name) const { return entry(name).value; }
Tensor& ParameterStore::momentum(const std::string& name) {
  return const_cast<Entry&>(entry(name)).momentum;
}
const Tensor& ParameterStore::momentum(const std::string& name) const {
  return entry(name).momentum;
}

Tensor& ParameterStore::second_moment(const std::string& name) {
  return const_cast<Entry&>(entry(name)).second_moment;
}
const Tensor& ParameterStore::second_moment(const std::string& name) const {
  return entry(name).second_moment;
}

std::size_t ParameterStore::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [name, e] : entries_) n += e.value.size();
  return n;
}

BoundParams::BoundParams(Tape& tape, const ParameterStore& store, bool trainable)
    : tape_(&tape), store_(&store), trainable_(trainable) {}

Var BoundParams::operator()(const std::string& name) const {
  auto it = vars_.find(name);
  if (it != vars_.end()) return it->second;
  const Tensor& value = store_->value(name);
  Var v = trainable_ ? tape_->leaf(value) : tape_->constant(value);
  vars_.emplace(name, v);
  order_.emplace_back(name, v);
  return v;
}

void BoundParams::bind(const std::string& name, Var v) {
  if (v.shape() != store_->value(name).shape()) {
    throw std::invalid_argument("bind: shape mismatch for '" + name + "'");
  }
  if (vars_.count(name)) throw std::logic_error("bind: '" + name + "' is already bound");
  vars_.emplace(name, v);
  order_.emplace_back(name, v);
}

void add_linear(ParameterStore& store, const std::string& prefix, std::size_t in, std::size_t out,
                Rng& rng, double gain, bool zero_init) {
  Tensor w({in, out});
  if (!zero_init) {
    const double bound = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    for (double& x : w.data()) x = rng.uniform(-bound, bound);
  }
  store.add(prefix + ".weight", std::move(w));
  store.add(prefix + ".bias", Tensor({out}));
}

Var apply_linear(const BoundParams& p, const std::string& prefix, Var x) {
  return linear(x, p(prefix + ".weight"), p(prefix + ".bias"));
}

void add_feed_forward(ParameterStore& store, const std::string& prefix, std::size_t in,
                      std::size_t hidden, std::size_t out, Rng& rng, bool zero_last) {
  add_linear(store, prefix + ".0", in, hidden, rng, std::sqrt(2.0));
  add_linear(store, prefix + ".1", hidden, out, rng, 1.0, zero_last);
}

Var apply_feed_forward(const BoundParams& p, const std::string& prefix, Var x) {
  return apply_linear(p, prefix + ".1", relu(apply_linear(p, prefix + ".0", x)));
}

void add_layer_norm(ParameterStore& store, const std::string& prefix, std::size_t n) {
  store.add(prefix + ".gain", Tensor({n}, 1.0));
  store.add(prefix + ".shift", Tensor({n}));
}

Var apply_layer_norm(const BoundParams& p, const std::string& prefix, Var x) {
  return layer_norm(x, p(prefix + ".gain"), p(prefix + ".shift"));
}

namespace {

double gradient_norm(const BoundParams& bound) {
  const Tape& tape = bound.tape();
  double sq = 0.0;
  for (const auto& [name, var] : bound.bound()) {
    if (!tape.has_grad(var.id)) continue;
    for (double g : tape.out_grad(var.id)) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw std::domain_error("optimizer step: non-finite gradient");
  return norm;
}

double clip_scale(double norm, double clip_norm) {
  return (clip_norm > 0.0 && norm > clip_norm) ? clip_norm / norm : 1.0;
}

}  // namespace

double sgd_step(ParameterStore& store, const BoundParams& bound, const SgdConfig& cfg) {
  const Tape& tape = bound.tape();
  const double norm = gradient_norm(bound);
  const double clip = clip_scale(norm, cfg.clip_norm);
  for (const auto& [name, var] : bound.bound()) {
    if (!tape.has_grad(var.id)) continue;
    const auto g = tape.out_grad(var.id);
    auto m = store.momentum(name).data();
    auto w = store.value(name).data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      m[i] = cfg.momentum * m[i] + clip * g[i];
      w[i] -= cfg.learning_rate * m[i];
    }
  }
  store.set_steps(store.steps() + 1);
  return norm;
}

double adam_step(ParameterStore& store, const BoundParams& bound, const AdamConfig& cfg) {
  const Tape& tape = bound.tape();
  const double norm = gradient_norm(bound);
  const double clip = clip_scale(norm, cfg.clip_norm);
  store.set_steps(store.steps() + 1);
  const double n = static_cast<double>(store.steps());
  const double c1 = 1.0 - std::pow(cfg.beta1, n);
  const double c2 = 1.0 - std::pow(cfg.beta2, n);
  for (const auto& [name, var] : bound.bound()) {
    if (!tape.has_grad(var.id)) continue;
    const auto g = tape.out_grad(var.id);
    auto m = store.momentum(name).data();
    auto v = store.second_moment(name).data();
    auto w = store.value(name).data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = clip * g[i];
      m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      w[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + cfg.epsilon);
    }
  }
  return norm;
}

}  // namespace lcf
