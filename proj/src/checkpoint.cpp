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

#include "lcf/checkpoint.hpp"

#include <fstream>
#include <stdexcept>

#include "binary_io.hpp"

namespace lcf {

namespace {

constexpr char kMagic[8] = {'L', 'C', 'F', 'C', 'K', 'P', 'T', '\0'};

void put_tensor_values(std::ostream& out, const Tensor& t) {
  for (double v : t.data()) binary::put_f64(out, v);
}

void get_tensor_values(std::istream& in, Tensor& t) {
  for (double& v : t.data()) v = binary::get_f64(in);
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterStore& store, std::uint64_t model_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write(kMagic, sizeof kMagic);
  binary::put_uint<std::uint32_t>(out, kCheckpointVersion);
  binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(store.names().size()));
  binary::put_uint<std::uint64_t>(out, store.steps());
  binary::put_uint<std::uint64_t>(out, model_hash);
  for (const std::string& name : store.names()) {
    const Tensor& value = store.value(name);
    binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    binary::put_uint<std::uint32_t>(out, static_cast<std::uint32_t>(value.rank()));
    for (std::size_t d : value.shape()) binary::put_uint<std::uint64_t>(out, d);
    put_tensor_values(out, value);
    put_tensor_values(out, store.momentum(name));
    put_tensor_values(out, store.second_moment(name));
  }
  if (!out) throw std::runtime_error("write failed: " + path);
}

ParameterStore load_checkpoint(const std::string& path, CheckpointInfo* info) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  binary::expect_magic(in, kMagic, sizeof kMagic, path);
  CheckpointInfo header;
  header.version = binary::get_uint<std::uint32_t>(in);
  if (header.version != kCheckpointVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " + std::to_string(header.version));
  }
  const std::uint32_t count = binary::get_uint<std::uint32_t>(in);
  header.steps = binary::get_uint<std::uint64_t>(in);
  header.model_hash = binary::get_uint<std::uint64_t>(in);

  ParameterStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(binary::get_uint<std::uint32_t>(in), '\0');
    in.read(name.data(), static_cast<std::streamsize>(name.size()));
    Shape shape(binary::get_uint<std::uint32_t>(in));
    for (std::size_t& d : shape) d = binary::get_uint<std::uint64_t>(in);
    Tensor value(shape);
    get_tensor_values(in, value);
    store.add(name, std::move(value));
    get_tensor_values(in, store.momentum(name));
    get_tensor_values(in, store.second_moment(name));
  }
  store.set_steps(header.steps);
  if (info) *info = header;
  return store;
}

void check_same_layout(const ParameterStore& a, const ParameterStore& b) {
  if (a.names() != b.names()) throw std::runtime_error("checkpoint parameters do not match the model config");
  for (const std::string& name : a.names()) {
    if (a.value(name).shape() != b.value(name).shape()) {
      throw std::runtime_error("checkpoint tensor '" + name + "' has shape " +
                               shape_string(b.value(name).shape()) + ", model expects " +
                               shape_string(a.value(name).shape()));
    }
  }
}

}  // namespace lcf
