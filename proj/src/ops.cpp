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

#include "lcf/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>

#include "lcf/bilinear.hpp"

namespace lcf {
namespace {

void require_same_tape(Var a, Var b, const char* op) {
  if (a.tape != b.tape || a.tape == nullptr) {
    throw std::invalid_argument(std::string(op) + ": operands live on different tapes");
  }
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_string(a) +
                              " and " + shape_string(b));
}

struct Extent {
  std::size_t outer = 1;
  std::size_t n = 1;
  std::size_t inner = 1;
};

Extent split_axis(const Shape& shape, std::size_t axis) {
  Extent e;
  for (std::size_t i = 0; i < axis; ++i) e.outer *= shape[i];
  e.n = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) e.inner *= shape[i];
  return e;
}

// Index maps from every output element to its source element in a and b.
struct Broadcast {
  Shape out_shape;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
  bool identity = false;
};

std::shared_ptr<const Broadcast> make_broadcast(const Shape& a, const Shape& b, const char* op) {
  auto bc = std::make_shared<Broadcast>();
  if (a == b) {
    bc->out_shape = a;
    bc->identity = true;
    return bc;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + static_cast<std::ptrdiff_t>(rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + static_cast<std::ptrdiff_t>(rank - b.size()));
  bc->out_shape.resize(rank);
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1) shape_error(op, a, b);
    bc->out_shape[i] = std::max(pa[i], pb[i]);
  }
  std::vector<std::size_t> sa(rank, 0), sb(rank, 0);
  std::size_t acc_a = 1, acc_b = 1;
  for (std::size_t i = rank; i-- > 0;) {
    sa[i] = pa[i] == 1 ? 0 : acc_a;
    sb[i] = pb[i] == 1 ? 0 : acc_b;
    acc_a *= pa[i];
    acc_b *= pb[i];
  }
  const std::size_t n = shape_size(bc->out_shape);
  bc->ia.resize(n);
  bc->ib.resize(n);
  std::vector<std::size_t> idx(rank, 0);
  std::size_t off_a = 0, off_b = 0;
  for (std::size_t flat = 0; flat < n; ++flat) {
    bc->ia[flat] = off_a;
    bc->ib[flat] = off_b;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < bc->out_shape[d]) {
        off_a += sa[d];
        off_b += sb[d];
        break;
      }
      off_a -= sa[d] * (idx[d] - 1);
      off_b -= sb[d] * (idx[d] - 1);
      idx[d] = 0;
    }
  }
  return bc;
}

// Elementwise unary op with derivative expressed via input and output.
template <typename Fwd, typename Deriv>
Var unary(Var x, OpKind kind, Fwd fwd, Deriv deriv) {
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = fwd(xv[i]);
  const std::size_t xid = x.id;
  return x.tape->record(kind, std::move(out), {xid}, [xid, deriv](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.out_grad(self);
    const Tensor& in = t.value(xid);
    const Tensor& y = t.value(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(in[i], y[i]);
  });
}

// C[m,n] (+)= A[m,k] B[k,n]
void gemm_nn(const double* a, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    const double* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      const double* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,k] += G[m,n] B[k,n]^T
void gemm_nt(const double* g, const double* b, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* brow = b + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += grow[j] * brow[j];
      c[i * k + p] += acc;
    }
  }
}

// C[k,n] += A[m,k]^T G[m,n]
void gemm_tn(const double* a, const double* g, double* c, std::size_t m, std::size_t k,
             std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    const double* grow = g + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = arow[p];
      if (av == 0.0) continue;
      double* crow = c + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * grow[j];
    }
  }
}

}  // namespace

Var matmul(Var a, Var b) {
  require_same_tape(a, b, "matmul");
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  std::size_t batch = 1, m = 0, k = 0, n = 0;
  bool shared_rhs = false;
  if (sa.size() == 2 && sb.size() == 2) {
    m = sa[0];
    k = sa[1];
    n = sb[1];
    if (sb[0] != k) shape_error("matmul", sa, sb);
  } else if (sa.size() == 3 && sb.size() == 3) {
    batch = sa[0];
    m = sa[1];
    k = sa[2];
    n = sb[2];
    if (sb[0] != batch || sb[1] != k) shape_error("matmul", sa, sb);
  } else if (sa.size() == 3 && sb.size() == 2) {
    // Shared right-hand side: fold the batch into rows.
    m = sa[0] * sa[1];
    k = sa[2];
    n = sb[1];
    shared_rhs = true;
    if (sb[0] != k) shape_error("matmul", sa, sb);
  } else {
    shape_error("matmul", sa, sb);
  }
  Shape out_shape = shared_rhs ? Shape{sa[0], sa[1], n}
                               : (sa.size() == 3 ? Shape{batch, m, n} : Shape{m, n});
  Tensor out(out_shape);
  for (std::size_t bi = 0; bi < batch; ++bi) {
    gemm_nn(a.value().raw() + bi * m * k, b.value().raw() + (shared_rhs ? 0 : bi * k * n),
            out.raw() + bi * m * n, m, k, n);
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(
      OpKind::kMatmul, std::move(out), {aid, bid},
      [=](Tape& t, std::size_t self) {
        auto g = t.out_grad(self);
        const bool bshared = shared_rhs;
        for (std::size_t bi = 0; bi < batch; ++bi) {
          const double* gb = g.data() + bi * m * n;
          if (t.requires_grad(aid)) {
            gemm_nt(gb, t.value(bid).raw() + (bshared ? 0 : bi * k * n),
                    t.grad_buffer(aid).data() + bi * m * k, m, k, n);
          }
          if (t.requires_grad(bid)) {
            gemm_tn(t.value(aid).raw() + bi * m * k, gb,
                    t.grad_buffer(bid).data() + (bshared ? 0 : bi * k * n), m, k, n);
          }
        }
      });
}

namespace {

template <typename Fwd, typename DA, typename DB>
Var binary(Var a, Var b, OpKind kind, const char* name, Fwd fwd, DA da, DB db) {
  require_same_tape(a, b, name);
  auto bc = make_broadcast(a.shape(), b.shape(), name);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  Tensor out(bc->out_shape);
  if (bc->identity) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[i], bv[i]);
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(av[bc->ia[i]], bv[bc->ib[i]]);
  }
  const std::size_t aid = a.id, bid = b.id;
  return a.tape->record(kind, std::move(out), {aid, bid}, [=](Tape& t, std::size_t self) {
    auto g = t.out_grad(self);
    const Tensor& x = t.value(aid);
    const Tensor& y = t.value(bid);
    const bool want_a = t.requires_grad(aid);
    const bool want_b = t.requires_grad(bid);
    std::span<double> ga, gb;
    if (want_a) ga = t.grad_buffer(aid);
    if (want_b) gb = t.grad_buffer(bid);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t i_a = bc->identity ? i : bc->ia[i];
      const std::size_t i_b = bc->identity ? i : bc->ib[i];
      if (want_a) ga[i_a] += g[i] * da(x[i_a], y[i_b]);
      if (want_b) gb[i_b] += g[i] * db(x[i_a], y[i_b]);
    }
  });
}

}  // namespace

Var add(Var a, Var b) {
  return binary(
      a, b, OpKind::kAdd, "add", [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

Var sub(Var a, Var b) {
  return binary(
      a, b, OpKind::kAdd, "sub", [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

Var mul(Var a, Var b) {
  return binary(
      a, b, OpKind::kMul, "mul", [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

Var scale(Var x, double factor) {
  return unary(
      x, OpKind::kMul, [factor](double v) { return v * factor; },
      [factor](double, double) { return factor; });
}

Var add_scalar(Var x, double offset) {
  return unary(
      x, OpKind::kAdd, [offset](double v) { return v + offset; },
      [](double, double) { return 1.0; });
}

Var relu(Var x) {
  // Subgradient at exactly zero is zero.
  return unary(
      x, OpKind::kRelu, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var exp(Var x) {
  return unary(
      x, OpKind::kExp, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var log(Var x) {
  return unary(
      x, OpKind::kLog, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

Var softplus(Var x) {
  return unary(
      x, OpKind::kSoftplus,
      [](double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); },
      [](double v, double) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      });
}

Var sigmoid(Var x) {
  return unary(
      x, OpKind::kSigmoid,
      [](double v) {
        return v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var abs(Var x) {
  return unary(
      x, OpKind::kAbs, [](double v) { return std::fabs(v); },
      [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
}

Var sin(Var x) {
  return unary(
      x, OpKind::kSin, [](double v) { return std::sin(v); },
      [](double v, double) { return std::cos(v); });
}

Var cos(Var x) {
  return unary(
      x, OpKind::kCos, [](double v) { return std::cos(v); },
      [](double v, double) { return -std::sin(v); });
}

Var sqrt(Var x) {
  return unary(
      x, OpKind::kSqrt, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

Var atan2(Var y, Var x) {
  return binary(
      y, x, OpKind::kAtan2, "atan2", [](double a, double b) { return std::atan2(a, b); },
      [](double a, double b) { return b / (a * a + b * b); },
      [](double a, double b) { return -a / (a * a + b * b); });
}

Var layer_norm(Var x, Var gain, Var shift, double epsilon) {
  require_same_tape(x, gain, "layer_norm");
  require_same_tape(x, shift, "layer_norm");
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) throw std::invalid_argument("layer_norm: zero-length rows");
  const std::size_t cols = s.back();
  if (gain.value().size() != cols || shift.value().size() != cols) {
    shape_error("layer_norm", s, gain.shape());
  }
  const std::size_t rows = x.value().size() / cols;
  const Tensor& xv = x.value();
  const Tensor& gv = gain.value();
  const Tensor& bv = shift.value();
  Tensor out(s);
  auto xhat = std::make_shared<std::vector<double>>(xv.size());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.raw() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += row[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(cols);
    const double is = 1.0 / std::sqrt(var + epsilon);
    (*inv_std)[r] = is;
    for (std::size_t c = 0; c < cols; ++c) {
      const double h = (row[c] - mu) * is;
      (*xhat)[r * cols + c] = h;
      out[r * cols + c] = gv[c] * h + bv[c];
    }
  }
  const std::size_t xid = x.id, gid = gain.id, sid = shift.id;
  return x.tape->record(
      OpKind::kLayerNorm, std::move(out), {xid, gid, sid}, [=](Tape& t, std::size_t self) {
        auto g = t.out_grad(self);
        const Tensor& gv2 = t.value(gid);
        const bool want_x = t.requires_grad(xid);
        const bool want_g = t.requires_grad(gid);
        const bool want_s = t.requires_grad(sid);
        std::span<double> gx, gg, gs;
        if (want_x) gx = t.grad_buffer(xid);
        if (want_g) gg = t.grad_buffer(gid);
        if (want_s) gs = t.grad_buffer(sid);
        const double inv_n = 1.0 / static_cast<double>(cols);
        for (std::size_t r = 0; r < rows; ++r) {
          const double* gr = g.data() + r * cols;
          const double* hr = xhat->data() + r * cols;
          if (want_g || want_s) {
            for (std::size_t c = 0; c < cols; ++c) {
              if (want_g) gg[c] += gr[c] * hr[c];
              if (want_s) gs[c] += gr[c];
            }
          }
          if (want_x) {
            double mean_d = 0.0, mean_dh = 0.0;
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = gr[c] * gv2[c];
              mean_d += d;
              mean_dh += d * hr[c];
            }
            mean_d *= inv_n;
            mean_dh *= inv_n;
            const double is = (*inv_std)[r];
            for (std::size_t c = 0; c < cols; ++c) {
              const double d = gr[c] * gv2[c];
              gx[r * cols + c] += is * (d - mean_d - hr[c] * mean_dh);
            }
          }
        }
      });
}

Var softmax(Var x) {
  const Shape& s = x.shape();
  if (s.empty() || s.back() == 0) throw std::invalid_argument("softmax: empty input");
  const std::size_t cols = s.back();
  const std::size_t rows = x.value().size() / cols;
  const Tensor& xv = x.value();
  Tensor out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.raw() + r * cols;
    double* o = out.raw() + r * cols;
    const double mx = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      o[c] = std::exp(row[c] - mx);
      z += o[c];
    }
    for (std::size_t c = 0; c < cols; ++c) o[c] /= z;
  }
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kSoftmax, std::move(out), {xid}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.out_grad(self);
    const Tensor& y = t.value(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * y[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        gx[r * cols + c] += y[r * cols + c] * (g[r * cols + c] - dot);
      }
    }
  });
}

Var mean(Var x, std::size_t axis) {
  const Shape& s = x.shape();
  if (axis >= s.size()) throw std::invalid_argument("mean: axis out of range");
  if (s[axis] == 0) throw std::invalid_argument("mean: empty axis");
  const Extent e = split_axis(s, axis);
  Shape out_shape = s;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (out_shape.empty()) out_shape = {1};
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  const double inv = 1.0 / static_cast<double>(e.n);
  for (std::size_t o = 0; o < e.outer; ++o) {
    for (std::size_t i = 0; i < e.n; ++i) {
      const double* src = xv.raw() + (o * e.n + i) * e.inner;
      double* dst = out.raw() + o * e.inner;
      for (std::size_t j = 0; j < e.inner; ++j) dst[j] += src[j];
    }
  }
  for (double& v : out.data()) v *= inv;
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kMean, std::move(out), {xid}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.out_grad(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t i = 0; i < e.n; ++i) {
        for (std::size_t j = 0; j < e.inner; ++j) {
          gx[(o * e.n + i) * e.inner + j] += inv * g[o * e.inner + j];
        }
      }
    }
  });
}

Var sum(Var x) {
  const Tensor& xv = x.value();
  double acc = 0.0;
  for (double v : xv.data()) acc += v;
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kSum, Tensor::scalar(acc), {xid}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    const double g = t.out_grad(self)[0];
    for (double& v : t.grad_buffer(xid)) v += g;
  });
}

Var concat(const std::vector<Var>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  const Shape& first = parts.front().shape();
  if (axis >= first.size()) throw std::invalid_argument("concat: axis out of range");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> widths;
  std::vector<std::size_t> ids;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p, "concat");
    const Shape& s = p.shape();
    if (s.size() != first.size()) shape_error("concat", first, s);
    for (std::size_t d = 0; d < s.size(); ++d) {
      if (d != axis && s[d] != first[d]) shape_error("concat", first, s);
    }
    out_shape[axis] += s[axis];
    widths.push_back(s[axis]);
    ids.push_back(p.id);
  }
  const Extent e = split_axis(out_shape, axis);
  Tensor out(out_shape);
  std::size_t offset = 0;
  for (std::size_t pi = 0; pi < parts.size(); ++pi) {
    const Tensor& pv = parts[pi].value();
    const std::size_t w = widths[pi];
    for (std::size_t o = 0; o < e.outer; ++o) {
      std::copy_n(pv.raw() + o * w * e.inner, w * e.inner,
                  out.raw() + (o * e.n + offset) * e.inner);
    }
    offset += w;
  }
  return parts.front().tape->record(
      OpKind::kConcat, std::move(out), ids, [=](Tape& t, std::size_t self) {
        auto g = t.out_grad(self);
        std::size_t off = 0;
        for (std::size_t pi = 0; pi < ids.size(); ++pi) {
          const std::size_t w = widths[pi];
          if (t.requires_grad(ids[pi])) {
            auto gp = t.grad_buffer(ids[pi]);
            for (std::size_t o = 0; o < e.outer; ++o) {
              for (std::size_t j = 0; j < w * e.inner; ++j) {
                gp[o * w * e.inner + j] += g[(o * e.n + off) * e.inner + j];
              }
            }
          }
          off += w;
        }
      });
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kReshape, std::move(out), {xid}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.out_grad(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Var transpose_last2(Var x) {
  const Shape& s = x.shape();
  if (s.size() < 2) throw std::invalid_argument("transpose_last2: rank < 2");
  const std::size_t rows = s[s.size() - 2];
  const std::size_t cols = s.back();
  const std::size_t batch = x.value().size() / (rows * cols);
  Shape out_shape = s;
  std::swap(out_shape[s.size() - 2], out_shape[s.size() - 1]);
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        out[b * rows * cols + j * rows + i] = xv[b * rows * cols + i * cols + j];
      }
    }
  }
  const std::size_t xid = x.id;
  return x.tape->record(
      OpKind::kTranspose, std::move(out), {xid}, [=](Tape& t, std::size_t self) {
        if (!t.requires_grad(xid)) return;
        auto g = t.out_grad(self);
        auto gx = t.grad_buffer(xid);
        for (std::size_t b = 0; b < batch; ++b) {
          for (std::size_t i = 0; i < rows; ++i) {
            for (std::size_t j = 0; j < cols; ++j) {
              gx[b * rows * cols + i * cols + j] += g[b * rows * cols + j * rows + i];
            }
          }
        }
      });
}

Var slice(Var x, std::size_t axis, std::size_t begin, std::size_t end) {
  const Shape& s = x.shape();
  if (axis >= s.size() || begin > end || end > s[axis]) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + ", " +
                                std::to_string(end) + ") invalid for " + shape_string(s));
  }
  const Extent e = split_axis(s, axis);
  const std::size_t w = end - begin;
  Shape out_shape = s;
  out_shape[axis] = w;
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t o = 0; o < e.outer; ++o) {
    std::copy_n(xv.raw() + (o * e.n + begin) * e.inner, w * e.inner,
                out.raw() + o * w * e.inner);
  }
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kSlice, std::move(out), {xid}, [=](Tape& t, std::size_t self) {
    if (!t.requires_grad(xid)) return;
    auto g = t.out_grad(self);
    auto gx = t.grad_buffer(xid);
    for (std::size_t o = 0; o < e.outer; ++o) {
      for (std::size_t j = 0; j < w * e.inner; ++j) {
        gx[(o * e.n + begin) * e.inner + j] += g[o * w * e.inner + j];
      }
    }
  });
}

Var gather_rows(Var x, std::vector<std::size_t> rows) {
  const Shape& s = x.shape();
  if (s.empty()) throw std::invalid_argument("gather_rows: scalar input");
  const std::size_t row_size = x.value().size() / std::max<std::size_t>(s[0], 1);
  Shape out_shape = s;
  out_shape[0] = rows.size();
  Tensor out(out_shape);
  const Tensor& xv = x.value();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= s[0]) throw std::out_of_range("gather_rows: row index out of range");
    std::copy_n(xv.raw() + rows[i] * row_size, row_size, out.raw() + i * row_size);
  }
  const std::size_t xid = x.id;
  return x.tape->record(OpKind::kGather, std::move(out), {xid},
                        [xid, row_size, rows = std::move(rows)](Tape& t, std::size_t self) {
                          if (!t.requires_grad(xid)) return;
                          auto g = t.out_grad(self);
                          auto gx = t.grad_buffer(xid);
                          for (std::size_t i = 0; i < rows.size(); ++i) {
                            for (std::size_t j = 0; j < row_size; ++j) {
                              gx[rows[i] * row_size + j] += g[i * row_size + j];
                            }
                          }
                        });
}

Var bilinear_sample(Var map, Var coords) {
  require_same_tape(map, coords, "bilinear_sample");
  const Shape& ms = map.shape();
  const Shape& cs = coords.shape();
  if (ms.size() != 3 || cs.size() != 2 || cs[1] != 2) shape_error("bilinear_sample", ms, cs);
  const std::size_t height = ms[0], width = ms[1], channels = ms[2];
  const std::size_t points = cs[0];
  Tensor out({points, channels});
  const Tensor& mv = map.value();
  const Tensor& cv = coords.value();
  for (std::size_t p = 0; p < points; ++p) {
    const auto taps = kernels::bilinear_taps(cv[2 * p], cv[2 * p + 1], width, height);
    kernels::bilinear_accumulate(mv.raw(), channels, taps, 1.0, out.raw() + p * channels);
  }
  const std::size_t mid = map.id, cid = coords.id;
  return map.tape->record(
      OpKind::kBilinearSample, std::move(out), {mid, cid}, [=](Tape& t, std::size_t self) {
        auto g = t.out_grad(self);
        const Tensor& m = t.value(mid);
        const Tensor& c = t.value(cid);
        const bool want_m = t.requires_grad(mid);
        const bool want_c = t.requires_grad(cid);
        std::span<double> gm, gc;
        if (want_m) gm = t.grad_buffer(mid);
        if (want_c) gc = t.grad_buffer(cid);
        for (std::size_t p = 0; p < points; ++p) {
          const auto taps = kernels::bilinear_taps(c[2 * p], c[2 * p + 1], width, height);
          const double* gp = g.data() + p * channels;
          if (want_m) kernels::bilinear_map_grad(gm.data(), channels, taps, 1.0, gp);
          if (want_c) {
            kernels::bilinear_coord_grad(m.raw(), channels, taps, 1.0, gp, &gc[2 * p],
                                         &gc[2 * p + 1]);
          }
        }
      });
}

Var linear(Var x, Var weight, Var bias) { return add(matmul(x, weight), bias); }

}  // namespace lcf
