// Copyright 2026 The t2v Authors. All Rights Reserved.
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

#ifndef T2V_OPS_HPP
#define T2V_OPS_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "t2v/graph.hpp"
#include "t2v/random.hpp"

namespace t2v {

/// Binary row mask; 1 = valid, 0 = padding.
using Mask = std::vector<std::uint8_t>;

inline std::size_t mask_count(const Mask& m) {
  std::size_t n = 0;
  for (auto v : m) n += v ? 1 : 0;
  return n;
}

namespace detail {

template <class Real>
Tensor<Real>* grad_of(Node<Real>& n, std::size_t i) {
  auto& in = *n.inputs[i];
  return in.requires_grad ? &in.grad_buffer() : nullptr;
}

template <class Real>
void require_2d(const Var<Real>& x, const char* op) {
  x.value().require_rank2(op);
}

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ShapeError(msg);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Linear algebra

template <class Real>
Var<Real> matmul(const Var<Real>& a, const Var<Real>& b) {
  detail::require_2d(a, "matmul");
  detail::require_2d(b, "matmul");
  detail::require(a.cols() == b.rows(), "matmul: inner dims " + shape_str(a.shape()) +
                                            " x " + shape_str(b.shape()));
  Tensor<Real> out({a.rows(), b.cols()});
  gemm_acc(a.value(), b.value(), out);
  return make_node<Real>("matmul", {a, b}, std::move(out), [](Node<Real>& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    if (auto* ga = detail::grad_of(n, 0)) gemm_nt_acc(n.grad, B, *ga);
    if (auto* gb = detail::grad_of(n, 1)) gemm_tn_acc(A, n.grad, *gb);
  });
}

/// a * b^T
template <class Real>
Var<Real> matmul_nt(const Var<Real>& a, const Var<Real>& b) {
  detail::require_2d(a, "matmul_nt");
  detail::require_2d(b, "matmul_nt");
  detail::require(a.cols() == b.cols(), "matmul_nt: inner dims " + shape_str(a.shape()) +
                                            " x " + shape_str(b.shape()) + "^T");
  Tensor<Real> out({a.rows(), b.rows()});
  gemm_nt_acc(a.value(), b.value(), out);
  return make_node<Real>("matmul_nt", {a, b}, std::move(out), [](Node<Real>& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    if (auto* ga = detail::grad_of(n, 0)) gemm_acc(n.grad, B, *ga);
    if (auto* gb = detail::grad_of(n, 1)) gemm_tn_acc(n.grad, A, *gb);
  });
}

/// a^T * b
template <class Real>
Var<Real> matmul_tn(const Var<Real>& a, const Var<Real>& b) {
  detail::require_2d(a, "matmul_tn");
  detail::require_2d(b, "matmul_tn");
  detail::require(a.rows() == b.rows(), "matmul_tn: inner dims " + shape_str(a.shape()) +
                                            "^T x " + shape_str(b.shape()));
  Tensor<Real> out({a.cols(), b.cols()});
  gemm_tn_acc(a.value(), b.value(), out);
  return make_node<Real>("matmul_tn", {a, b}, std::move(out), [](Node<Real>& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    if (auto* ga = detail::grad_of(n, 0)) gemm_nt_acc(B, n.grad, *ga);
    if (auto* gb = detail::grad_of(n, 1)) gemm_acc(A, n.grad, *gb);
  });
}

template <class Real>
Var<Real> transpose(const Var<Real>& x) {
  detail::require_2d(x, "transpose");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<Real> out({C, R});
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out(j, i) = x.value()(i, j);
  return make_node<Real>("transpose", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t R = n.grad.rows(), C = n.grad.cols();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) (*g)(j, i) += n.grad(i, j);
  });
}

// ---------------------------------------------------------------------------
// Elementwise

template <class Real>
Var<Real> add(const Var<Real>& a, const Var<Real>& b) {
  a.value().require_same_shape(b.value(), "add");
  Tensor<Real> out = a.value();
  out += b.value();
  return make_node<Real>("add", {a, b}, std::move(out), [](Node<Real>& n) {
    if (auto* ga = detail::grad_of(n, 0)) *ga += n.grad;
    if (auto* gb = detail::grad_of(n, 1)) *gb += n.grad;
  });
}

template <class Real>
Var<Real> sub(const Var<Real>& a, const Var<Real>& b) {
  a.value().require_same_shape(b.value(), "sub");
  Tensor<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  return make_node<Real>("sub", {a, b}, std::move(out), [](Node<Real>& n) {
    if (auto* ga = detail::grad_of(n, 0)) *ga += n.grad;
    if (auto* gb = detail::grad_of(n, 1))
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] -= n.grad[i];
  });
}

/// Hadamard product.
template <class Real>
Var<Real> mul(const Var<Real>& a, const Var<Real>& b) {
  a.value().require_same_shape(b.value(), "mul");
  Tensor<Real> out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return make_node<Real>("mul", {a, b}, std::move(out), [](Node<Real>& n) {
    const auto& A = n.inputs[0]->value;
    const auto& B = n.inputs[1]->value;
    if (auto* ga = detail::grad_of(n, 0))
      for (std::size_t i = 0; i < ga->size(); ++i) (*ga)[i] += n.grad[i] * B[i];
    if (auto* gb = detail::grad_of(n, 1))
      for (std::size_t i = 0; i < gb->size(); ++i) (*gb)[i] += n.grad[i] * A[i];
  });
}

template <class Real>
Var<Real> scale(const Var<Real>& x, Real s) {
  Tensor<Real> out = x.value();
  for (auto& v : out.values()) v *= s;
  return make_node<Real>("scale", {x}, std::move(out), [s](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += s * n.grad[i];
  });
}

/// x[R x C] + b[1 x C] broadcast over rows.
template <class Real>
Var<Real> add_row(const Var<Real>& x, const Var<Real>& b) {
  detail::require_2d(x, "add_row");
  detail::require(b.value().size() == x.cols(),
                  "add_row: bias " + shape_str(b.shape()) + " vs " + shape_str(x.shape()));
  Tensor<Real> out = x.value();
  const std::size_t R = x.rows(), C = x.cols();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out(i, j) += b.value()[j];
  return make_node<Real>("add_row", {x, b}, std::move(out), [](Node<Real>& n) {
    if (auto* gx = detail::grad_of(n, 0)) *gx += n.grad;
    if (auto* gb = detail::grad_of(n, 1)) {
      const std::size_t R = n.grad.rows(), C = n.grad.cols();
      for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < C; ++j) (*gb)[j] += n.grad(i, j);
    }
  });
}

/// Scales row i of x[R x C] by s[i], where s has R entries.
template <class Real>
Var<Real> scale_rows(const Var<Real>& x, const Var<Real>& s) {
  detail::require_2d(x, "scale_rows");
  detail::require(s.value().size() == x.rows(),
                  "scale_rows: scales " + shape_str(s.shape()) + " vs " + shape_str(x.shape()));
  Tensor<Real> out = x.value();
  const std::size_t R = x.rows(), C = x.cols();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out(i, j) *= s.value()[i];
  return make_node<Real>("scale_rows", {x, s}, std::move(out), [](Node<Real>& n) {
    const auto& X = n.inputs[0]->value;
    const auto& S = n.inputs[1]->value;
    const std::size_t R = n.grad.rows(), C = n.grad.cols();
    auto* gx = detail::grad_of(n, 0);
    auto* gs = detail::grad_of(n, 1);
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) {
        if (gx) (*gx)(i, j) += n.grad(i, j) * S[i];
        if (gs) (*gs)[i] += n.grad(i, j) * X(i, j);
      }
  });
}

/// Zeroes the rows whose mask entry is 0.
template <class Real>
Var<Real> mask_rows(const Var<Real>& x, const Mask& mask) {
  detail::require_2d(x, "mask_rows");
  detail::require(mask.size() == x.rows(), "mask_rows: mask length " +
                                               std::to_string(mask.size()) + " vs " +
                                               shape_str(x.shape()));
  Tensor<Real> out = x.value();
  const std::size_t C = x.cols();
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (!mask[i])
      for (std::size_t j = 0; j < C; ++j) out(i, j) = 0;
  return make_node<Real>("mask_rows", {x}, std::move(out), [mask](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t C = n.grad.cols();
    for (std::size_t i = 0; i < mask.size(); ++i)
      if (mask[i])
        for (std::size_t j = 0; j < C; ++j) (*g)(i, j) += n.grad(i, j);
  });
}

template <class Real>
Var<Real> sigmoid(const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.values()) {
    v = v >= 0 ? Real(1) / (Real(1) + std::exp(-v)) : std::exp(v) / (Real(1) + std::exp(v));
  }
  return make_node<Real>("sigmoid", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    for (std::size_t i = 0; i < g->size(); ++i) {
      const Real y = n.value[i];
      (*g)[i] += n.grad[i] * y * (Real(1) - y);
    }
  });
}

template <class Real>
Var<Real> relu(const Var<Real>& x) {
  Tensor<Real> out = x.value();
  for (auto& v : out.values()) v = v > 0 ? v : Real(0);
  return make_node<Real>("relu", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const auto& X = n.inputs[0]->value;
    for (std::size_t i = 0; i < g->size(); ++i)
      if (X[i] > 0) (*g)[i] += n.grad[i];
  });
}

// ---------------------------------------------------------------------------
// Row-wise normalizations

/// Softmax over each row, stabilized by subtracting the row maximum.
template <class Real>
Var<Real> softmax_rows(const Var<Real>& x) {
  detail::require_2d(x, "softmax_rows");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<Real> out({R, C});
  for (std::size_t i = 0; i < R; ++i) {
    auto in = x.value().row_span(i);
    auto o = out.row_span(i);
    Real mx = -std::numeric_limits<Real>::infinity();
    for (Real v : in) mx = std::max(mx, v);
    Real sum = 0;
    for (std::size_t j = 0; j < C; ++j) sum += (o[j] = std::exp(in[j] - mx));
    for (auto& v : o) v /= sum;
  }
  return make_node<Real>("softmax_rows", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t R = n.value.rows(), C = n.value.cols();
    for (std::size_t i = 0; i < R; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < C; ++j) dot += n.grad(i, j) * n.value(i, j);
      for (std::size_t j = 0; j < C; ++j) (*g)(i, j) += n.value(i, j) * (n.grad(i, j) - dot);
    }
  });
}

/// Softmax over the columns selected by `keep`; excluded columns get exactly
/// zero weight. A row with no kept column is all zeros.
template <class Real>
Var<Real> masked_softmax_rows(const Var<Real>& x, const Mask& keep) {
  detail::require_2d(x, "masked_softmax_rows");
  const std::size_t R = x.rows(), C = x.cols();
  detail::require(keep.size() == C, "masked_softmax_rows: mask length " +
                                        std::to_string(keep.size()) + " vs " +
                                        shape_str(x.shape()));
  Tensor<Real> out({R, C});
  for (std::size_t i = 0; i < R; ++i) {
    auto in = x.value().row_span(i);
    auto o = out.row_span(i);
    Real mx = -std::numeric_limits<Real>::infinity();
    for (std::size_t j = 0; j < C; ++j)
      if (keep[j]) mx = std::max(mx, in[j]);
    if (!std::isfinite(mx)) continue;
    Real sum = 0;
    for (std::size_t j = 0; j < C; ++j)
      if (keep[j]) sum += (o[j] = std::exp(in[j] - mx));
    for (auto& v : o) v /= sum;
  }
  return make_node<Real>("masked_softmax_rows", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t R = n.value.rows(), C = n.value.cols();
    for (std::size_t i = 0; i < R; ++i) {
      Real dot = 0;
      for (std::size_t j = 0; j < C; ++j) dot += n.grad(i, j) * n.value(i, j);
      for (std::size_t j = 0; j < C; ++j) (*g)(i, j) += n.value(i, j) * (n.grad(i, j) - dot);
    }
  });
}

/// Divides each row by its Euclidean norm. Rows with norm <= eps become zero
/// and pass no gradient.
template <class Real>
Var<Real> l2_normalize_rows(const Var<Real>& x, Real eps = Real(1e-12)) {
  detail::require_2d(x, "l2_normalize_rows");
  if (!(eps > 0)) throw ConfigError("l2_normalize_rows: eps must be positive");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<Real> out({R, C});
  std::vector<Real> norms(R, 0);
  for (std::size_t i = 0; i < R; ++i) {
    auto in = x.value().row_span(i);
    Real ss = 0;
    for (Real v : in) ss += v * v;
    norms[i] = std::sqrt(ss);
    if (norms[i] <= eps) {
      norms[i] = 0;
      continue;
    }
    for (std::size_t j = 0; j < C; ++j) out(i, j) = in[j] / norms[i];
  }
  return make_node<Real>("l2_normalize_rows", {x}, std::move(out),
                         [norms = std::move(norms)](Node<Real>& n) {
                           auto* g = detail::grad_of(n, 0);
                           const std::size_t R = n.value.rows(), C = n.value.cols();
                           for (std::size_t i = 0; i < R; ++i) {
                             if (norms[i] == 0) continue;
                             Real dot = 0;
                             for (std::size_t j = 0; j < C; ++j)
                               dot += n.grad(i, j) * n.value(i, j);
                             for (std::size_t j = 0; j < C; ++j)
                               (*g)(i, j) += (n.grad(i, j) - n.value(i, j) * dot) / norms[i];
                           }
                         });
}

/// Layer normalization over each row with learnable gain and shift (1 x C).
template <class Real>
Var<Real> layer_norm_rows(const Var<Real>& x, const Var<Real>& gain, const Var<Real>& shift,
                          Real eps = Real(1e-5)) {
  detail::require_2d(x, "layer_norm_rows");
  const std::size_t R = x.rows(), C = x.cols();
  detail::require(gain.value().size() == C && shift.value().size() == C,
                  "layer_norm_rows: affine params do not match " + shape_str(x.shape()));
  Tensor<Real> out({R, C});
  Tensor<Real> xhat({R, C});
  std::vector<Real> inv_std(R);
  for (std::size_t i = 0; i < R; ++i) {
    auto in = x.value().row_span(i);
    Real mean = 0;
    for (Real v : in) mean += v;
    mean /= Real(C);
    Real var = 0;
    for (Real v : in) var += (v - mean) * (v - mean);
    var /= Real(C);
    inv_std[i] = Real(1) / std::sqrt(var + eps);
    for (std::size_t j = 0; j < C; ++j) {
      xhat(i, j) = (in[j] - mean) * inv_std[i];
      out(i, j) = gain.value()[j] * xhat(i, j) + shift.value()[j];
    }
  }
  return make_node<Real>(
      "layer_norm_rows", {x, gain, shift}, std::move(out),
      [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node<Real>& n) {
        const auto& gain_v = n.inputs[1]->value;
        auto* gx = detail::grad_of(n, 0);
        auto* gg = detail::grad_of(n, 1);
        auto* gs = detail::grad_of(n, 2);
        const std::size_t R = n.value.rows(), C = n.value.cols();
        std::vector<Real> dxhat(C);
        for (std::size_t i = 0; i < R; ++i) {
          Real mean_d = 0, mean_dx = 0;
          for (std::size_t j = 0; j < C; ++j) {
            const Real gij = n.grad(i, j);
            if (gg) (*gg)[j] += gij * xhat(i, j);
            if (gs) (*gs)[j] += gij;
            dxhat[j] = gij * gain_v[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat(i, j);
          }
          if (!gx) continue;
          mean_d /= Real(C);
          mean_dx /= Real(C);
          for (std::size_t j = 0; j < C; ++j)
            (*gx)(i, j) += inv_std[i] * (dxhat[j] - mean_d - xhat(i, j) * mean_dx);
        }
      });
}

// ---------------------------------------------------------------------------
// Reductions and pooling

/// Elementwise max over the unmasked rows of x[T x D]; returns 1 x D. The
/// gradient goes to the first row attaining the max in each column.
template <class Real>
Var<Real> masked_max_rows(const Var<Real>& x, const Mask& mask) {
  detail::require_2d(x, "masked_max_rows");
  const std::size_t T = x.rows(), D = x.cols();
  detail::require(mask.size() == T, "masked_max_rows: mask length " +
                                        std::to_string(mask.size()) + " vs " +
                                        shape_str(x.shape()));
  if (mask_count(mask) == 0) throw EmptyPoolError("masked_max_rows: every row is masked");
  Tensor<Real> out({1, D});
  std::vector<std::size_t> argmax(D, T);
  for (std::size_t t = 0; t < T; ++t) {
    if (!mask[t]) continue;
    for (std::size_t d = 0; d < D; ++d) {
      if (argmax[d] == T || x.value()(t, d) > out[d]) {
        out[d] = x.value()(t, d);
        argmax[d] = t;
      }
    }
  }
  return make_node<Real>("masked_max_rows", {x}, std::move(out),
                         [argmax = std::move(argmax)](Node<Real>& n) {
                           auto* g = detail::grad_of(n, 0);
                           for (std::size_t d = 0; d < argmax.size(); ++d)
                             (*g)(argmax[d], d) += n.grad[d];
                         });
}

template <class Real>
Var<Real> sum(const Var<Real>& x) {
  Real s = 0;
  for (Real v : x.value().values()) s += v;
  return make_node<Real>("sum", {x}, Tensor<Real>({1, 1}, std::vector<Real>{s}),
                         [](Node<Real>& n) {
                           auto* g = detail::grad_of(n, 0);
                           for (auto& v : g->values()) v += n.grad[0];
                         });
}

/// Column sums of x[R x C] as a 1 x C row.
template <class Real>
Var<Real> sum_rows(const Var<Real>& x) {
  detail::require_2d(x, "sum_rows");
  const std::size_t R = x.rows(), C = x.cols();
  Tensor<Real> out({1, C});
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[j] += x.value()(i, j);
  return make_node<Real>("sum_rows", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t R = g->rows(), C = g->cols();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < C; ++j) (*g)(i, j) += n.grad[j];
  });
}

// ---------------------------------------------------------------------------
// Structural

template <class Real>
Var<Real> reshape(const Var<Real>& x, Shape shape) {
  Tensor<Real> out = x.value().reshaped(std::move(shape));
  return make_node<Real>("reshape", {x}, std::move(out), [](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i];
  });
}

template <class Real>
Var<Real> slice_rows(const Var<Real>& x, std::size_t begin, std::size_t count) {
  detail::require_2d(x, "slice_rows");
  detail::require(begin + count <= x.rows(), "slice_rows: range past end of " +
                                                 shape_str(x.shape()));
  const std::size_t C = x.cols();
  Tensor<Real> out({count, C});
  std::copy_n(x.value().data().begin() + begin * C, count * C, out.data().begin());
  return make_node<Real>("slice_rows", {x}, std::move(out), [begin](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t off = begin * n.grad.cols();
    for (std::size_t i = 0; i < n.grad.size(); ++i) (*g)[off + i] += n.grad[i];
  });
}

template <class Real>
Var<Real> slice_cols(const Var<Real>& x, std::size_t begin, std::size_t count) {
  detail::require_2d(x, "slice_cols");
  detail::require(begin + count <= x.cols(), "slice_cols: range past end of " +
                                                 shape_str(x.shape()));
  const std::size_t R = x.rows();
  Tensor<Real> out({R, count});
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x.value()(i, begin + j);
  return make_node<Real>("slice_cols", {x}, std::move(out), [begin](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t R = n.grad.rows(), count = n.grad.cols();
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < count; ++j) (*g)(i, begin + j) += n.grad(i, j);
  });
}

template <class Real>
Var<Real> concat_rows(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t C = parts.front().cols();
  std::size_t R = 0;
  for (const auto& p : parts) {
    detail::require(p.cols() == C, "concat_rows: column mismatch " + shape_str(p.shape()));
    R += p.rows();
  }
  Tensor<Real> out({R, C});
  auto it = out.data().begin();
  for (const auto& p : parts) it = std::copy(p.value().data().begin(), p.value().data().end(), it);
  return make_node<Real>("concat_rows", parts, std::move(out), [](Node<Real>& n) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t len = n.inputs[k]->value.size();
      if (auto* g = detail::grad_of(n, k))
        for (std::size_t i = 0; i < len; ++i) (*g)[i] += n.grad[off + i];
      off += len;
    }
  });
}

template <class Real>
Var<Real> concat_cols(const std::vector<Var<Real>>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t R = parts.front().rows();
  std::size_t C = 0;
  for (const auto& p : parts) {
    detail::require(p.rows() == R, "concat_cols: row mismatch " + shape_str(p.shape()));
    C += p.cols();
  }
  Tensor<Real> out({R, C});
  std::size_t off = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < R; ++i)
      for (std::size_t j = 0; j < p.cols(); ++j) out(i, off + j) = p.value()(i, j);
    off += p.cols();
  }
  return make_node<Real>("concat_cols", parts, std::move(out), [](Node<Real>& n) {
    std::size_t off = 0;
    const std::size_t R = n.grad.rows();
    for (std::size_t k = 0; k < n.inputs.size(); ++k) {
      const std::size_t w = n.inputs[k]->value.cols();
      if (auto* g = detail::grad_of(n, k))
        for (std::size_t i = 0; i < R; ++i)
          for (std::size_t j = 0; j < w; ++j) (*g)(i, j) += n.grad(i, off + j);
      off += w;
    }
  });
}

/// Embedding lookup: row ids[i] of table becomes output row i.
template <class Real>
Var<Real> gather_rows(const Var<Real>& table, const std::vector<std::size_t>& ids) {
  detail::require_2d(table, "gather_rows");
  const std::size_t V = table.rows(), C = table.cols();
  Tensor<Real> out({ids.size(), C});
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= V)
      throw ShapeError("gather_rows: id " + std::to_string(ids[i]) + " outside table of " +
                       std::to_string(V) + " rows");
    for (std::size_t j = 0; j < C; ++j) out(i, j) = table.value()(ids[i], j);
  }
  return make_node<Real>("gather_rows", {table}, std::move(out), [ids](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    const std::size_t C = n.grad.cols();
    for (std::size_t i = 0; i < ids.size(); ++i)
      for (std::size_t j = 0; j < C; ++j) (*g)(ids[i], j) += n.grad(i, j);
  });
}

// ---------------------------------------------------------------------------
// Stochastic

/// Inverted dropout. Identity (no new node) outside training or when p == 0.
template <class Real>
Var<Real> dropout(const Var<Real>& x, double p, Rng* rng, bool training) {
  if (!training || p <= 0.0) return x;
  if (p >= 1.0) throw ConfigError("dropout probability must be < 1");
  if (!rng) throw ContractError("dropout in training mode needs a generator");
  const Real keep_scale = Real(1.0 / (1.0 - p));
  Tensor<Real> keep(x.shape());
  Tensor<Real> out = x.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    keep[i] = uniform01(*rng) >= p ? keep_scale : Real(0);
    out[i] *= keep[i];
  }
  return make_node<Real>("dropout", {x}, std::move(out), [keep = std::move(keep)](Node<Real>& n) {
    auto* g = detail::grad_of(n, 0);
    for (std::size_t i = 0; i < g->size(); ++i) (*g)[i] += n.grad[i] * keep[i];
  });
}

}  // namespace t2v

#endif  // T2V_OPS_HPP
