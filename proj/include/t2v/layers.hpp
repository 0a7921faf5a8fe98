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

#ifndef T2V_LAYERS_HPP
#define T2V_LAYERS_HPP

#include <cmath>
#include <string>
#include <vector>

#include "t2v/ops.hpp"
#include "t2v/random.hpp"

namespace t2v {

// Parameter layout is by name prefix: a layer registered under "p" owns
// "p/weight", "p/bias", and so on inside a ParameterSet.

template <class Real>
void add_linear(ParameterSet<Real>& ps, const std::string& prefix, std::size_t in,
                std::size_t out, Rng& rng) {
  ps.add(prefix + "/weight", normal_tensor<Real>({in, out}, 1.0 / std::sqrt(double(in)), rng));
  ps.add(prefix + "/bias", Tensor<Real>({1, out}));
}

/// x W + b
template <class Real>
Var<Real> linear(const ParameterSet<Real>& ps, const std::string& prefix, const Var<Real>& x) {
  const auto& w = ps.at(prefix + "/weight").value();
  if (x.cols() != w.rows()) {
    throw ConfigError(prefix + ": input width " + std::to_string(x.cols()) +
                      " does not match weight " + shape_str(w.shape()));
  }
  return add_row(matmul(x, ps.var(prefix + "/weight")), ps.var(prefix + "/bias"));
}

/// Context gating over a feature row: y = u * sigmoid(u W + b).
template <class Real>
void add_self_gating(ParameterSet<Real>& ps, const std::string& prefix, std::size_t dim,
                     Rng& rng) {
  add_linear(ps, prefix, dim, dim, rng);
}

template <class Real>
Var<Real> self_gating(const ParameterSet<Real>& ps, const std::string& prefix,
                      const Var<Real>& u) {
  return mul(u, sigmoid(linear(ps, prefix, u)));
}

/// Shape and behavior of one self-attention block.
struct AttentionConfig {
  std::size_t dim = 768;
  std::size_t heads = 4;
  double dropout = 0.1;
  /// Adds a position-wise feed-forward sublayer after attention.
  bool feed_forward = false;
  std::size_t ffn_dim = 0;  // 0 means "same as dim"

  void validate() const {
    if (heads == 0 || dim % heads != 0) {
      throw ConfigError("attention width " + std::to_string(dim) +
                        " is not divisible by head count " + std::to_string(heads));
    }
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("attention dropout must be in [0,1)");
  }
};

template <class Real>
void add_attention(ParameterSet<Real>& ps, const std::string& prefix, const AttentionConfig& cfg,
                   Rng& rng) {
  cfg.validate();
  const std::size_t C = cfg.dim;
  for (const char* name : {"query", "key", "value", "out"}) add_linear(ps, prefix + "/" + name, C, C, rng);
  ps.add(prefix + "/norm/gain", Tensor<Real>({1, C}, Real(1)));
  ps.add(prefix + "/norm/shift", Tensor<Real>({1, C}));
  if (cfg.feed_forward) {
    const std::size_t H = cfg.ffn_dim ? cfg.ffn_dim : C;
    add_linear(ps, prefix + "/ffn/in", C, H, rng);
    add_linear(ps, prefix + "/ffn/out", H, C, rng);
    ps.add(prefix + "/ffn_norm/gain", Tensor<Real>({1, C}, Real(1)));
    ps.add(prefix + "/ffn_norm/shift", Tensor<Real>({1, C}));
  }
}

/// One multi-head self-attention block over the rows of x[M x C]:
///   y = LayerNorm(x + Dropout(MHA(x)))   [+ optional feed-forward sublayer]
/// Masked rows neither attend nor are attended to and come out as zeros.
/// There is no positional encoding, so the block is permutation-equivariant.
template <class Real>
Var<Real> multi_head_self_attention(const Var<Real>& x, const Mask& mask,
                                    const ParameterSet<Real>& ps, const std::string& prefix,
                                    const AttentionConfig& cfg, bool training, Rng* rng) {
  cfg.validate();
  if (x.cols() != cfg.dim) {
    throw ConfigError(prefix + ": token width " + std::to_string(x.cols()) +
                      " does not match attention width " + std::to_string(cfg.dim));
  }
  if (mask.size() != x.rows()) throw ShapeError(prefix + ": mask length does not match tokens");
  const std::size_t dh = cfg.dim / cfg.heads;
  const Real inv_sqrt = Real(1) / std::sqrt(Real(dh));

  auto q = linear(ps, prefix + "/query", x);
  auto k = linear(ps, prefix + "/key", x);
  auto v = linear(ps, prefix + "/value", x);
  std::vector<Var<Real>> heads;
  heads.reserve(cfg.heads);
  for (std::size_t h = 0; h < cfg.heads; ++h) {
    auto qh = slice_cols(q, h * dh, dh);
    auto kh = slice_cols(k, h * dh, dh);
    auto vh = slice_cols(v, h * dh, dh);
    auto weights = masked_softmax_rows(scale(matmul_nt(qh, kh), inv_sqrt), mask);
    heads.push_back(matmul(weights, vh));
  }
  auto attended = linear(ps, prefix + "/out", cfg.heads == 1 ? heads.front() : concat_cols(heads));
  attended = dropout(attended, cfg.dropout, rng, training);
  auto y = layer_norm_rows(add(x, attended), ps.var(prefix + "/norm/gain"),
                           ps.var(prefix + "/norm/shift"));
  if (cfg.feed_forward) {
    auto hidden = relu(linear(ps, prefix + "/ffn/in", y));
    auto ff = dropout(linear(ps, prefix + "/ffn/out", hidden), cfg.dropout, rng, training);
    y = layer_norm_rows(add(y, ff), ps.var(prefix + "/ffn_norm/gain"),
                        ps.var(prefix + "/ffn_norm/shift"));
  }
  return mask_rows(y, mask);
}

}  // namespace t2v

#endif  // T2V_LAYERS_HPP
