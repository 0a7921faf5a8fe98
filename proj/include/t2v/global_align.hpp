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

#ifndef T2V_GLOBAL_ALIGN_HPP
#define T2V_GLOBAL_ALIGN_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "t2v/layers.hpp"
#include "t2v/model_config.hpp"

namespace t2v {

// Expert-wise global alignment: the text summary (flattened text VLAD
// descriptor, or pooled text tokens in the global-only variant) yields one
// gated feature per expert plus mixture logits; the global similarity is the
// mixture-weighted sum of per-expert cosines, with weights renormalized over
// the experts the video actually has.

namespace names {
inline std::string text_global(const std::string& expert) { return "global/text/" + expert; }
inline std::string text_gate(const std::string& expert) { return "global/text_gate/" + expert; }
inline const std::string kMixture = "global/mixture";
}  // namespace names

template <class Real>
void add_global_params(ParameterSet<Real>& ps, const ModelConfig& cfg, std::size_t summary_dim,
                       Rng& rng) {
  for (const auto& e : cfg.experts) {
    add_linear(ps, names::text_global(e.name), summary_dim, cfg.dim, rng);
    add_self_gating(ps, names::text_gate(e.name), cfg.dim, rng);
  }
  add_linear(ps, names::kMixture, summary_dim, cfg.num_experts(), rng);
}

/// Per expert: gate(summary W_n + b_n).
template <class Real>
std::vector<Var<Real>> text_expert_projections(const Var<Real>& summary, const ParameterSet<Real>& ps,
                                               const ModelConfig& cfg) {
  if (summary.rows() != 1) throw ShapeError("text summary must be a single row");
  std::vector<Var<Real>> out;
  for (const auto& e : cfg.experts)
    out.push_back(self_gating(ps, names::text_gate(e.name), linear(ps, names::text_global(e.name), summary)));
  return out;
}

template <class Real>
Var<Real> mixture_logits(const Var<Real>& summary, const ParameterSet<Real>& ps) {
  return linear(ps, names::kMixture, summary);
}

/// Softmax of the logits over available experts; unavailable experts get 0.
template <class Real>
Var<Real> mixture_weights(const Var<Real>& logits, const std::vector<std::uint8_t>& available) {
  if (available.size() != logits.cols()) throw ShapeError("availability does not match expert count");
  if (mask_count(available) == 0) throw EmptyPoolError("mixture weights with no available expert");
  return masked_softmax_rows(logits, available);
}

/// sum_i w_i cos(text_i, video_i); zero vectors contribute 0.
template <class Real>
Var<Real> global_similarity(const std::vector<Var<Real>>& text, const std::vector<Var<Real>>& video,
                            const Var<Real>& weights) {
  if (text.size() != video.size() || weights.value().size() != text.size())
    throw ShapeError("global similarity: expert counts differ");
  std::vector<Var<Real>> cosines;
  for (std::size_t i = 0; i < text.size(); ++i)
    cosines.push_back(sum(mul(l2_normalize_rows(text[i]), l2_normalize_rows(video[i]))));
  auto cos_row = reshape(concat_cols(cosines), {1, text.size()});
  return sum(mul(cos_row, weights));
}

/// Batched global similarity. For text t and video v:
///   out(t,v) = sum_n w(t,v,n) cosines[n](t,v),
///   w(t,v,.) = softmax over {n : available(v,n)} of logits(t,.).
/// `logits` is T x N, each cosines[n] is T x V, `available` is V rows of N flags.
template <class Real>
Var<Real> pairwise_global_similarity(const Var<Real>& logits, const std::vector<Var<Real>>& cosines,
                                     const std::vector<std::vector<std::uint8_t>>& available) {
  const std::size_t T = logits.rows(), N = logits.cols(), V = available.size();
  if (cosines.size() != N) throw ShapeError("pairwise_global_similarity: one cosine matrix per expert");
  for (const auto& c : cosines)
    if (c.rows() != T || c.cols() != V) throw ShapeError("pairwise_global_similarity: cosine shape");
  for (const auto& a : available) {
    if (a.size() != N) throw ShapeError("pairwise_global_similarity: availability width");
    if (mask_count(a) == 0) throw EmptyPoolError("video with no available expert");
  }
  // weights[(t*V + v)*N + n]
  std::vector<Real> weights(T * V * N, Real(0));
  Tensor<Real> out({T, V});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t v = 0; v < V; ++v) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (std::size_t n = 0; n < N; ++n)
        if (available[v][n]) mx = std::max(mx, logits.value()(t, n));
      Real z = 0;
      Real* w = &weights[(t * V + v) * N];
      for (std::size_t n = 0; n < N; ++n)
        if (available[v][n]) z += (w[n] = std::exp(logits.value()(t, n) - mx));
      Real s = 0;
      for (std::size_t n = 0; n < N; ++n) {
        w[n] /= z;
        s += w[n] * cosines[n].value()(t, v);
      }
      out(t, v) = s;
    }
  }
  std::vector<Var<Real>> inputs{logits};
  inputs.insert(inputs.end(), cosines.begin(), cosines.end());
  return make_node<Real>(
      "pairwise_global_similarity", inputs, std::move(out),
      [weights = std::move(weights), T, V, N](Node<Real>& node) {
        auto* gl = detail::grad_of(node, 0);
        for (std::size_t t = 0; t < T; ++t) {
          for (std::size_t v = 0; v < V; ++v) {
            const Real g = node.grad(t, v);
            if (g == Real(0)) continue;
            const Real* w = &weights[(t * V + v) * N];
            const Real s = node.value(t, v);
            for (std::size_t n = 0; n < N; ++n) {
              if (w[n] == Real(0)) continue;
              const Real c = node.inputs[1 + n]->value(t, v);
              if (auto* gc = detail::grad_of(node, 1 + n)) (*gc)(t, v) += g * w[n];
              if (gl) (*gl)(t, n) += g * w[n] * (c - s);
            }
          }
        }
      });
}

}  // namespace t2v

#endif  // T2V_GLOBAL_ALIGN_HPP
