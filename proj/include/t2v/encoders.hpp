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

#ifndef T2V_ENCODERS_HPP
#define T2V_ENCODERS_HPP

#include <string>
#include <vector>

#include "t2v/featureio.hpp"
#include "t2v/layers.hpp"
#include "t2v/model_config.hpp"

namespace t2v {

/// Fused per-segment video features after the self-attention layer.
template <class Real>
struct LocalVideoTokens {
  Var<Real> tokens;                  // M_total x C, masked rows zero
  Mask mask;                         // M_total
  std::vector<std::size_t> expert;   // provenance of each token
};

/// One gated C-dim vector per expert; unavailable experts hold zeros.
template <class Real>
struct GlobalExpertFeatures {
  std::vector<Var<Real>> features;   // N x (1 x C)
  std::vector<std::uint8_t> available;
};

template <class Real>
struct TextTokens {
  Var<Real> tokens;  // B x C, masked rows zero
  Mask mask;
};

namespace names {
inline std::string video_local(const std::string& expert) { return "video/local/" + expert; }
inline std::string video_global(const std::string& expert) { return "video/global/" + expert; }
inline std::string video_gate(const std::string& expert) { return "video/gate/" + expert; }
inline const std::string kVideoAttention = "video/attention";
inline const std::string kTextProjection = "text/projection";
inline const std::string kTextEmbedding = "text/embedding";
inline const std::string kTextAttention = "text/attention";
}  // namespace names

/// Registers every encoder parameter for `cfg`.
template <class Real>
void add_encoder_params(ParameterSet<Real>& ps, const ModelConfig& cfg, Rng& rng) {
  const std::size_t C = cfg.dim;
  for (const auto& e : cfg.experts) {
    add_linear(ps, names::video_local(e.name), e.dim, C, rng);
    add_linear(ps, names::video_global(e.name), e.dim, C, rng);
    add_self_gating(ps, names::video_gate(e.name), C, rng);
  }
  add_attention(ps, names::kVideoAttention, cfg.attention(), rng);
  if (cfg.text.token_ids()) {
    ps.add(names::kTextEmbedding, normal_tensor<Real>({cfg.text.vocab, C}, 1.0, rng));
    add_attention(ps, names::kTextAttention, cfg.attention(), rng);
  } else {
    add_linear(ps, names::kTextProjection, cfg.text.dim, C, rng);
  }
}

namespace detail {
template <class Real>
void check_video_dims(const ExpertFeatureSet<Real>& f, const ModelConfig& cfg) {
  if (f.num_experts() != cfg.num_experts())
    throw ConfigError("video has " + std::to_string(f.num_experts()) + " experts, model expects " +
                      std::to_string(cfg.num_experts()));
  for (std::size_t n = 0; n < f.num_experts(); ++n) {
    if (f.features[n].cols() != cfg.experts[n].dim)
      throw ConfigError("expert '" + cfg.experts[n].name + "' has width " +
                        std::to_string(f.features[n].cols()) + ", model expects " +
                        std::to_string(cfg.experts[n].dim));
    if (f.masks[n].size() != f.features[n].rows())
      throw ShapeError("expert '" + cfg.experts[n].name + "' mask does not match its segments");
  }
}
}  // namespace detail

/// Projects each expert's segments to C, concatenates them in declared expert
/// order and fuses them with one self-attention layer.
template <class Real>
LocalVideoTokens<Real> encode_video_local(const ExpertFeatureSet<Real>& f,
                                          const ParameterSet<Real>& ps, const ModelConfig& cfg,
                                          bool training, Rng* rng) {
  detail::check_video_dims(f, cfg);
  LocalVideoTokens<Real> out;
  std::vector<Var<Real>> parts;
  for (std::size_t n = 0; n < f.num_experts(); ++n) {
    const auto& name = cfg.experts[n].name;
    parts.push_back(mask_rows(linear(ps, names::video_local(name), constant(f.features[n])), f.masks[n]));
    out.mask.insert(out.mask.end(), f.masks[n].begin(), f.masks[n].end());
    out.expert.insert(out.expert.end(), f.masks[n].size(), n);
  }
  auto z = parts.size() == 1 ? parts.front() : concat_rows(parts);
  out.tokens = multi_head_self_attention(z, out.mask, ps, names::kVideoAttention, cfg.attention(),
                                         training, rng);
  return out;
}

/// Temporal max-pool, projection to C and self-gating, per available expert.
template <class Real>
GlobalExpertFeatures<Real> encode_video_global(const ExpertFeatureSet<Real>& f,
                                               const ParameterSet<Real>& ps,
                                               const ModelConfig& cfg) {
  detail::check_video_dims(f, cfg);
  if (f.num_available() == 0) throw EmptyPoolError("video has no available expert");
  GlobalExpertFeatures<Real> out;
  for (std::size_t n = 0; n < f.num_experts(); ++n) {
    const auto& name = cfg.experts[n].name;
    const bool avail = f.available[n] && mask_count(f.masks[n]) > 0;
    out.available.push_back(avail ? 1 : 0);
    if (!avail) {
      out.features.push_back(constant(Tensor<Real>({1, cfg.dim})));
      continue;
    }
    auto pooled = masked_max_rows(constant(f.features[n]), f.masks[n]);
    auto u = linear(ps, names::video_global(name), pooled);
    out.features.push_back(self_gating(ps, names::video_gate(name), u));
  }
  return out;
}

/// Maps caption features into the common space. Precomputed embeddings go
/// through a linear layer; token ids go through the embedding table and one
/// self-attention layer.
template <class Real>
TextTokens<Real> encode_text(const TextFeatureSet<Real>& t, const ParameterSet<Real>& ps,
                             const ModelConfig& cfg, bool training, Rng* rng) {
  TextTokens<Real> out;
  out.mask = t.mask;
  if (cfg.text.token_ids()) {
    if (t.token_ids.size() != t.mask.size())
      throw ConfigError("model expects token ids but caption carries embeddings");
    auto emb = gather_rows(ps.var(names::kTextEmbedding), t.token_ids);
    out.tokens = multi_head_self_attention(mask_rows(emb, t.mask), t.mask, ps, names::kTextAttention,
                                           cfg.attention(), training, rng);
  } else {
    if (t.embeddings.rank() != 2 || t.embeddings.cols() != cfg.text.dim)
      throw ConfigError("caption embedding width does not match model text dim " +
                        std::to_string(cfg.text.dim));
    if (t.embeddings.rows() != t.mask.size()) throw ShapeError("caption mask does not match tokens");
    out.tokens = mask_rows(linear(ps, names::kTextProjection, constant(t.embeddings)), t.mask);
  }
  return out;
}

}  // namespace t2v

#endif  // T2V_ENCODERS_HPP
