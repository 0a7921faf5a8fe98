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

#ifndef T2V_MODEL_HPP
#define T2V_MODEL_HPP

#include <string>
#include <vector>

#include "t2v/batching.hpp"
#include "t2v/encoders.hpp"
#include "t2v/global_align.hpp"
#include "t2v/objective.hpp"
#include "t2v/vlad.hpp"

namespace t2v {

/// Which terms enter the text-video score.
enum class SimilarityMode { kCombined, kGlobal, kLocal };

template <class Real>
struct VideoEncoding {
  LocalVideoTokens<Real> local;
  VladDescriptor<Real> descriptor;  // empty in the global-only variant
  Var<Real> flat;                   // 1 x KC, normalized as a whole
  GlobalExpertFeatures<Real> global;
};

template <class Real>
struct TextEncoding {
  TextTokens<Real> tokens;
  VladDescriptor<Real> descriptor;
  Var<Real> flat;
  std::vector<Var<Real>> global;  // one per expert
  Var<Real> logits;               // 1 x N mixture logits
};

namespace names {
inline const std::string kSharedCenters = "vlad";
inline const std::string kTextCenters = "vlad/text";
inline const std::string kVideoCenters = "vlad/video";
inline const std::string kVideoPoolProjection = "video/pool_projection";
}  // namespace names

/// The full alignment model: encoders, shared-center VLAD on both sides, and
/// the expert-wise global branch. Scores are s = (s_global + s_local) / 2.
template <class Real>
class Model {
 public:
  Model(ModelConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    Rng rng = derive_rng(seed, {0x1417});
    add_encoder_params(params_, cfg_, rng);
    if (cfg_.uses_vlad()) {
      if (cfg_.separate_centers()) {
        add_centers(params_, names::kTextCenters, cfg_.centers, cfg_.dim, rng);
        add_centers(params_, names::kVideoCenters, cfg_.centers, cfg_.dim, rng);
      } else {
        add_centers(params_, names::kSharedCenters, cfg_.centers, cfg_.dim, rng);
      }
      if (cfg_.ablation == Ablation::kTextOnlyVlad)
        add_linear(params_, names::kVideoPoolProjection, cfg_.dim, cfg_.descriptor_size(), rng);
    }
    add_global_params(params_, cfg_, cfg_.uses_vlad() ? cfg_.descriptor_size() : cfg_.dim, rng);
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<Real>& params() { return params_; }
  const ParameterSet<Real>& params() const { return params_; }

  SharedCenters<Real> text_centers() const {
    return centers_from(params_, cfg_.separate_centers() ? names::kTextCenters : names::kSharedCenters);
  }
  SharedCenters<Real> video_centers() const {
    return centers_from(params_, cfg_.separate_centers() ? names::kVideoCenters : names::kSharedCenters);
  }

  SimilarityMode training_mode() const {
    return cfg_.ablation == Ablation::kGlobalOnly ? SimilarityMode::kGlobal : SimilarityMode::kCombined;
  }
  SimilarityMode evaluation_mode() const {
    switch (cfg_.ablation) {
      case Ablation::kGlobalOnly: return SimilarityMode::kGlobal;
      case Ablation::kLocalOnlyEval: return SimilarityMode::kLocal;
      default: return SimilarityMode::kCombined;
    }
  }

  VideoEncoding<Real> encode_video(const ExpertFeatureSet<Real>& f, bool training, Rng* rng) const {
    VideoEncoding<Real> out;
    out.global = encode_video_global(f, params_, cfg_);
    if (!cfg_.uses_vlad()) return out;
    out.local = encode_video_local(f, params_, cfg_, training, rng);
    if (cfg_.ablation == Ablation::kTextOnlyVlad) {
      auto pooled = masked_max_rows(out.local.tokens, out.local.mask);
      auto projected = linear(params_, names::kVideoPoolProjection, pooled);
      out.descriptor = {l2_normalize_rows(reshape(projected, {cfg_.centers, cfg_.dim}))};
    } else {
      out.descriptor = aggregate(out.local.tokens, out.local.mask, video_centers());
    }
    out.flat = flatten_normalized(out.descriptor);
    return out;
  }

  TextEncoding<Real> encode_text(const TextFeatureSet<Real>& t, bool training, Rng* rng) const {
    TextEncoding<Real> out;
    out.tokens = t2v::encode_text(t, params_, cfg_, training, rng);
    Var<Real> summary;
    if (cfg_.uses_vlad()) {
      out.descriptor = aggregate(out.tokens.tokens, out.tokens.mask, text_centers());
      out.flat = flatten_normalized(out.descriptor);
      summary = reshape(out.descriptor.vectors, {1, cfg_.descriptor_size()});
    } else {
      summary = masked_max_rows(out.tokens.tokens, out.tokens.mask);
    }
    out.global = text_expert_projections(summary, params_, cfg_);
    out.logits = mixture_logits(summary, params_);
    return out;
  }

  /// Score of a single pair, computed without any batching.
  Var<Real> pair_similarity(const TextEncoding<Real>& t, const VideoEncoding<Real>& v,
                            SimilarityMode mode) const {
    auto global = [&] {
      return global_similarity(t.global, v.global.features, mixture_weights(t.logits, v.global.available));
    };
    auto local = [&] { return local_similarity(v.descriptor, t.descriptor); };
    switch (mode) {
      case SimilarityMode::kGlobal: return global();
      case SimilarityMode::kLocal: return local();
      default: return scale(add(global(), local()), Real(0.5));
    }
  }

  /// T x V score matrix; each text and video is encoded once by the caller.
  Var<Real> similarity_matrix(const std::vector<TextEncoding<Real>>& texts,
                              const std::vector<VideoEncoding<Real>>& videos, SimilarityMode mode) const {
    if (texts.empty() || videos.empty()) throw ContractError("similarity matrix over an empty set");
    Var<Real> local, global;
    if (mode != SimilarityMode::kGlobal) {
      if (!cfg_.uses_vlad()) throw ConfigError("local similarity requested from a global-only model");
      std::vector<Var<Real>> tf, vf;
      for (const auto& t : texts) tf.push_back(t.flat);
      for (const auto& v : videos) vf.push_back(v.flat);
      local = matmul_nt(concat_rows(tf), concat_rows(vf));
    }
    if (mode != SimilarityMode::kLocal) {
      const std::size_t N = cfg_.num_experts();
      std::vector<Var<Real>> cosines;
      for (std::size_t n = 0; n < N; ++n) {
        std::vector<Var<Real>> tf, vf;
        for (const auto& t : texts) tf.push_back(t.global[n]);
        for (const auto& v : videos) vf.push_back(v.global.features[n]);
        cosines.push_back(matmul_nt(l2_normalize_rows(concat_rows(tf)), l2_normalize_rows(concat_rows(vf))));
      }
      std::vector<Var<Real>> logits;
      for (const auto& t : texts) logits.push_back(t.logits);
      std::vector<std::vector<std::uint8_t>> avail;
      for (const auto& v : videos) avail.push_back(v.global.available);
      global = pairwise_global_similarity(concat_rows(logits), cosines, avail);
    }
    switch (mode) {
      case SimilarityMode::kGlobal: return global;
      case SimilarityMode::kLocal: return local;
      default: return scale(add(global, local), Real(0.5));
    }
  }

  /// Encodes the batch's pairs once each and scores all B x B combinations.
  Var<Real> batch_similarity(const Dataset<Real>& data, const Batch& batch, bool training, Rng* rng,
                             SimilarityMode mode) const {
    if (batch.size() < 2) throw ContractError("batch similarity needs at least two pairs");
    std::vector<TextEncoding<Real>> texts;
    std::vector<VideoEncoding<Real>> videos;
    for (const auto& p : batch) {
      try {
        videos.push_back(encode_video(data.videos.at(p.item), training, rng));
        texts.push_back(encode_text(data.captions.at(p.item).at(p.caption), training, rng));
      } catch (const NumericalError& e) {
        throw NumericalError("while encoding pair '" + data.manifest.items.at(p.item).video_id + "': " + e.what());
      } catch (const Error& e) {
        throw DataError("while encoding pair '" + data.manifest.items.at(p.item).video_id + "': " + e.what());
      }
    }
    return similarity_matrix(texts, videos, mode);
  }

 private:
  ModelConfig cfg_;
  ParameterSet<Real> params_;
};

}  // namespace t2v

#endif  // T2V_MODEL_HPP
