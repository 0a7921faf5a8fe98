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

#ifndef T2V_SYNTHETIC_HPP
#define T2V_SYNTHETIC_HPP

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include "t2v/featureio.hpp"
#include "t2v/random.hpp"

namespace t2v {

/// Generative world for desk-scale experiments.
///
/// Each pair draws a small set of topics. Every topic gets a pair-specific
/// variant (topic vector plus an instance offset) shared by the video and all
/// of its captions. Video segments and caption tokens are noisy linear images
/// of those variants (per-expert and text projections respectively), with a
/// fraction of tokens/segments drawn from shared "background" vectors that
/// carry no pair information.
struct SyntheticConfig {
  std::size_t num_pairs = 400;
  std::size_t num_test_pairs = 0;
  std::size_t num_topics = 8;
  std::vector<ExpertSpec> experts = {{"motion", 32, 8}, {"audio", 16, 8}, {"appearance", 24, 8}};
  std::size_t text_dim = 24;
  std::string text_kind = "embeddings";  // or "token_ids"
  std::size_t words_per_topic = 8;       // token_ids only
  std::size_t latent_dim = 16;
  std::size_t num_background = 2;
  std::size_t topics_per_item_min = 2;
  std::size_t topics_per_item_max = 3;
  double instance_scale = 0.6;
  double background_prob = 0.25;
  double expert_dropout = 0.15;
  std::size_t min_segments = 2;
  std::size_t min_tokens = 6;
  std::size_t max_tokens = 16;
  std::size_t captions_per_video = 2;
  double noise_sigma = 0.3;
  std::uint64_t seed = 0;

  void validate() const {
    if (num_topics < 2) throw ConfigError("synthetic: num_topics must be at least 2");
    if (num_pairs == 0) throw ConfigError("synthetic: num_pairs must be positive");
    if (experts.empty()) throw ConfigError("synthetic: need at least one expert");
    if (topics_per_item_min == 0 || topics_per_item_min > topics_per_item_max ||
        topics_per_item_max > num_topics)
      throw ConfigError("synthetic: invalid topics-per-item range");
    if (min_tokens == 0 || min_tokens > max_tokens) throw ConfigError("synthetic: invalid token range");
    for (const auto& e : experts)
      if (e.dim == 0 || e.max_segments == 0 || min_segments == 0 || min_segments > e.max_segments)
        throw ConfigError("synthetic: invalid expert '" + e.name + "'");
    if (captions_per_video == 0) throw ConfigError("synthetic: captions_per_video must be positive");
    if (text_kind != "embeddings" && text_kind != "token_ids")
      throw ConfigError("synthetic: unknown text kind '" + text_kind + "'");
    if (text_kind == "embeddings" && text_dim == 0) throw ConfigError("synthetic: text_dim must be positive");
    if (noise_sigma < 0) throw ConfigError("synthetic: noise_sigma must be non-negative");
  }
};

/// Latent ground truth for one pair, kept for tests and diagnostics.
struct SyntheticTruth {
  std::vector<std::size_t> topics;
  Tensor<double> variants;  // topics.size() x latent_dim
};

struct SyntheticDataset {
  DatasetManifest train;
  DatasetManifest test;
  std::map<std::string, Tensor<float>> blobs;  // manifest-relative path -> data
  Tensor<double> topic_vectors;                // num_topics x latent
  Tensor<double> background;                   // num_background x latent
  std::vector<Tensor<double>> expert_projections;  // latent x dim_n
  Tensor<double> text_projection;                  // latent x text_dim
  std::vector<SyntheticTruth> train_truth, test_truth;
};

namespace detail {

inline std::vector<double> latent_row(const Tensor<double>& m, std::size_t r) {
  auto s = m.row_span(r);
  return {s.begin(), s.end()};
}

inline Tensor<float> project_noisy(const std::vector<std::vector<double>>& latents,
                                   const Tensor<double>& proj, double sigma, Rng& rng) {
  const std::size_t L = proj.rows(), D = proj.cols();
  Tensor<float> out({latents.size(), D});
  for (std::size_t r = 0; r < latents.size(); ++r) {
    for (std::size_t d = 0; d < D; ++d) {
      double v = 0;
      for (std::size_t l = 0; l < L; ++l) v += latents[r][l] * proj(l, d);
      if (sigma > 0) v += sigma * normal(rng);
      out(r, d) = static_cast<float>(v);
    }
  }
  return out;
}

inline std::string padded_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace detail

inline SyntheticDataset generate_synthetic_dataset(const SyntheticConfig& cfg) {
  cfg.validate();
  SyntheticDataset ds;
  Rng world_rng = derive_rng(cfg.seed, {0x51});
  const std::size_t L = cfg.latent_dim;
  ds.topic_vectors = normal_tensor<double>({cfg.num_topics, L}, 1.0, world_rng);
  ds.background = normal_tensor<double>({cfg.num_background, L}, 1.0, world_rng);
  const double proj_std = 1.0 / std::sqrt(double(L));
  for (const auto& e : cfg.experts)
    ds.expert_projections.push_back(normal_tensor<double>({L, e.dim}, proj_std, world_rng));
  const bool token_ids = cfg.text_kind == "token_ids";
  if (!token_ids) ds.text_projection = normal_tensor<double>({L, cfg.text_dim}, proj_std, world_rng);

  auto make_split = [&](std::size_t count, const char* prefix, std::uint64_t stream,
                        DatasetManifest& m, std::vector<SyntheticTruth>& truths) {
    m.version = 1;
    m.experts = cfg.experts;
    m.text.kind = cfg.text_kind;
    if (token_ids) m.text.vocab = (cfg.num_topics + cfg.num_background) * cfg.words_per_topic;
    else m.text.dim = cfg.text_dim;
    Rng rng = derive_rng(cfg.seed, {stream});
    for (std::size_t i = 0; i < count; ++i) {
      ItemRef item;
      item.video_id = detail::padded_id(prefix, i);
      SyntheticTruth truth;
      const std::size_t k = cfg.topics_per_item_min +
                            uniform_index(rng, cfg.topics_per_item_max - cfg.topics_per_item_min + 1);
      std::vector<std::size_t> pool(cfg.num_topics);
      std::iota(pool.begin(), pool.end(), 0);
      for (std::size_t t = 0; t < k; ++t) {
        std::swap(pool[t], pool[t + uniform_index(rng, pool.size() - t)]);
        truth.topics.push_back(pool[t]);
      }
      truth.variants = Tensor<double>({k, L});
      for (std::size_t t = 0; t < k; ++t)
        for (std::size_t l = 0; l < L; ++l)
          truth.variants(t, l) = ds.topic_vectors(truth.topics[t], l) + cfg.instance_scale * normal(rng);

      // source index: < k selects a topic variant, otherwise a background vector
      auto draw_source = [&]() -> std::size_t {
        if (cfg.num_background > 0 && uniform01(rng) < cfg.background_prob)
          return k + uniform_index(rng, cfg.num_background);
        return uniform_index(rng, k);
      };
      auto latent_of = [&](std::size_t src) {
        return src < k ? detail::latent_row(truth.variants, src)
                       : detail::latent_row(ds.background, src - k);
      };

      std::vector<std::uint8_t> avail(cfg.experts.size(), 1);
      for (auto& a : avail) a = uniform01(rng) < cfg.expert_dropout ? 0 : 1;
      if (mask_count(avail) == 0) avail[uniform_index(rng, avail.size())] = 1;

      item.features.resize(cfg.experts.size());
      for (std::size_t e = 0; e < cfg.experts.size(); ++e) {
        if (!avail[e]) continue;
        const auto& spec = cfg.experts[e];
        const std::size_t T = cfg.min_segments + uniform_index(rng, spec.max_segments - cfg.min_segments + 1);
        std::vector<std::vector<double>> latents;
        for (std::size_t t = 0; t < T; ++t) latents.push_back(latent_of(draw_source()));
        const std::string path = "feats/" + item.video_id + "/" + spec.name + ".f32";
        ds.blobs[path] = detail::project_noisy(latents, ds.expert_projections[e], cfg.noise_sigma, rng);
        item.features[e] = FeatureRef{path, T};
      }

      for (std::size_t c = 0; c < cfg.captions_per_video; ++c) {
        const std::size_t B = cfg.min_tokens + uniform_index(rng, cfg.max_tokens - cfg.min_tokens + 1);
        const std::string cid = item.video_id + "_c" + std::to_string(c);
        const std::string path = "text/" + cid + ".f32";
        if (token_ids) {
          Tensor<float> ids({B, 1});
          for (std::size_t t = 0; t < B; ++t) {
            const std::size_t src = draw_source();
            const std::size_t group = src < k ? truth.topics[src] : cfg.num_topics + (src - k);
            ids[t] = static_cast<float>(group * cfg.words_per_topic + uniform_index(rng, cfg.words_per_topic));
          }
          ds.blobs[path] = std::move(ids);
        } else {
          std::vector<std::vector<double>> latents;
          for (std::size_t t = 0; t < B; ++t) latents.push_back(latent_of(draw_source()));
          ds.blobs[path] = detail::project_noisy(latents, ds.text_projection, cfg.noise_sigma, rng);
        }
        item.captions.push_back(CaptionRef{cid, path, B});
      }
      m.items.push_back(std::move(item));
      truths.push_back(std::move(truth));
    }
  };

  make_split(cfg.num_pairs, "v", 0x7a, ds.train, ds.train_truth);
  make_split(cfg.num_test_pairs, "t", 0x7b, ds.test, ds.test_truth);
  return ds;
}

/// Writes blobs plus manifest.json (and test.json when a test split exists).
/// Returns the manifest path.
inline fs::path write_synthetic_dataset(SyntheticDataset& ds, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& [rel, t] : ds.blobs) save_tensor_blob(dir / rel, t);
  ds.train.base_dir = dir;
  save_manifest(ds.train, dir / "manifest.json");
  if (!ds.test.items.empty()) {
    ds.test.base_dir = dir;
    save_manifest(ds.test, dir / "test.json");
  }
  return dir / "manifest.json";
}

}  // namespace t2v

#endif  // T2V_SYNTHETIC_HPP
