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

#ifndef T2V_MODEL_CONFIG_HPP
#define T2V_MODEL_CONFIG_HPP

#include <string>
#include <vector>

#include "t2v/featureio.hpp"
#include "t2v/layers.hpp"

namespace t2v {

/// Architecture variants. `local_only_eval` trains the full model and drops
/// the global term only when scoring for evaluation.
enum class Ablation { kNone, kGlobalOnly, kLocalOnlyEval, kSeparateVlad, kTextOnlyVlad };

inline std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::kNone: return "none";
    case Ablation::kGlobalOnly: return "global_only";
    case Ablation::kLocalOnlyEval: return "local_only_eval";
    case Ablation::kSeparateVlad: return "separate_vlad";
    case Ablation::kTextOnlyVlad: return "text_only_vlad";
  }
  return "none";
}

inline Ablation ablation_from_string(const std::string& s) {
  for (auto a : {Ablation::kNone, Ablation::kGlobalOnly, Ablation::kLocalOnlyEval,
                 Ablation::kSeparateVlad, Ablation::kTextOnlyVlad})
    if (to_string(a) == s) return a;
  throw ConfigError("unknown ablation '" + s + "'");
}

struct ModelConfig {
  std::vector<ExpertSpec> experts;
  TextSpec text;
  std::size_t dim = 768;        // common space for local and global alignment
  std::size_t centers = 9;      // semantic centers; one background center is added
  std::size_t heads = 4;
  double dropout = 0.1;
  bool attention_ffn = false;
  std::size_t max_tokens = 32;
  Ablation ablation = Ablation::kNone;

  std::size_t num_experts() const { return experts.size(); }
  std::size_t descriptor_size() const { return centers * dim; }
  bool uses_vlad() const { return ablation != Ablation::kGlobalOnly; }
  bool separate_centers() const { return ablation == Ablation::kSeparateVlad; }

  AttentionConfig attention() const {
    AttentionConfig a;
    a.dim = dim;
    a.heads = heads;
    a.dropout = dropout;
    a.feed_forward = attention_ffn;
    return a;
  }

  void validate() const {
    if (experts.empty()) throw ConfigError("model needs at least one expert");
    if (dim == 0) throw ConfigError("model dim must be positive");
    if (centers == 0) throw ConfigError("center count must be positive");
    if (max_tokens == 0) throw ConfigError("max_tokens must be positive");
    if (text.token_ids() ? text.vocab == 0 : text.dim == 0)
      throw ConfigError("text features need a positive dim/vocab");
    attention().validate();
  }
};

}  // namespace t2v

#endif  // T2V_MODEL_CONFIG_HPP
