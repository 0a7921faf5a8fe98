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

#ifndef T2V_EVALUATE_HPP
#define T2V_EVALUATE_HPP

#include <algorithm>
#include <string>
#include <vector>

#include "t2v/metrics.hpp"
#include "t2v/model.hpp"

namespace t2v {

/// Throws DataError unless the model was built for this manifest's experts
/// and text features.
inline void check_compatible(const ModelConfig& cfg, const DatasetManifest& m) {
  auto describe = [](const std::vector<ExpertSpec>& es) {
    std::string s = "[";
    for (std::size_t i = 0; i < es.size(); ++i)
      s += (i ? ", " : "") + es[i].name + ":" + std::to_string(es[i].dim) + "x" + std::to_string(es[i].max_segments);
    return s + "]";
  };
  bool same = cfg.experts.size() == m.experts.size();
  for (std::size_t i = 0; same && i < m.experts.size(); ++i)
    same = cfg.experts[i].name == m.experts[i].name && cfg.experts[i].dim == m.experts[i].dim &&
           cfg.experts[i].max_segments == m.experts[i].max_segments;
  if (!same)
    throw DataError("expert-set mismatch: checkpoint was trained on " + describe(cfg.experts) + ", manifest declares " +
                    describe(m.experts));
  if (cfg.text.kind != m.text.kind || cfg.text.blob_cols() != m.text.blob_cols() || cfg.text.vocab != m.text.vocab)
    throw DataError("text feature mismatch: checkpoint expects " + cfg.text.kind + " (dim " +
                    std::to_string(cfg.text.dim) + ", vocab " + std::to_string(cfg.text.vocab) + "), manifest has " +
                    m.text.kind + " (dim " + std::to_string(m.text.dim) + ", vocab " + std::to_string(m.text.vocab) +
                    ")");
}

/// Every caption and video of a dataset encoded once, in manifest order.
template <class Real>
struct EncodedCorpus {
  std::vector<VideoEncoding<Real>> videos;
  std::vector<TextEncoding<Real>> texts;
  std::vector<std::size_t> caption_video;  // ground-truth video per caption
  std::vector<std::string> caption_ids;
};

template <class Real>
std::vector<VideoEncoding<Real>> encode_videos(const Model<Real>& model, const Dataset<Real>& data) {
  NoGradGuard guard;
  std::vector<VideoEncoding<Real>> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    try {
      out.push_back(model.encode_video(data.videos[i], false, nullptr));
    } catch (const Error& e) {
      throw DataError("video '" + data.manifest.items[i].video_id + "': " + e.what());
    }
  }
  return out;
}

template <class Real>
EncodedCorpus<Real> encode_corpus(const Model<Real>& model, const Dataset<Real>& data) {
  NoGradGuard guard;
  EncodedCorpus<Real> c;
  c.videos = encode_videos(model, data);
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (std::size_t k = 0; k < data.captions[i].size(); ++k) {
      c.texts.push_back(model.encode_text(data.captions[i][k], false, nullptr));
      c.caption_video.push_back(i);
      c.caption_ids.push_back(data.manifest.items[i].captions[k].caption_id);
    }
  }
  return c;
}

template <class Real>
struct EvaluationResult {
  RetrievalReport text_to_video;
  RetrievalReport video_to_text;
  Tensor<Real> similarity;  // captions x videos
};

/// Scores every caption against every video and reports both directions
/// under the multi-caption protocol.
template <class Real>
EvaluationResult<Real> evaluate(const Model<Real>& model, const Dataset<Real>& data, SimilarityMode mode,
                                MedianRule median = MedianRule::kLower) {
  check_compatible(model.config(), data.manifest);
  NoGradGuard guard;
  const auto corpus = encode_corpus(model, data);
  EvaluationResult<Real> r;
  r.similarity = model.similarity_matrix(corpus.texts, corpus.videos, mode).value();
  r.text_to_video = report_from_ranks(ranks_multi_caption(r.similarity, corpus.caption_video, Direction::kTextToVideo),
                                      Direction::kTextToVideo, median);
  r.video_to_text = report_from_ranks(ranks_multi_caption(r.similarity, corpus.caption_video, Direction::kVideoToText),
                                      Direction::kVideoToText, median);
  return r;
}

/// Same, in the model's own evaluation mode.
template <class Real>
EvaluationResult<Real> evaluate(const Model<Real>& model, const Dataset<Real>& data,
                                MedianRule median = MedianRule::kLower) {
  return evaluate(model, data, model.evaluation_mode(), median);
}

template <class Real>
nlohmann::ordered_json evaluation_to_json(const EvaluationResult<Real>& r) {
  return {{"text_to_video", report_to_json(r.text_to_video)}, {"video_to_text", report_to_json(r.video_to_text)}};
}

struct RankedVideo {
  std::string video_id;
  double score = 0.0;
};

/// Top-k videos for one encoded query, by descending score; equal scores
/// are ordered by video id.
template <class Real>
std::vector<RankedVideo> rank_videos(const Model<Real>& model, const TextEncoding<Real>& query,
                                     const std::vector<VideoEncoding<Real>>& videos,
                                     const DatasetManifest& manifest, std::size_t top_k) {
  NoGradGuard guard;
  if (top_k == 0) throw ConfigError("top_k must be positive");
  const auto S = model.similarity_matrix({query}, videos, model.evaluation_mode()).value();
  std::vector<RankedVideo> all;
  for (std::size_t v = 0; v < videos.size(); ++v)
    all.push_back({manifest.items[v].video_id, static_cast<double>(S(0, v))});
  std::sort(all.begin(), all.end(), [](const RankedVideo& a, const RankedVideo& b) {
    return a.score != b.score ? a.score > b.score : a.video_id < b.video_id;
  });
  all.resize(std::min(top_k, all.size()));
  return all;
}

}  // namespace t2v

#endif  // T2V_EVALUATE_HPP
