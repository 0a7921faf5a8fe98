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

#ifndef T2V_METRICS_HPP
#define T2V_METRICS_HPP

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "t2v/errors.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

enum class Direction { kTextToVideo, kVideoToText };

inline std::string to_string(Direction d) {
  return d == Direction::kTextToVideo ? "text_to_video" : "video_to_text";
}

enum class MedianRule { kLower, kMidpoint };

struct RetrievalReport {
  Direction direction = Direction::kTextToVideo;
  double r1 = 0, r5 = 0, r10 = 0, r50 = 0;
  double mdr = 0;
  std::vector<std::size_t> ranks;

  std::size_t num_queries() const { return ranks.size(); }
};

// Ranks are 1-based. Ties are broken pessimistically: every other candidate
// scoring >= the ground truth is placed ahead of it.

/// Square S with ground truth on the diagonal. Text->video ranks row i, video->text ranks column i.
template <class Real>
std::vector<std::size_t> ranks_from_similarity(const Tensor<Real>& S, Direction dir) {
  S.require_rank2("ranks_from_similarity");
  const std::size_t B = S.rows();
  if (S.cols() != B) throw ShapeError("ranks_from_similarity needs a square matrix, got " + shape_str(S.shape()));
  std::vector<std::size_t> ranks(B, 1);
  for (std::size_t i = 0; i < B; ++i) {
    const Real gt = S(i, i);
    for (std::size_t j = 0; j < B; ++j) {
      if (j == i) continue;
      const Real other = dir == Direction::kTextToVideo ? S(i, j) : S(j, i);
      if (other >= gt) ++ranks[i];
    }
  }
  return ranks;
}

/// Rectangular S (queries x videos) where caption q belongs to video gt[q].
/// Text->video: one rank per caption. Video->text: one rank per video, the
/// best rank among its own captions.
template <class Real>
std::vector<std::size_t> ranks_multi_caption(const Tensor<Real>& S, const std::vector<std::size_t>& gt,
                                             Direction dir) {
  S.require_rank2("ranks_multi_caption");
  const std::size_t Q = S.rows(), V = S.cols();
  if (gt.size() != Q) throw ShapeError("one ground-truth video per caption is required");
  for (auto v : gt)
    if (v >= V) throw ShapeError("ground-truth video index out of range");
  if (dir == Direction::kTextToVideo) {
    std::vector<std::size_t> ranks(Q, 1);
    for (std::size_t q = 0; q < Q; ++q)
      for (std::size_t v = 0; v < V; ++v)
        if (v != gt[q] && S(q, v) >= S(q, gt[q])) ++ranks[q];
    return ranks;
  }
  std::vector<std::size_t> ranks(V, std::numeric_limits<std::size_t>::max());
  for (std::size_t q = 0; q < Q; ++q) {
    const std::size_t v = gt[q];
    std::size_t r = 1;
    for (std::size_t q2 = 0; q2 < Q; ++q2)
      if (q2 != q && S(q2, v) >= S(q, v)) ++r;
    ranks[v] = std::min(ranks[v], r);
  }
  for (auto r : ranks)
    if (r == std::numeric_limits<std::size_t>::max()) throw ShapeError("video without any caption query");
  return ranks;
}

inline RetrievalReport report_from_ranks(std::vector<std::size_t> ranks, Direction dir,
                                         MedianRule median = MedianRule::kLower) {
  if (ranks.empty()) throw ContractError("retrieval report over zero queries");
  RetrievalReport r;
  r.direction = dir;
  const double n = static_cast<double>(ranks.size());
  auto recall = [&](std::size_t k) {
    return 100.0 * static_cast<double>(std::count_if(ranks.begin(), ranks.end(),
                                                     [k](std::size_t x) { return x <= k; })) / n;
  };
  r.r1 = recall(1);
  r.r5 = recall(5);
  r.r10 = recall(10);
  r.r50 = recall(50);
  std::vector<std::size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t m = sorted.size();
  if (m % 2 == 1 || median == MedianRule::kLower) {
    r.mdr = static_cast<double>(sorted[(m - 1) / 2]);
  } else {
    r.mdr = 0.5 * static_cast<double>(sorted[m / 2 - 1] + sorted[m / 2]);
  }
  r.ranks = std::move(ranks);
  return r;
}

/// Both directions for a square matrix with ground truth on the diagonal.
template <class Real>
std::pair<RetrievalReport, RetrievalReport> report(const Tensor<Real>& S,
                                                   MedianRule median = MedianRule::kLower) {
  return {report_from_ranks(ranks_from_similarity(S, Direction::kTextToVideo), Direction::kTextToVideo, median),
          report_from_ranks(ranks_from_similarity(S, Direction::kVideoToText), Direction::kVideoToText, median)};
}

inline nlohmann::ordered_json report_to_json(const RetrievalReport& r) {
  return {{"direction", to_string(r.direction)}, {"r1", r.r1},   {"r5", r.r5}, {"r10", r.r10},
          {"r50", r.r50},                        {"mdr", r.mdr}, {"num_queries", r.num_queries()}};
}

}  // namespace t2v

#endif  // T2V_METRICS_HPP
