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

#ifndef T2V_BATCHING_HPP
#define T2V_BATCHING_HPP

#include <numeric>
#include <vector>

#include "t2v/errors.hpp"
#include "t2v/random.hpp"

namespace t2v {

/// (video, caption) pair; the video's own caption is the ground-truth match.
struct PairRef {
  std::size_t item = 0;
  std::size_t caption = 0;
  friend bool operator==(const PairRef&, const PairRef&) = default;
};

using Batch = std::vector<PairRef>;

/// All batches of one epoch. Every item appears at most once; each contributes
/// one caption drawn uniformly from its captions; a trailing batch smaller
/// than two pairs is dropped since it has no negatives.
inline std::vector<Batch> epoch_batches(const std::vector<std::size_t>& captions_per_item,
                                        std::size_t batch_size, std::uint64_t seed,
                                        std::size_t epoch, bool shuffle) {
  if (batch_size < 2) throw ConfigError("batch size must be at least 2 for in-batch negatives");
  const std::size_t n = captions_per_item.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  if (shuffle) {
    Rng rng = derive_rng(seed, {0xba7c4, epoch});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
  }
  Rng caption_rng = derive_rng(seed, {0xca9, epoch});
  std::vector<Batch> batches;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    if (end - start < 2) break;
    Batch b;
    for (std::size_t i = start; i < end; ++i) {
      const std::size_t item = order[i];
      if (captions_per_item[item] == 0) throw DataError("item without captions in batch iterator");
      b.push_back({item, static_cast<std::size_t>(uniform_index(caption_rng, captions_per_item[item]))});
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

}  // namespace t2v

#endif  // T2V_BATCHING_HPP
