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

#ifndef T2V_OBJECTIVE_HPP
#define T2V_OBJECTIVE_HPP

#include <string>

#include "t2v/ops.hpp"

namespace t2v {

/// Bidirectional max-margin ranking loss over a square similarity matrix
/// whose diagonal holds the matched pairs:
///   L = (1/B) sum_i sum_{j != i} [ max(0, m + S_ij - S_ii) + max(0, m + S_ji - S_ii) ]
/// The first hinge ranks videos for text i (rows), the second ranks texts for
/// video i (columns). A hinge exactly at its kink contributes zero gradient.
template <class Real>
Var<Real> margin_ranking_loss(const Var<Real>& S, Real margin) {
  detail::require_2d(S, "margin_ranking_loss");
  const std::size_t B = S.rows();
  if (S.cols() != B) throw ContractError("ranking loss needs a square similarity matrix, got " +
                                         shape_str(S.shape()));
  if (B < 2) throw ContractError("ranking loss needs at least two pairs");
  if (!(margin > 0)) throw ContractError("ranking margin must be positive");
  const auto& s = S.value();
  Real total = 0;
  for (std::size_t i = 0; i < B; ++i)
    for (std::size_t j = 0; j < B; ++j) {
      if (i == j) continue;
      total += std::max(Real(0), margin + s(i, j) - s(i, i));
      total += std::max(Real(0), margin + s(j, i) - s(i, i));
    }
  total /= Real(B);
  return make_node<Real>("margin_ranking_loss", {S}, Tensor<Real>({1, 1}, std::vector<Real>{total}),
                         [margin, B](Node<Real>& n) {
                           auto* g = detail::grad_of(n, 0);
                           const auto& s = n.inputs[0]->value;
                           const Real scale = n.grad[0] / Real(B);
                           for (std::size_t i = 0; i < B; ++i)
                             for (std::size_t j = 0; j < B; ++j) {
                               if (i == j) continue;
                               if (margin + s(i, j) - s(i, i) > 0) {
                                 (*g)(i, j) += scale;
                                 (*g)(i, i) -= scale;
                               }
                               if (margin + s(j, i) - s(i, i) > 0) {
                                 (*g)(j, i) += scale;
                                 (*g)(i, i) -= scale;
                               }
                             }
                         });
}

}  // namespace t2v

#endif  // T2V_OBJECTIVE_HPP
