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

#include <gtest/gtest.h>

#include <cmath>

#include "t2v/global_align.hpp"
#include "t2v/gradcheck.hpp"
#include "test_support.hpp"

namespace t2v {
namespace {

using testing::random_matrix;
using T = Tensor<double>;
using V = Var<double>;
using Avail = std::vector<std::uint8_t>;

V row(std::initializer_list<double> v) { return constant(T({1, v.size()}, std::vector<double>(v))); }

double cosine(std::span<const double> a, std::span<const double> b) {
  double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  return aa == 0 || bb == 0 ? 0.0 : ab / std::sqrt(aa * bb);
}

// ---------------------------------------------------------------------------
// Mixture weights

TEST(Mixture, EqualLogitsAreUniform) {
  auto w = mixture_weights(row({0.3, 0.3, 0.3, 0.3}), Avail{1, 1, 1, 1}).value();
  for (double v : w.values()) EXPECT_NEAR(v, 0.25, 1e-15);
}

TEST(Mixture, SingleAvailableExpertTakesAllWeight) {
  auto w = mixture_weights(row({5, -2, 9}), Avail{0, 1, 0}).value();
  EXPECT_EQ(w(0, 0), 0.0);
  EXPECT_EQ(w(0, 1), 1.0);
  EXPECT_EQ(w(0, 2), 0.0);
}

TEST(Mixture, RenormalizesOverAvailableExperts) {
  auto w = mixture_weights(row({1, 2, 3}), Avail{1, 0, 1}).value();
  const double z = std::exp(1.0) + std::exp(3.0);
  EXPECT_NEAR(w(0, 0), std::exp(1.0) / z, 1e-15);
  EXPECT_NEAR(w(0, 2), std::exp(3.0) / z, 1e-15);
  EXPECT_EQ(w(0, 1), 0.0);
}

TEST(Mixture, Errors) {
  EXPECT_THROW(mixture_weights(row({1, 2}), Avail{0, 0}), EmptyPoolError);
  EXPECT_THROW(mixture_weights(row({1, 2}), Avail{1}), ShapeError);
}

// ---------------------------------------------------------------------------
// global_similarity

TEST(GlobalSimilarity, IdenticalIsOneOrthogonalIsZero) {
  std::vector<V> a{row({1, 2}), row({0, 3})};
  std::vector<V> b{row({-2, 1}), row({4, 0})};
  auto w = mixture_weights(row({0.1, 0.7}), Avail{1, 1});
  EXPECT_NEAR(global_similarity(a, a, w).item(), 1.0, 1e-15);
  EXPECT_NEAR(global_similarity(a, b, w).item(), 0.0, 1e-15);
}

TEST(GlobalSimilarity, ScalarOracle) {
  std::vector<V> t{row({1, 0}), row({1, 1})};
  std::vector<V> v{row({1, 1}), row({0, 2})};
  auto w = mixture_weights(row({0, std::log(3.0)}), Avail{1, 1});  // weights 1/4, 3/4
  const double expected = 0.25 * (1 / std::sqrt(2.0)) + 0.75 * (1 / std::sqrt(2.0));
  EXPECT_NEAR(global_similarity(t, v, w).item(), expected, 1e-15);

  auto w2 = mixture_weights(row({0, 0}), Avail{1, 1});
  std::vector<V> v2{row({1, 0}), row({-1, -1})};
  EXPECT_NEAR(global_similarity(t, v2, w2).item(), 0.5 * 1 + 0.5 * -1, 1e-15);
}

TEST(GlobalSimilarity, PositiveRescalingIsInvisible) {
  Rng rng = derive_rng(3, {});
  std::vector<V> t, v, vs;
  for (int n = 0; n < 3; ++n) {
    t.push_back(constant(random_matrix(1, 5, rng)));
    auto x = random_matrix(1, 5, rng);
    v.push_back(constant(x));
    for (auto& e : x.values()) e *= 7.5 + n;
    vs.push_back(constant(x));
  }
  auto w = mixture_weights(constant(random_matrix(1, 3, rng)), Avail{1, 1, 1});
  EXPECT_NEAR(global_similarity(t, v, w).item(), global_similarity(t, vs, w).item(), 1e-14);
}

TEST(GlobalSimilarity, UnavailableExpertEqualsDroppingIt) {
  Rng rng = derive_rng(4, {});
  std::vector<V> t, v;
  for (int n = 0; n < 3; ++n) {
    t.push_back(constant(random_matrix(1, 4, rng)));
    v.push_back(constant(random_matrix(1, 4, rng)));
  }
  auto logits = random_matrix(1, 3, rng);
  const double full = global_similarity(t, v, mixture_weights(constant(logits), Avail{1, 0, 1})).item();
  std::vector<V> t2{t[0], t[2]}, v2{v[0], v[2]};
  T l2({1, 2}, std::vector<double>{logits[0], logits[2]});
  const double reduced = global_similarity(t2, v2, mixture_weights(constant(l2), Avail{1, 1})).item();
  EXPECT_NEAR(full, reduced, 1e-15);
}

TEST(GlobalSimilarity, WeightsDependOnText) {
  // The same cosines score differently under different text-side logits, so
  // the score is not a fixed average of per-expert cosines.
  std::vector<V> t{row({1, 0}), row({0, 1})};
  std::vector<V> v{row({1, 0}), row({1, 0})};
  const double a = global_similarity(t, v, mixture_weights(row({3, -3}), Avail{1, 1})).item();
  const double b = global_similarity(t, v, mixture_weights(row({-3, 3}), Avail{1, 1})).item();
  EXPECT_GT(a, 0.99);
  EXPECT_LT(b, 0.01);
}

// ---------------------------------------------------------------------------
// pairwise_global_similarity

struct PairwiseCase {
  explicit PairwiseCase(std::uint64_t seed) {
    Rng rng = derive_rng(seed, {});
    ps.add("logits", random_matrix(Tn, N, rng));
    for (std::size_t n = 0; n < N; ++n) {
      ps.add("t" + std::to_string(n), random_matrix(Tn, 4, rng));
      ps.add("v" + std::to_string(n), random_matrix(Vn, 4, rng));
    }
    avail = {{1, 1, 1}, {1, 0, 1}, {0, 1, 0}, {1, 1, 0}};
  }

  std::vector<V> cosines() const {
    std::vector<V> out;
    for (std::size_t n = 0; n < N; ++n)
      out.push_back(matmul_nt(l2_normalize_rows(ps.var("t" + std::to_string(n))),
                              l2_normalize_rows(ps.var("v" + std::to_string(n)))));
    return out;
  }

  V fused() const { return pairwise_global_similarity(ps.var("logits"), cosines(), avail); }

  V per_pair(std::size_t t, std::size_t v) const {
    std::vector<V> tf, vf;
    for (std::size_t n = 0; n < N; ++n) {
      tf.push_back(slice_rows(ps.var("t" + std::to_string(n)), t, 1));
      vf.push_back(slice_rows(ps.var("v" + std::to_string(n)), v, 1));
    }
    return global_similarity(tf, vf, mixture_weights(slice_rows(ps.var("logits"), t, 1), avail[v]));
  }

  static constexpr std::size_t Tn = 3, Vn = 4, N = 3;
  ParameterSet<double> ps;
  std::vector<Avail> avail;
};

TEST(PairwiseGlobal, MatchesPerPairRoute) {
  PairwiseCase c(11);
  auto S = c.fused().value();
  for (std::size_t t = 0; t < c.Tn; ++t)
    for (std::size_t v = 0; v < c.Vn; ++v) EXPECT_NEAR(S(t, v), c.per_pair(t, v).item(), 1e-14);
}

TEST(PairwiseGlobal, ScalarOracle) {
  PairwiseCase c(12);
  auto S = c.fused().value();
  const auto& L = c.ps.at("logits").value();
  for (std::size_t t = 0; t < c.Tn; ++t)
    for (std::size_t v = 0; v < c.Vn; ++v) {
      double z = 0, s = 0;
      for (std::size_t n = 0; n < c.N; ++n)
        if (c.avail[v][n]) z += std::exp(L(t, n));
      for (std::size_t n = 0; n < c.N; ++n) {
        if (!c.avail[v][n]) continue;
        const auto& tf = c.ps.at("t" + std::to_string(n)).value();
        const auto& vf = c.ps.at("v" + std::to_string(n)).value();
        s += std::exp(L(t, n)) / z * cosine(tf.row_span(t), vf.row_span(v));
      }
      EXPECT_NEAR(S(t, v), s, 1e-13);
    }
}

TEST(PairwiseGlobal, GradientsMatchPerPairRoute) {
  PairwiseCase c(13);
  Rng rng = derive_rng(14, {});
  const auto probe = random_matrix(c.Tn, c.Vn, rng);
  c.ps.zero_grad();
  backward(sum(mul(c.fused(), constant(probe))));
  std::map<std::string, T> fused;
  for (auto& p : c.ps) fused.emplace(p->name(), p->grad());
  c.ps.zero_grad();
  std::vector<V> terms;
  for (std::size_t t = 0; t < c.Tn; ++t)
    for (std::size_t v = 0; v < c.Vn; ++v) terms.push_back(scale(c.per_pair(t, v), probe(t, v)));
  backward(sum(concat_cols(terms)));
  for (auto& p : c.ps)
    for (std::size_t i = 0; i < p->grad().size(); ++i)
      EXPECT_NEAR(fused.at(p->name())[i], p->grad()[i], 1e-13) << p->name();
}

TEST(PairwiseGlobal, GradientsMatchFiniteDifferences) {
  PairwiseCase c(15);
  Rng rng = derive_rng(16, {});
  const auto probe = random_matrix(c.Tn, c.Vn, rng);
  auto r = finite_difference_check([&]() -> V { return sum(mul(c.fused(), constant(probe))); }, c.ps);
  EXPECT_LT(r.max_error, 1e-7) << r.worst_parameter << "[" << r.worst_index << "]";
}

TEST(PairwiseGlobal, ShapeAndAvailabilityErrors) {
  PairwiseCase c(17);
  auto cos = c.cosines();
  auto bad = c.avail;
  bad[1] = {0, 0, 0};
  EXPECT_THROW(pairwise_global_similarity(c.ps.var("logits"), cos, bad), EmptyPoolError);
  bad = c.avail;
  bad[0] = {1, 1};
  EXPECT_THROW(pairwise_global_similarity(c.ps.var("logits"), cos, bad), ShapeError);
  cos.pop_back();
  EXPECT_THROW(pairwise_global_similarity(c.ps.var("logits"), cos, c.avail), ShapeError);
}

}  // namespace
}  // namespace t2v
