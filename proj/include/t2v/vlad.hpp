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

#ifndef T2V_VLAD_HPP
#define T2V_VLAD_HPP

#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "t2v/layers.hpp"
#include "t2v/ops.hpp"

namespace t2v {

/// Soft-assignment VLAD with a background center.
///
/// There are K+1 centers. Each local feature z_i is softly assigned with
///   a_ij = softmax_j(z_i . c_j + b_j)      over all K+1 centers
/// and center j aggregates the residuals against a separate anchor c'_j:
///   g_j = l2normalize( sum_i a_ij (z_i - c'_j) ),   j = 1..K.
/// The last (background) center takes part in the softmax but its aggregate
/// is never exposed. Text and video run the identical code path; sharing the
/// same SharedCenters between them is what aligns the two descriptors.
template <class Real>
struct SharedCenters {
  Var<Real> centers;  // (K+1) x C, assignment centers c
  Var<Real> anchors;  // (K+1) x C, residual anchors c'
  Var<Real> bias;     // 1 x (K+1)

  std::size_t num_semantic() const { return centers.rows() - 1; }
  std::size_t dim() const { return centers.cols(); }
};

/// K per-center normalized residual vectors.
template <class Real>
struct VladDescriptor {
  Var<Real> vectors;  // K x C

  std::size_t num_centers() const { return vectors.rows(); }
  std::size_t dim() const { return vectors.cols(); }
};

template <class Real>
void add_centers(ParameterSet<Real>& ps, const std::string& prefix, std::size_t semantic,
                 std::size_t dim, Rng& rng) {
  const double stddev = 1.0 / std::sqrt(double(dim));
  ps.add(prefix + "/centers", normal_tensor<Real>({semantic + 1, dim}, stddev, rng));
  ps.add(prefix + "/anchors", normal_tensor<Real>({semantic + 1, dim}, stddev, rng));
  ps.add(prefix + "/bias", Tensor<Real>({1, semantic + 1}));
}

template <class Real>
SharedCenters<Real> centers_from(const ParameterSet<Real>& ps, const std::string& prefix) {
  return {ps.var(prefix + "/centers"), ps.var(prefix + "/anchors"), ps.var(prefix + "/bias")};
}

namespace detail {
template <class Real>
void check_vlad_inputs(const Var<Real>& tokens, const Mask& mask, const SharedCenters<Real>& c) {
  if (tokens.cols() != c.dim())
    throw ConfigError("token width " + std::to_string(tokens.cols()) + " does not match center width " +
                      std::to_string(c.dim()));
  if (mask.size() != tokens.rows()) throw ShapeError("assignment mask does not match token count");
  if (c.anchors.shape() != c.centers.shape() || c.bias.value().size() != c.centers.rows())
    throw ConfigError("inconsistent center/anchor/bias shapes");
}
}  // namespace detail

/// Soft assignment of every token to all K+1 centers; masked rows are zero.
template <class Real>
Var<Real> assign(const Var<Real>& tokens, const Mask& mask, const SharedCenters<Real>& c) {
  detail::check_vlad_inputs(tokens, mask, c);
  auto logits = add_row(matmul_nt(tokens, c.centers), c.bias);
  return mask_rows(softmax_rows(logits), mask);
}

template <class Real>
VladDescriptor<Real> aggregate(const Var<Real>& tokens, const Mask& mask,
                               const SharedCenters<Real>& c) {
  detail::check_vlad_inputs(tokens, mask, c);
  if (mask_count(mask) == 0) throw EmptyPoolError("VLAD aggregation over zero unmasked tokens");
  auto a = assign(tokens, mask, c);                  // M x (K+1)
  auto weighted = matmul_tn(a, tokens);              // (K+1) x C : sum_i a_ij z_i
  auto mass = sum_rows(a);                           // 1 x (K+1) : sum_i a_ij
  auto residual = sub(weighted, scale_rows(c.anchors, mass));
  auto semantic = slice_rows(residual, 0, c.num_semantic());
  return {l2_normalize_rows(semantic)};
}

/// Descriptor flattened to 1 x (K*C) and normalized as a whole.
template <class Real>
Var<Real> flatten_normalized(const VladDescriptor<Real>& d) {
  return l2_normalize_rows(reshape(d.vectors, {1, d.vectors.value().size()}));
}

/// Cosine similarity of the flattened descriptors; 0 when either is all zero.
template <class Real>
Var<Real> local_similarity(const VladDescriptor<Real>& video, const VladDescriptor<Real>& text) {
  if (video.vectors.shape() != text.vectors.shape())
    throw ShapeError("descriptor shapes differ: " + shape_str(video.vectors.shape()) + " vs " +
                     shape_str(text.vectors.shape()));
  return sum(mul(flatten_normalized(video), flatten_normalized(text)));
}

struct AssignmentRow {
  std::string label;
  std::size_t center = 0;
  double weight = 0.0;
};

/// One row per (unmasked token, center), centers 0..K where K is background.
template <class Real>
std::vector<AssignmentRow> export_assignments(const Var<Real>& tokens, const Mask& mask,
                                              const SharedCenters<Real>& c,
                                              const std::vector<std::string>& labels) {
  if (labels.size() != tokens.rows()) throw ShapeError("one label per token is required");
  const auto a = assign(tokens, mask, c);
  std::vector<AssignmentRow> rows;
  for (std::size_t i = 0; i < mask.size(); ++i) {
    if (!mask[i]) continue;
    for (std::size_t j = 0; j < a.cols(); ++j)
      rows.push_back({labels[i], j, static_cast<double>(a.value()(i, j))});
  }
  return rows;
}

namespace detail {
inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + '"';
}
}  // namespace detail

/// CSV with header `label,center,weight`; weights keep full double precision.
inline void write_assignments_csv(std::ostream& os, const std::vector<AssignmentRow>& rows) {
  os << "label,center,weight\n";
  std::ostringstream num;
  for (const auto& r : rows) {
    num.str("");
    num << std::setprecision(17) << r.weight;
    os << detail::csv_field(r.label) << ',' << r.center << ',' << num.str() << '\n';
  }
}

}  // namespace t2v

#endif  // T2V_VLAD_HPP
