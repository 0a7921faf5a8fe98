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

#ifndef T2V_TENSOR_HPP
#define T2V_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "t2v/errors.hpp"

namespace t2v {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major array. Almost everything in the model is a matrix; vectors
/// are carried as 1xD rows so that every op can assume rank 2.
template <class Real>
class Tensor {
 public:
  using value_type = Real;

  Tensor() = default;

  explicit Tensor(Shape shape, Real fill = Real(0))
      : shape_(std::move(shape)), data_(shape_numel(shape_), fill) {}

  Tensor(Shape shape, std::vector<Real> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_numel(shape_) != data_.size()) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_str(shape_));
    }
  }

  static Tensor zeros(std::size_t rows, std::size_t cols) {
    return Tensor({rows, cols});
  }

  /// Builds a matrix from nested rows; all rows must have equal length.
  static Tensor from_rows(std::initializer_list<std::initializer_list<Real>> rows) {
    std::vector<Real> data;
    std::size_t cols = rows.size() ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols) throw ShapeError("ragged rows in Tensor::from_rows");
      data.insert(data.end(), r.begin(), r.end());
    }
    return Tensor({rows.size(), cols}, std::move(data));
  }

  static Tensor row(std::initializer_list<Real> values) {
    return Tensor({1, values.size()}, std::vector<Real>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::size_t rows() const {
    require_rank2("rows");
    return shape_[0];
  }
  std::size_t cols() const {
    require_rank2("cols");
    return shape_[1];
  }

  Real& operator[](std::size_t i) { return data_[i]; }
  const Real& operator[](std::size_t i) const { return data_[i]; }

  Real& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const Real& operator()(std::size_t r, std::size_t c) const {
    return data_[r * shape_[1] + c];
  }

  std::span<Real> row_span(std::size_t r) {
    return {data_.data() + r * shape_[1], shape_[1]};
  }
  std::span<const Real> row_span(std::size_t r) const {
    return {data_.data() + r * shape_[1], shape_[1]};
  }

  std::span<Real> values() { return data_; }
  std::span<const Real> values() const { return data_; }
  const std::vector<Real>& data() const { return data_; }
  std::vector<Real>& data() { return data_; }

  void fill(Real v) { std::fill(data_.begin(), data_.end(), v); }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(),
                       [](Real v) { return std::isfinite(v); });
  }

  Tensor reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size()) {
      throw ShapeError("cannot reshape " + shape_str(shape_) + " to " +
                       shape_str(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <class Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, std::vector<Other>(data_.begin(), data_.end()));
  }

  Tensor& operator+=(const Tensor& other) {
    require_same_shape(other, "+=");
    for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
    return *this;
  }

  friend bool operator==(const Tensor& a, const Tensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

  void require_rank2(const char* what) const {
    if (shape_.size() != 2) {
      throw ShapeError(std::string(what) + ": expected a 2-D tensor, got " +
                       shape_str(shape_));
    }
  }

  void require_same_shape(const Tensor& other, const char* what) const {
    if (shape_ != other.shape_) {
      throw ShapeError(std::string(what) + ": shape mismatch " + shape_str(shape_) +
                       " vs " + shape_str(other.shape_));
    }
  }

 private:
  Shape shape_;
  std::vector<Real> data_;
};

/// out += a * b  (a: R x K, b: K x C)
template <class Real>
void gemm_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out) {
  const std::size_t R = a.rows(), K = a.cols(), C = b.cols();
  for (std::size_t i = 0; i < R; ++i) {
    Real* o = out.data().data() + i * C;
    for (std::size_t k = 0; k < K; ++k) {
      const Real av = a(i, k);
      if (av == Real(0)) continue;
      const Real* br = b.data().data() + k * C;
      for (std::size_t j = 0; j < C; ++j) o[j] += av * br[j];
    }
  }
}

/// out += a * b^T  (a: R x K, b: C x K)
template <class Real>
void gemm_nt_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out) {
  const std::size_t R = a.rows(), K = a.cols(), C = b.rows();
  for (std::size_t i = 0; i < R; ++i) {
    const Real* ar = a.data().data() + i * K;
    for (std::size_t j = 0; j < C; ++j) {
      const Real* br = b.data().data() + j * K;
      Real s = 0;
      for (std::size_t k = 0; k < K; ++k) s += ar[k] * br[k];
      out(i, j) += s;
    }
  }
}

/// out += a^T * b  (a: K x R, b: K x C)
template <class Real>
void gemm_tn_acc(const Tensor<Real>& a, const Tensor<Real>& b, Tensor<Real>& out) {
  const std::size_t K = a.rows(), R = a.cols(), C = b.cols();
  for (std::size_t k = 0; k < K; ++k) {
    const Real* ar = a.data().data() + k * R;
    const Real* br = b.data().data() + k * C;
    for (std::size_t i = 0; i < R; ++i) {
      const Real av = ar[i];
      if (av == Real(0)) continue;
      Real* o = out.data().data() + i * C;
      for (std::size_t j = 0; j < C; ++j) o[j] += av * br[j];
    }
  }
}

}  // namespace t2v

#endif  // T2V_TENSOR_HPP
