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

#ifndef T2V_ERRORS_HPP
#define T2V_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace t2v {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent hyperparameters or parameter/data dimensions.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A pooling or aggregation ran over zero unmasked rows.
class EmptyPoolError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent on-disk data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered in gradients or the loss.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Caller violated an API precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace t2v

#endif  // T2V_ERRORS_HPP
