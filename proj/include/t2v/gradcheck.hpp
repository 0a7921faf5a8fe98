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

#ifndef T2V_GRADCHECK_HPP
#define T2V_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "t2v/graph.hpp"

namespace t2v {

struct GradCheckResult {
  double max_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t entries_checked = 0;
};

/// Compares backward() against central differences for every entry of every
/// trainable parameter. Error per entry is |analytic - numeric| / max(1, |analytic|).
/// `build` must rebuild the graph from the current parameter values each call.
inline GradCheckResult finite_difference_check(
    const std::function<Var<double>()>& build, ParameterSet<double>& params, double h = 1e-5,
    const std::function<bool(const std::string&)>& include = {}) {
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw ContractError("finite_difference_check: step must lie in [1e-7, 1e-3]");
  }
  params.zero_grad();
  backward(build());
  GradCheckResult result;
  for (auto& p : params) {
    if (!p->trainable()) continue;
    if (include && !include(p->name())) continue;
    const Tensor<double> analytic = p->grad();
    auto& value = p->value();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double saved = value[i];
      value[i] = saved + h;
      const double up = build().item();
      value[i] = saved - h;
      const double down = build().item();
      value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
      ++result.entries_checked;
      if (err > result.max_error || result.worst_parameter.empty()) {
        if (err >= result.max_error) {
          result.max_error = err;
          result.worst_parameter = p->name();
          result.worst_index = i;
          result.analytic = analytic[i];
          result.numeric = numeric;
        }
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace t2v

#endif  // T2V_GRADCHECK_HPP
