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

#ifndef T2V_OPTIMIZER_HPP
#define T2V_OPTIMIZER_HPP

#include <cmath>
#include <map>
#include <string>

#include "t2v/graph.hpp"

namespace t2v {

struct RangerOptions {
  double beta1 = 0.95;
  double beta2 = 0.999;
  double eps = 1e-5;
  /// Length of the variance-rectification warmup: below this many effective
  /// samples the step falls back to plain momentum.
  double sma_threshold = 5.0;
  std::size_t lookahead_k = 6;  // 0 disables lookahead
  double lookahead_alpha = 0.5;
};

/// Rectified adaptive moments (RAdam) inside a lookahead wrapper, with
/// decoupled weight decay. Per parameter entry at step t:
///
///   theta -= lr * wd * theta
///   m = b1 m + (1-b1) g ;  v = b2 v + (1-b2) g^2
///   rho_inf = 2/(1-b2) - 1 ;  rho_t = rho_inf - 2 t b2^t / (1-b2^t)
///   if rho_t > threshold:
///     r = sqrt((1-b2^t) (rho_t-4)(rho_t-2) rho_inf / ((rho_inf-4)(rho_inf-2) rho_t)) / (1-b1^t)
///     theta -= lr * r * m / (sqrt(v) + eps)
///   else:
///     theta -= lr * m / (1-b1^t)
///
/// and every k steps: slow += alpha (theta - slow); theta = slow.
template <class Real>
class Ranger {
 public:
  struct Slot {
    Tensor<Real> m, v, slow;
  };

  explicit Ranger(RangerOptions opts = {}) : opts_(opts) {}

  const RangerOptions& options() const { return opts_; }
  std::uint64_t step_count() const { return step_; }
  void set_step_count(std::uint64_t s) { step_ = s; }
  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

  void step(ParameterSet<Real>& params, double lr, double weight_decay) {
    for (auto& p : params) {
      if (!p->trainable()) continue;
      for (Real g : p->grad().values())
        if (!std::isfinite(g)) throw NumericalError("non-finite gradient in parameter '" + p->name() + "'");
    }
    ++step_;
    const double t = static_cast<double>(step_);
    const double b1t = std::pow(opts_.beta1, t);
    const double b2t = std::pow(opts_.beta2, t);
    const double rho_inf = 2.0 / (1.0 - opts_.beta2) - 1.0;
    const double rho_t = rho_inf - 2.0 * t * b2t / (1.0 - b2t);
    const bool rectified = rho_t > opts_.sma_threshold;
    double step_size;
    if (rectified) {
      step_size = std::sqrt((1.0 - b2t) * (rho_t - 4.0) / (rho_inf - 4.0) * (rho_t - 2.0) / rho_t * rho_inf /
                            (rho_inf - 2.0)) /
                  (1.0 - b1t);
    } else {
      step_size = 1.0 / (1.0 - b1t);
    }
    const bool sync = opts_.lookahead_k > 0 && step_ % opts_.lookahead_k == 0;

    for (auto& p : params) {
      if (!p->trainable()) continue;
      auto& theta = p->value();
      const auto& grad = p->grad();
      auto [it, fresh] = slots_.try_emplace(p->name());
      Slot& s = it->second;
      if (fresh) {
        s.m = Tensor<Real>(theta.shape());
        s.v = Tensor<Real>(theta.shape());
        s.slow = theta;
      }
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i];
        double th = theta[i];
        if (weight_decay != 0.0) th -= lr * weight_decay * th;
        const double m = opts_.beta1 * s.m[i] + (1.0 - opts_.beta1) * g;
        const double v = opts_.beta2 * s.v[i] + (1.0 - opts_.beta2) * g * g;
        s.m[i] = static_cast<Real>(m);
        s.v[i] = static_cast<Real>(v);
        if (rectified) th -= lr * step_size * m / (std::sqrt(v) + opts_.eps);
        else th -= lr * step_size * m;
        if (sync) {
          const double slow = s.slow[i] + opts_.lookahead_alpha * (th - s.slow[i]);
          s.slow[i] = static_cast<Real>(slow);
          th = slow;
        }
        theta[i] = static_cast<Real>(th);
      }
    }
  }

 private:
  RangerOptions opts_;
  std::uint64_t step_ = 0;
  std::map<std::string, Slot> slots_;
};

/// init * decay^floor(epoch / every)
inline double lr_at_epoch(std::size_t epoch, double init, double decay = 0.9, std::size_t every = 5) {
  if (every == 0) return init;
  return init * std::pow(decay, static_cast<double>(epoch / every));
}

}  // namespace t2v

#endif  // T2V_OPTIMIZER_HPP
