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

#ifndef T2V_GRAPH_HPP
#define T2V_GRAPH_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "t2v/errors.hpp"
#include "t2v/tensor.hpp"

namespace t2v {

/// One vertex of the dynamic computation graph. Values are immutable once an
/// op has produced them; gradients are allocated on first use.
template <class Real>
struct Node {
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  Tensor<Real> value;
  Tensor<Real> grad;
  bool requires_grad = false;
  bool is_leaf = true;
  /// Reads `grad` of this node and accumulates into the inputs' gradients.
  std::function<void(Node&)> backward_fn;

  Tensor<Real>& grad_buffer() {
    if (grad.shape() != value.shape()) grad = Tensor<Real>(value.shape());
    return grad;
  }
};

/// Shared handle to a graph node.
template <class Real>
class Var {
 public:
  using NodePtr = std::shared_ptr<Node<Real>>;

  Var() = default;
  explicit Var(NodePtr node) : node_(std::move(node)) {}

  const Tensor<Real>& value() const { return node_->value; }
  const Tensor<Real>& grad() const { return node_->grad; }
  const Shape& shape() const { return node_->value.shape(); }
  std::size_t rows() const { return node_->value.rows(); }
  std::size_t cols() const { return node_->value.cols(); }
  bool requires_grad() const { return node_->requires_grad; }
  const std::string& op() const { return node_->op; }

  Real item() const {
    if (node_->value.size() != 1) {
      throw ContractError("item() on non-scalar tensor " +
                          shape_str(node_->value.shape()));
    }
    return node_->value[0];
  }

  const NodePtr& node() const { return node_; }
  explicit operator bool() const { return static_cast<bool>(node_); }

 private:
  NodePtr node_;
};

template <class Real>
Var<Real> constant(Tensor<Real> value) {
  auto n = std::make_shared<Node<Real>>();
  n->op = "constant";
  n->value = std::move(value);
  return Var<Real>(std::move(n));
}

namespace detail {
inline bool& grad_mode() {
  thread_local bool enabled = true;
  return enabled;
}
}  // namespace detail

/// Disables graph recording on this thread for its lifetime; ops then produce
/// value-only nodes. Used for evaluation passes.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_mode()) { detail::grad_mode() = false; }
  ~NoGradGuard() { detail::grad_mode() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// Creates an interior node. `backward` may be empty for ops that never need a
/// gradient; it is only attached when some input requires one.
template <class Real>
Var<Real> make_node(std::string op, std::vector<Var<Real>> inputs, Tensor<Real> value,
                    std::function<void(Node<Real>&)> backward) {
#if defined(T2V_CHECK_FINITE) || !defined(NDEBUG)
  if (!value.all_finite()) {
    throw NumericalError("non-finite output from op '" + op + "'");
  }
#endif
  auto n = std::make_shared<Node<Real>>();
  n->op = std::move(op);
  n->is_leaf = false;
  n->value = std::move(value);
  if (!detail::grad_mode()) return Var<Real>(std::move(n));
  for (auto& v : inputs) {
    n->requires_grad = n->requires_grad || v.requires_grad();
    n->inputs.push_back(v.node());
  }
  if (n->requires_grad) n->backward_fn = std::move(backward);
  return Var<Real>(std::move(n));
}

/// A named, persistent leaf of the graph. The leaf's gradient buffer is the
/// accumulator: backward adds to it and only zero_grad clears it.
template <class Real>
class Parameter {
 public:
  Parameter(std::string name, Tensor<Real> value, bool trainable = true)
      : name_(std::move(name)), node_(std::make_shared<Node<Real>>()) {
    node_->op = "parameter";
    node_->value = std::move(value);
    node_->requires_grad = trainable;
    node_->grad = Tensor<Real>(node_->value.shape());
  }

  const std::string& name() const { return name_; }
  bool trainable() const { return node_->requires_grad; }
  Var<Real> var() const { return Var<Real>(node_); }

  Tensor<Real>& value() { return node_->value; }
  const Tensor<Real>& value() const { return node_->value; }
  Tensor<Real>& grad() { return node_->grad_buffer(); }
  const Tensor<Real>& grad() const { return node_->grad; }

  void zero_grad() { node_->grad = Tensor<Real>(node_->value.shape()); }

 private:
  std::string name_;
  std::shared_ptr<Node<Real>> node_;
};

/// Ordered, name-unique collection of parameters.
template <class Real>
class ParameterSet {
 public:
  Parameter<Real>& add(std::string name, Tensor<Real> value, bool trainable = true) {
    if (index_.count(name)) throw ConfigError("duplicate parameter name: " + name);
    index_[name] = params_.size();
    params_.push_back(std::make_unique<Parameter<Real>>(std::move(name), std::move(value),
                                                        trainable));
    return *params_.back();
  }

  Parameter<Real>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return *params_[it->second];
  }
  const Parameter<Real>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter: " + name);
    return *params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  Var<Real> var(const std::string& name) const { return at(name).var(); }

  std::size_t size() const { return params_.size(); }
  Parameter<Real>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<Real>& operator[](std::size_t i) const { return *params_[i]; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad() {
    for (auto& p : params_) p->zero_grad();
  }

  std::size_t num_values() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value().size();
    return n;
  }

 private:
  std::vector<std::unique_ptr<Parameter<Real>>> params_;
  std::map<std::string, std::size_t> index_;
};

/// Reverse-mode sweep from a scalar loss. Interior gradients are rebuilt on
/// every call; parameter (leaf) gradients accumulate.
template <class Real>
void backward(const Var<Real>& loss) {
  if (loss.value().size() != 1) {
    throw ContractError("backward requires a scalar loss, got shape " +
                        shape_str(loss.shape()));
  }
  std::vector<Node<Real>*> order;
  std::unordered_set<Node<Real>*> seen;
  // Iterative post-order DFS.
  std::vector<std::pair<Node<Real>*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  seen.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node<Real>* child = node->inputs[next++].get();
      if (child->requires_grad && seen.insert(child).second) stack.emplace_back(child, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node<Real>* n : order) {
    if (!n->is_leaf) n->grad = Tensor<Real>(n->value.shape());
  }
  loss.node()->grad_buffer()[0] += Real(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<Real>* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

}  // namespace t2v

#endif  // T2V_GRAPH_HPP
