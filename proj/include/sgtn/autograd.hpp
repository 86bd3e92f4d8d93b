// Copyright 2026 The SGTN Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "sgtn/errors.hpp"
#include "sgtn/tensor.hpp"

namespace sgtn {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  Tensor<T> grad;  // allocated on first backward
  bool trainable = true;

  void zero_grad() {
    if (!grad.empty()) grad.fill(T{0});
  }
};

/// Owns every parameter of a model. Addresses are stable for the store's
/// lifetime; iteration order is creation order.
template <typename T>
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter<T>& create(std::string name, Tensor<T> init, bool trainable = true) {
    if (index_.count(name)) throw InvalidArgument("duplicate parameter name '" + name + "'");
    index_.emplace(name, params_.size());
    params_.push_back(Parameter<T>{std::move(name), std::move(init), {}, trainable});
    return params_.back();
  }

  Parameter<T>* find(std::string_view name) {
    auto it = index_.find(std::string(name));
    return it == index_.end() ? nullptr : &params_[it->second];
  }

  Parameter<T>& get(std::string_view name) {
    if (auto* p = find(name)) return *p;
    throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  }

  std::deque<Parameter<T>>& all() noexcept { return params_; }
  const std::deque<Parameter<T>>& all() const noexcept { return params_; }
  std::size_t count() const noexcept { return params_.size(); }

  std::size_t scalar_count(bool trainable_only = true) const {
    std::size_t n = 0;
    for (const auto& p : params_) {
      if (!trainable_only || p.trainable) n += p.value.size();
    }
    return n;
  }

  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::deque<Parameter<T>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

template <typename T>
class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
template <typename T>
class Var {
 public:
  Var() = default;
  Var(Graph<T>* g, int id) : g_(g), id_(id) {}

  bool valid() const noexcept { return g_ != nullptr; }
  Graph<T>& graph() const { return *g_; }
  int id() const noexcept { return id_; }

  const Tensor<T>& value() const;
  const Shape& shape() const { return value().shape(); }
  int dim(int axis) const { return value().dim(axis); }
  std::size_t size() const { return value().size(); }
  /// Gradient after backward(); empty when no gradient reached this node.
  const Tensor<T>& grad() const;
  T item() const { return value()[0]; }

 private:
  Graph<T>* g_ = nullptr;
  int id_ = -1;
};

enum class Phase { kTrain, kEval };

/// Reverse-mode tape. Operations append nodes in execution order, so the
/// reverse of insertion order is a valid topological order for backward().
template <typename T>
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor<T>& out_grad)>;

  explicit Graph(Phase phase = Phase::kTrain, bool record = true) : phase_(phase), record_(record) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Phase phase() const noexcept { return phase_; }
  bool training() const noexcept { return phase_ == Phase::kTrain; }
  bool recording() const noexcept { return record_; }

  Var<T> constant(Tensor<T> value) { return push("constant", std::move(value), false, {}); }

  /// Leaf that receives a gradient (used for input-gradient checks).
  Var<T> input(Tensor<T> value) { return push("input", std::move(value), record_, {}); }

  /// Leaf bound to a parameter. Repeated calls within one graph reuse the
  /// same node so gradients from every use accumulate.
  Var<T> param(Parameter<T>& p) {
    auto it = param_nodes_.find(&p);
    if (it != param_nodes_.end()) return Var<T>(this, it->second);
    Var<T> v = push("parameter", p.value, record_ && p.trainable, {});
    nodes_[static_cast<std::size_t>(v.id())].param = &p;
    param_nodes_.emplace(&p, v.id());
    return v;
  }

  /// Records an op result. `parents` decide whether a gradient is needed;
  /// `fn` is dropped when none of them requires one.
  Var<T> record(const char* op, Tensor<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record(op, std::move(value), std::vector<Var<T>>(parents), std::move(fn));
  }

  Var<T> record(const char* op, Tensor<T> value, const std::vector<Var<T>>& parents, BackwardFn fn) {
    bool needs = false;
    if (record_) {
      for (const auto& p : parents) needs = needs || requires_grad(p);
    }
    return push(op, std::move(value), needs, needs ? std::move(fn) : BackwardFn{});
  }

  bool requires_grad(const Var<T>& v) const { return node(v).requires_grad; }

  const Tensor<T>& value(const Var<T>& v) const { return node(v).value; }

  /// Gradient slot of `v`, zero-allocated on first access.
  Tensor<T>& grad_slot(const Var<T>& v) {
    Node& n = node(v);
    if (n.grad.empty() && !n.value.empty()) n.grad = Tensor<T>(n.value.shape());
    return n.grad;
  }

  const Tensor<T>& grad(const Var<T>& v) const { return node(v).grad; }

  /// Runs reverse accumulation from a scalar root and adds leaf gradients
  /// into their Parameter::grad.
  void backward(const Var<T>& root) {
    if (root.size() != 1) throw InvalidShape("backward() requires a scalar root, got " + shape_str(root.shape()));
    if (!requires_grad(root)) return;
    grad_slot(root)[0] = T{1};
    for (int id = root.id(); id >= 0; --id) {
      Node& n = nodes_[static_cast<std::size_t>(id)];
      if (!n.requires_grad || n.grad.empty() || !n.backward) continue;
      n.backward(*this, n.grad);
    }
    for (auto& [param, id] : param_nodes_) {
      const Node& n = nodes_[static_cast<std::size_t>(id)];
      if (n.grad.empty() || !param->trainable) continue;
      if (param->grad.empty()) param->grad = Tensor<T>(param->value.shape());
      for (std::size_t i = 0; i < n.grad.size(); ++i) param->grad[i] += n.grad[i];
    }
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    const char* op;
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad;
    BackwardFn backward;
    Parameter<T>* param = nullptr;
  };

  Var<T> push(const char* op, Tensor<T> value, bool needs_grad, BackwardFn fn) {
    if (!value.all_finite()) {
      throw NumericalError(std::string("non-finite value produced by '") + op + "' with shape " +
                           shape_str(value.shape()));
    }
    nodes_.push_back(Node{op, std::move(value), {}, needs_grad, std::move(fn)});
    return Var<T>(this, static_cast<int>(nodes_.size() - 1));
  }

  Node& node(const Var<T>& v) {
    if (v.valid() && &v.graph() != this) throw InvalidArgument("variable belongs to another graph");
    return nodes_.at(static_cast<std::size_t>(v.id()));
  }
  const Node& node(const Var<T>& v) const {
    if (v.valid() && &v.graph() != this) throw InvalidArgument("variable belongs to another graph");
    return nodes_.at(static_cast<std::size_t>(v.id()));
  }

  Phase phase_;
  bool record_;
  std::deque<Node> nodes_;
  std::map<Parameter<T>*, int> param_nodes_;
};

template <typename T>
const Tensor<T>& Var<T>::value() const {
  return g_->value(*this);
}

template <typename T>
const Tensor<T>& Var<T>::grad() const {
  return g_->grad(*this);
}

}  // namespace sgtn
