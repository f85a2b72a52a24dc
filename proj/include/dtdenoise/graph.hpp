// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <memory>
#include <unordered_set>
#include <utility>
#include <vector>

#include "dtdenoise/tensor.hpp"

namespace dtd {

/// Reverse-mode tape node. Operations build a DAG of nodes whose
/// backward_fn reads the node's accumulated gradient and pushes
/// contributions into the parents' gradients.
template <typename T>
struct Node {
  Tensor<T> value;
  Tensor<T> grad;  // undefined until touched by backward()
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor<T>& ensure_grad() {
    if (!grad.defined()) grad = Tensor<T>(value.shape());
    return grad;
  }
};

template <typename T>
using Var = std::shared_ptr<Node<T>>;

/// Leaf variable (parameter or checked input).
template <typename T>
Var<T> make_var(Tensor<T> value, bool requires_grad = true) {
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

/// Leaf that never receives gradients (data, targets).
template <typename T>
Var<T> make_const(Tensor<T> value) {
  return make_var<T>(std::move(value), false);
}

template <typename T>
bool any_requires_grad(const std::vector<Var<T>>& vars) {
  for (const auto& v : vars) {
    if (v && v->requires_grad) return true;
  }
  return false;
}

/// Accumulate `g` into the gradient of `parent` if it participates in
/// differentiation. Shape of `g` must match the parent's value.
template <typename T>
void accumulate_grad(const Var<T>& parent, const Tensor<T>& g) {
  if (!parent || !parent->requires_grad) return;
  Tensor<T>& dst = parent->ensure_grad();
  const T* src = g.data();
  T* d = dst.data();
  for (i64 i = 0; i < dst.size(); ++i) d[i] += src[i];
}

/// Run reverse-mode differentiation from a scalar root. Gradients
/// accumulate into every reachable node with requires_grad set.
template <typename T>
void backward(const Var<T>& root) {
  if (!root) throw StateError("backward: null root");
  if (root->value.size() != 1) {
    throw ShapeError("backward expects a scalar root, got " + shape_str(root->value.shape()));
  }
  // Iterative DFS post-order; the reverse is a topological order with
  // every consumer visited before its inputs.
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p && p->requires_grad && !seen.count(p)) {
        seen.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad()[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* node = *it;
    if (node->backward_fn && node->requires_grad && node->grad.defined()) {
      node->backward_fn(*node);
    }
  }
}

}  // namespace dtd
