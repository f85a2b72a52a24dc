// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/graph.hpp"
#include "dtdenoise/tensor.hpp"

namespace dtd {

template <typename T>
struct ParamEntry {
  std::string name;
  Var<T> var;
};

/// Named learnable parameters in a stable insertion order. The order is
/// the serialization order, so checkpoints are reproducible byte for byte.
template <typename T>
class ParamStore {
 public:
  Var<T> add(const std::string& name, Tensor<T> init) {
    if (index_.count(name)) throw StateError("parameter already registered: " + name);
    Var<T> v = make_var<T>(std::move(init), true);
    index_[name] = entries_.size();
    entries_.push_back({name, v});
    return v;
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Var<T> get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw StateError("unknown parameter: " + name);
    return entries_[it->second].var;
  }

  const std::vector<ParamEntry<T>>& entries() const { return entries_; }
  std::size_t count() const { return entries_.size(); }

  i64 total_size() const {
    i64 n = 0;
    for (const auto& e : entries_) n += e.var->value.size();
    return n;
  }

  /// Drops all gradient buffers; backward() lazily recreates them at zero.
  void zero_grads() {
    for (auto& e : entries_) e.var->grad = Tensor<T>();
  }

  i64 step_count() const { return step_count_; }
  void set_step_count(i64 s) { step_count_ = s; }
  void bump_step() { ++step_count_; }

 private:
  std::vector<ParamEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
  i64 step_count_ = 0;
};

}  // namespace dtd
