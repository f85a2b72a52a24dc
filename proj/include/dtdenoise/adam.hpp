// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>
#include <unordered_map>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/param_store.hpp"
#include "dtdenoise/tensor.hpp"

namespace dtd {

template <typename T>
struct AdamConfig {
  T learning_rate = T(1e-3);
  T weight_decay = T(0);
  T beta1 = T(0.9);
  T beta2 = T(0.999);
  T epsilon = T(1e-8);
};

/// First and second moment estimates, one pair per parameter. Weight decay
/// is decoupled: value <- value - lr*wd*value happens before the moment
/// update, so zero gradients with nonzero decay still shrink parameters.
template <typename T>
class AdamState {
 public:
  void step(ParamStore<T>& params, const AdamConfig<T>& cfg) {
    if (!(cfg.learning_rate > T(0))) throw ConfigError("adam: learning_rate must be positive");
    if (cfg.weight_decay < T(0)) throw ConfigError("adam: weight_decay must be non-negative");
    params.bump_step();
    const i64 t = params.step_count();
    const T bc1 = T(1) - std::pow(cfg.beta1, T(t));
    const T bc2 = T(1) - std::pow(cfg.beta2, T(t));
    for (const auto& e : params.entries()) {
      if (!e.var->grad.defined()) throw StateError("adam: missing gradient for " + e.name);
      auto& slot = moments_[e.name];
      if (!slot.m.defined()) {
        slot.m = Tensor<T>(e.var->value.shape());
        slot.v = Tensor<T>(e.var->value.shape());
      }
      T* val = e.var->value.data();
      const T* g = e.var->grad.data();
      T* m = slot.m.data();
      T* v = slot.v.data();
      const i64 n = e.var->value.size();
      for (i64 i = 0; i < n; ++i) {
        val[i] -= cfg.learning_rate * cfg.weight_decay * val[i];
        m[i] = cfg.beta1 * m[i] + (T(1) - cfg.beta1) * g[i];
        v[i] = cfg.beta2 * v[i] + (T(1) - cfg.beta2) * g[i] * g[i];
        const T mhat = m[i] / bc1;
        const T vhat = v[i] / bc2;
        val[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
      }
    }
  }

  bool has(const std::string& name) const { return moments_.count(name) != 0; }

  const Tensor<T>& first_moment(const std::string& name) const { return at(name).m; }
  const Tensor<T>& second_moment(const std::string& name) const { return at(name).v; }

  /// Installs externally restored moments (checkpoint resume).
  void set_moments(const std::string& name, Tensor<T> m, Tensor<T> v) {
    moments_[name] = {std::move(m), std::move(v)};
  }

 private:
  struct Slot {
    Tensor<T> m, v;
  };
  const Slot& at(const std::string& name) const {
    auto it = moments_.find(name);
    if (it == moments_.end()) throw StateError("adam: no moments for " + name);
    return it->second;
  }
  std::unordered_map<std::string, Slot> moments_;
};

/// One Adam update over every parameter in the store.
template <typename T>
void adam_step(ParamStore<T>& params, AdamState<T>& state, const AdamConfig<T>& cfg) {
  state.step(params, cfg);
}

}  // namespace dtd
