// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include "dtdenoise/graph.hpp"
#include "dtdenoise/param_store.hpp"
#include "dtdenoise/rng.hpp"
#include "dtdenoise/tensor.hpp"

// Parameter creation helpers. Every trainable tensor is registered in a
// ParamStore under a stable dotted name; creation order fixes the store
// order and therefore the checkpoint layout.

namespace dtd {

template <typename T>
Tensor<T> glorot_uniform(const Shape& shape, i64 fan_in, i64 fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor<T> t(shape);
  for (i64 i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-bound, bound));
  return t;
}

template <typename T>
Var<T> param(ParamStore<T>& store, const std::string& name, Tensor<T> value) {
  return store.add(name, std::move(value));
}

template <typename T>
Var<T> param_const(ParamStore<T>& store, const std::string& name, const Shape& shape, T value) {
  return param(store, name, Tensor<T>(shape, value));
}

/// Dense layer weight shaped (fan_in, fan_out).
template <typename T>
Var<T> param_linear(ParamStore<T>& store, const std::string& name, i64 fan_in, i64 fan_out,
                    Rng& rng) {
  return param(store, name, glorot_uniform<T>({fan_in, fan_out}, fan_in, fan_out, rng));
}

/// Conv kernel shaped (kh, kw, cin, cout) with receptive-field fan counts.
template <typename T>
Var<T> param_conv(ParamStore<T>& store, const std::string& name, i64 kh, i64 kw, i64 cin, i64 cout,
                  Rng& rng) {
  return param(store, name,
               glorot_uniform<T>({kh, kw, cin, cout}, kh * kw * cin, kh * kw * cout, rng));
}

}  // namespace dtd
