// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/graph.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/tensor.hpp"

// Central-finite-difference verification of backward passes. The op under
// test is wrapped in a closure that rebuilds its graph from the given leaf
// variables, is scalarized by summing all outputs, and each leaf entry is
// perturbed by +/-eps in place.

namespace dtd {

template <typename T>
struct GradCheckInput {
  std::string name;
  Var<T> var;
};

template <typename T>
struct GradReport {
  struct Entry {
    std::string name;
    T max_rel_err = T(0);
    bool flagged = false;
  };
  std::vector<Entry> entries;
  T worst = T(0);
  bool ok = true;
};

/// Compares analytic gradients of `forward` against central differences.
/// Relative error uses max(|analytic|, |numeric|, denom_floor) in the
/// denominator so near-zero gradients are judged on absolute error.
template <typename T>
GradReport<T> grad_check(const std::function<Var<T>()>& forward,
                         const std::vector<GradCheckInput<T>>& inputs, T eps = T(1e-3),
                         T tol = T(1e-4), T denom_floor = T(1e-3)) {
  auto scalarize = [&]() -> T {
    Var<T> y = forward();
    if (!all_finite(y->value)) throw NumericalError("grad_check: non-finite forward output");
    T acc = T(0);
    const T* p = y->value.data();
    for (i64 i = 0; i < y->value.size(); ++i) acc += p[i];
    return acc;
  };

  // Analytic pass.
  for (const auto& in : inputs) in.var->grad = Tensor<T>();
  Var<T> y = forward();
  if (!all_finite(y->value)) throw NumericalError("grad_check: non-finite forward output");
  backward(sum_all(y));
  std::vector<Tensor<T>> analytic;
  analytic.reserve(inputs.size());
  for (const auto& in : inputs) {
    analytic.push_back(in.var->grad.defined() ? in.var->grad.clone()
                                              : Tensor<T>(in.var->value.shape()));
    if (!all_finite(analytic.back())) throw NumericalError("grad_check: non-finite gradient");
  }

  GradReport<T> report;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    typename GradReport<T>::Entry entry;
    entry.name = inputs[k].name;
    T* data = inputs[k].var->value.data();
    const Tensor<T>& a = analytic[k];
    for (i64 i = 0; i < inputs[k].var->value.size(); ++i) {
      const T saved = data[i];
      data[i] = saved + eps;
      const T fp = scalarize();
      data[i] = saved - eps;
      const T fm = scalarize();
      data[i] = saved;
      const T numeric = (fp - fm) / (T(2) * eps);
      if (!std::isfinite(numeric)) throw NumericalError("grad_check: non-finite finite difference");
      T denom = std::abs(a[i]);
      if (std::abs(numeric) > denom) denom = std::abs(numeric);
      if (denom < denom_floor) denom = denom_floor;
      const T rel = std::abs(a[i] - numeric) / denom;
      if (rel > entry.max_rel_err) entry.max_rel_err = rel;
    }
    entry.flagged = entry.max_rel_err > tol;
    if (entry.flagged) report.ok = false;
    if (entry.max_rel_err > report.worst) report.worst = entry.max_rel_err;
    report.entries.push_back(entry);
  }
  return report;
}

}  // namespace dtd
