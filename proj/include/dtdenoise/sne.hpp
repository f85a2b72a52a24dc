// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "dtdenoise/cadt.hpp"
#include "dtdenoise/errors.hpp"
#include "dtdenoise/init.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/param_store.hpp"

// Secondary noise extractor. The stage-1 denoised batch is viewed as
// N x C x (H*W): each channel is normalized over its spatial values, a
// per-channel affine rescales the normalized features, and a small MLP
// mixes information across channels at every spatial position. The result
// is a residual noise estimate with the input's shape.

namespace dtd {

template <typename T>
struct SneParams {
  LnParams<T> ln;
  MlpParams<T> mlp;
};

/// Registers "sne.ln.*" and "sne.mlp.*". The second MLP layer starts at
/// zero so a fresh extractor predicts zero noise.
template <typename T>
SneParams<T> make_sne_params(ParamStore<T>& store, i64 channels, int hidden_ratio, Rng& rng) {
  if (channels < 1) throw ConfigError("sne: channels must be >= 1");
  if (hidden_ratio < 1) throw ConfigError("sne: hidden ratio must be >= 1");
  const i64 hidden = hidden_ratio * channels;
  SneParams<T> p;
  p.ln = make_ln_params(store, "sne.ln", channels);
  p.mlp.w1 = param_linear<T>(store, "sne.mlp.w1", channels, hidden, rng);
  p.mlp.b1 = param_const<T>(store, "sne.mlp.b1", {hidden}, T(0));
  p.mlp.w2 = param_const<T>(store, "sne.mlp.w2", {hidden, channels}, T(0));
  p.mlp.b2 = param_const<T>(store, "sne.mlp.b2", {channels}, T(0));
  return p;
}

template <typename T>
Var<T> sne_forward(const Var<T>& x, const SneParams<T>& p) {
  if (!x || x->value.rank() != 4) throw ShapeError("sne: input must be (N,H,W,C)");
  const i64 N = x->value.dim(0), H = x->value.dim(1), W = x->value.dim(2), C = x->value.dim(3);
  if (H * W < 1) throw ShapeError("sne: empty spatial extent");
  Var<T> flat = reshape(x, {N, H * W, C});
  Var<T> normed = layer_norm(flat, 1, Var<T>(), Var<T>());
  Var<T> scaled = affine_axis(normed, p.ln.gain, p.ln.shift, 2);
  Var<T> mixed = mlp(scaled, p.mlp);
  return reshape(mixed, {N, H, W, C});
}

}  // namespace dtd
