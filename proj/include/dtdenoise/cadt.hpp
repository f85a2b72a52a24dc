// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "dtdenoise/attention.hpp"
#include "dtdenoise/conv.hpp"
#include "dtdenoise/errors.hpp"
#include "dtdenoise/init.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/param_store.hpp"

// Context-aware denoise transformer. Each unit fuses a global branch
// (windowed multi-head self-attention with the usual pre-norm residual
// pairing) and a local branch (a small deformable-convolution pyramid) by
// addition. Units are chained inside groups; an additive residual wraps
// each group; a head conv embeds image channels into the feature width and
// a tail conv maps features back to image channels, producing a noise
// estimate the caller subtracts from its input.

namespace dtd {

struct StackConfig {
  int groups = 3;
  int units = 6;
  int channels = 60;   // feature width C (token embedding size)
  int window = 8;      // attention window edge
  int heads = 6;
  bool enable_global = true;
  bool enable_local = true;
};

inline void validate(const StackConfig& cfg) {
  if (cfg.groups < 1) throw ConfigError("stack: groups must be >= 1");
  if (cfg.units < 1) throw ConfigError("stack: units per group must be >= 1");
  if (cfg.channels < 1) throw ConfigError("stack: channels must be >= 1");
  if (cfg.window < 1) throw ConfigError("stack: window must be >= 1");
  if (cfg.heads < 1) throw ConfigError("stack: heads must be >= 1");
  if (cfg.channels % cfg.heads != 0) {
    throw ConfigError("stack: channels " + std::to_string(cfg.channels) +
                      " not divisible by heads " + std::to_string(cfg.heads));
  }
  if (!cfg.enable_global && !cfg.enable_local) {
    throw ConfigError("stack: at least one of the global/local branches must be enabled");
  }
  if (cfg.enable_local && cfg.channels < 8) {
    throw ConfigError("stack: local branch needs channels >= 8, got " +
                      std::to_string(cfg.channels));
  }
}

template <typename T>
struct LnParams {
  Var<T> gain, shift;
};

template <typename T>
struct ConvParams {
  Var<T> w, b;
};

template <typename T>
struct EncoderParams {
  LnParams<T> ln1, ln2;
  MsaParams<T> msa;
  MlpParams<T> mlp;
};

template <typename T>
struct LfeParams {
  LnParams<T> ln;
  ConvParams<T> reduce;   // C    -> C/8, linear
  ConvParams<T> local;    // C/8  -> C/4, LeakyReLU
  ConvParams<T> deform1;  // C/4  -> C/4, deformable + LeakyReLU
  ConvParams<T> off1;     // offset predictor for deform1
  ConvParams<T> deform2;  // C/4  -> C/2, deformable + LeakyReLU
  ConvParams<T> off2;     // offset predictor for deform2
  ConvParams<T> expand;   // C/2  -> C, linear
};

template <typename T>
struct UnitParams {
  EncoderParams<T> enc;
  LfeParams<T> lfe;
  bool enable_global = true;
  bool enable_local = true;
};

template <typename T>
struct StackParams {
  ConvParams<T> head, tail;
  std::vector<std::vector<UnitParams<T>>> units;  // [group][unit]
  StackConfig cfg;
};

// ---------------------------------------------------------------------------
// Construction. Offset predictors and the tail conv start at zero so a fresh
// stack computes a zero noise estimate and the deformable taps sit exactly on
// the regular grid.

template <typename T>
LnParams<T> make_ln_params(ParamStore<T>& store, const std::string& prefix, i64 C) {
  LnParams<T> p;
  p.gain = param_const<T>(store, prefix + ".gain", {C}, T(1));
  p.shift = param_const<T>(store, prefix + ".shift", {C}, T(0));
  return p;
}

template <typename T>
ConvParams<T> make_conv_params(ParamStore<T>& store, const std::string& prefix, i64 k, i64 cin,
                               i64 cout, Rng& rng, bool zero = false) {
  ConvParams<T> p;
  if (zero) {
    p.w = param_const<T>(store, prefix + ".w", {k, k, cin, cout}, T(0));
  } else {
    p.w = param_conv<T>(store, prefix + ".w", k, k, cin, cout, rng);
  }
  p.b = param_const<T>(store, prefix + ".b", {cout}, T(0));
  return p;
}

template <typename T>
EncoderParams<T> make_encoder_params(ParamStore<T>& store, const std::string& prefix, i64 C,
                                     int window, int heads, Rng& rng) {
  EncoderParams<T> p;
  p.ln1 = make_ln_params(store, prefix + ".ln1", C);
  p.msa.wq = param_linear<T>(store, prefix + ".msa.wq", C, C, rng);
  p.msa.bq = param_const<T>(store, prefix + ".msa.bq", {C}, T(0));
  p.msa.wk = param_linear<T>(store, prefix + ".msa.wk", C, C, rng);
  p.msa.bk = param_const<T>(store, prefix + ".msa.bk", {C}, T(0));
  p.msa.wv = param_linear<T>(store, prefix + ".msa.wv", C, C, rng);
  p.msa.bv = param_const<T>(store, prefix + ".msa.bv", {C}, T(0));
  p.msa.wo = param_linear<T>(store, prefix + ".msa.wo", C, C, rng);
  p.msa.bo = param_const<T>(store, prefix + ".msa.bo", {C}, T(0));
  const i64 span = 2 * window - 1;
  p.msa.bias_table =
      param_const<T>(store, prefix + ".msa.bias_table", {span * span, heads}, T(0));
  p.ln2 = make_ln_params(store, prefix + ".ln2", C);
  p.mlp.w1 = param_linear<T>(store, prefix + ".mlp.w1", C, 2 * C, rng);
  p.mlp.b1 = param_const<T>(store, prefix + ".mlp.b1", {2 * C}, T(0));
  p.mlp.w2 = param_linear<T>(store, prefix + ".mlp.w2", 2 * C, C, rng);
  p.mlp.b2 = param_const<T>(store, prefix + ".mlp.b2", {C}, T(0));
  return p;
}

template <typename T>
LfeParams<T> make_lfe_params(ParamStore<T>& store, const std::string& prefix, i64 C, Rng& rng) {
  const i64 c8 = C / 8, c4 = C / 4, c2 = C / 2;
  LfeParams<T> p;
  p.ln = make_ln_params(store, prefix + ".ln", C);
  p.reduce = make_conv_params(store, prefix + ".reduce", 3, C, c8, rng);
  p.local = make_conv_params(store, prefix + ".local", 3, c8, c4, rng);
  p.deform1 = make_conv_params(store, prefix + ".deform1", 3, c4, c4, rng);
  p.off1 = make_conv_params(store, prefix + ".off1", 3, c4, 18, rng, /*zero=*/true);
  p.deform2 = make_conv_params(store, prefix + ".deform2", 3, c4, c2, rng);
  p.off2 = make_conv_params(store, prefix + ".off2", 3, c4, 18, rng, /*zero=*/true);
  p.expand = make_conv_params(store, prefix + ".expand", 3, c2, C, rng);
  return p;
}

template <typename T>
UnitParams<T> make_unit_params(ParamStore<T>& store, const std::string& prefix,
                               const StackConfig& cfg, Rng& rng) {
  UnitParams<T> p;
  p.enable_global = cfg.enable_global;
  p.enable_local = cfg.enable_local;
  if (cfg.enable_global) {
    p.enc = make_encoder_params<T>(store, prefix + ".enc", cfg.channels, cfg.window, cfg.heads, rng);
  }
  if (cfg.enable_local) {
    p.lfe = make_lfe_params<T>(store, prefix + ".lfe", cfg.channels, rng);
  }
  return p;
}

template <typename T>
StackParams<T> make_stack_params(ParamStore<T>& store, const StackConfig& cfg, i64 img_channels,
                                 Rng& rng, const std::string& prefix = "") {
  validate(cfg);
  if (img_channels < 1) throw ConfigError("stack: image channels must be >= 1");
  StackParams<T> p;
  p.cfg = cfg;
  p.head = make_conv_params(store, prefix + "head", 3, img_channels, cfg.channels, rng);
  p.units.resize(static_cast<std::size_t>(cfg.groups));
  for (int g = 0; g < cfg.groups; ++g) {
    for (int u = 0; u < cfg.units; ++u) {
      const std::string name =
          prefix + "group" + std::to_string(g) + ".unit" + std::to_string(u);
      p.units[static_cast<std::size_t>(g)].push_back(make_unit_params<T>(store, name, cfg, rng));
    }
  }
  p.tail = make_conv_params(store, prefix + "tail", 3, cfg.channels, img_channels, rng,
                            /*zero=*/true);
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes. Inputs are (N, H, W, C) feature maps.

template <typename T>
Var<T> encoder_forward(const Var<T>& x, const EncoderParams<T>& p, int window, int heads) {
  Var<T> a = window_msa(layer_norm(x, 3, p.ln1.gain, p.ln1.shift), p.msa, window, heads);
  Var<T> e1 = add(x, a);
  Var<T> m = mlp(layer_norm(e1, 3, p.ln2.gain, p.ln2.shift), p.mlp);
  return add(e1, m);
}

/// Forward-value taps for the local branch, filled when requested.
template <typename T>
struct LfeTrace {
  Tensor<T> f_reduction, f_local, f_expansion;
};

template <typename T>
Var<T> lfe_forward(const Var<T>& x, const LfeParams<T>& p, LfeTrace<T>* trace = nullptr) {
  Var<T> n = layer_norm(x, 3, p.ln.gain, p.ln.shift);
  Var<T> r = conv2d(n, p.reduce.w, p.reduce.b);
  if (trace) trace->f_reduction = r->value;
  Var<T> l = leaky_relu(conv2d(r, p.local.w, p.local.b));
  Var<T> d1 = leaky_relu(
      deformable_conv2d(l, p.deform1.w, p.deform1.b, conv2d(l, p.off1.w, p.off1.b)));
  Var<T> d2 = leaky_relu(
      deformable_conv2d(d1, p.deform2.w, p.deform2.b, conv2d(d1, p.off2.w, p.off2.b)));
  if (trace) trace->f_local = d2->value;
  Var<T> e = conv2d(d2, p.expand.w, p.expand.b);
  if (trace) trace->f_expansion = e->value;
  return e;
}

template <typename T>
Var<T> cadt_forward(const Var<T>& x, const UnitParams<T>& p, int window, int heads) {
  if (p.enable_global && p.enable_local) {
    return add(encoder_forward(x, p.enc, window, heads), lfe_forward(x, p.lfe));
  }
  if (p.enable_global) return encoder_forward(x, p.enc, window, heads);
  if (p.enable_local) return lfe_forward(x, p.lfe);
  throw ConfigError("cadt: both branches disabled");
}

template <typename T>
Var<T> stack_forward(const Var<T>& blind, const StackParams<T>& p) {
  Var<T> f = conv2d(blind, p.head.w, p.head.b);
  for (const auto& group : p.units) {
    Var<T> group_in = f;
    for (const auto& unit : group) {
      f = cadt_forward(f, unit, p.cfg.window, p.cfg.heads);
    }
    f = add(f, group_in);
  }
  return conv2d(f, p.tail.w, p.tail.b);
}

}  // namespace dtd
