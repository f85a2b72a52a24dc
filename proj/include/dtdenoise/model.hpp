// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dtdenoise/cadt.hpp"
#include "dtdenoise/image.hpp"
#include "dtdenoise/jsonutil.hpp"
#include "dtdenoise/mask.hpp"
#include "dtdenoise/param_store.hpp"
#include "dtdenoise/sne.hpp"

// End-to-end denoiser. Stage 1 subtracts the stacked transformer's noise
// estimate from each blind image; stage 2 subtracts the secondary noise
// extractor's estimate from stage 1. Full-image inference wraps the
// two-stage core with Bayer packing (raw mode), pixel-shuffle
// downsampling, blind-spot masking, and the inverse assembly steps.

namespace dtd {

struct ModelConfig {
  StackConfig stack;
  bool enable_sne = true;
  int sne_ratio = 2;
  int mask_stride = 4;  // s
  int pd_factor = 1;    // p
  Colorspace colorspace = Colorspace::kGrey;
};

/// Channels entering the network: Bayer packing turns a raw mosaic into a
/// 4-channel quarter-size image; sRGB keeps 3 channels, greyscale 1.
inline i64 model_channels(const ModelConfig& cfg) {
  switch (cfg.colorspace) {
    case Colorspace::kSrgb: return 3;
    case Colorspace::kRawBayer: return 4;
    case Colorspace::kGrey: return 1;
  }
  return 1;
}

inline void validate(const ModelConfig& cfg) {
  validate(cfg.stack);
  if (cfg.mask_stride < 1) throw ConfigError("model: mask stride must be >= 1");
  if (cfg.pd_factor < 1) throw ConfigError("model: pd factor must be >= 1");
  if (cfg.sne_ratio < 1) throw ConfigError("model: sne ratio must be >= 1");
}

inline nlohmann::json model_config_json(const ModelConfig& cfg) {
  return {{"channels", cfg.stack.channels},
          {"groups", cfg.stack.groups},
          {"units", cfg.stack.units},
          {"window", cfg.stack.window},
          {"heads", cfg.stack.heads},
          {"enable_global", cfg.stack.enable_global},
          {"enable_local", cfg.stack.enable_local},
          {"enable_sne", cfg.enable_sne},
          {"sne_ratio", cfg.sne_ratio},
          {"mask_stride", cfg.mask_stride},
          {"pd_factor", cfg.pd_factor},
          {"colorspace", colorspace_name(cfg.colorspace)}};
}

/// Overlays the keys of `j` onto `base`, rejecting unknown keys. `prefix`
/// names the section in error messages ("model." for run configs).
inline ModelConfig parse_model_config(const nlohmann::json& j, const std::string& prefix,
                                      ModelConfig base) {
  detail::reject_unknown_keys(j, prefix,
                              {"channels", "groups", "units", "window", "heads", "enable_global",
                               "enable_local", "enable_sne", "sne_ratio", "mask_stride",
                               "pd_factor", "colorspace"});
  detail::get_int(j, prefix, "channels", base.stack.channels);
  detail::get_int(j, prefix, "groups", base.stack.groups);
  detail::get_int(j, prefix, "units", base.stack.units);
  detail::get_int(j, prefix, "window", base.stack.window);
  detail::get_int(j, prefix, "heads", base.stack.heads);
  detail::get_bool(j, prefix, "enable_global", base.stack.enable_global);
  detail::get_bool(j, prefix, "enable_local", base.stack.enable_local);
  detail::get_bool(j, prefix, "enable_sne", base.enable_sne);
  detail::get_int(j, prefix, "sne_ratio", base.sne_ratio);
  detail::get_int(j, prefix, "mask_stride", base.mask_stride);
  detail::get_int(j, prefix, "pd_factor", base.pd_factor);
  std::string cs = colorspace_name(base.colorspace);
  detail::get_string(j, prefix, "colorspace", cs);
  base.colorspace = parse_colorspace(cs);
  return base;
}

template <typename T>
class DenoiserModel {
 public:
  DenoiserModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
    validate(cfg_);
    Rng rng(init_seed);
    stack_ = make_stack_params<T>(store_, cfg_.stack, model_channels(cfg_), rng);
    if (cfg_.enable_sne) {
      sne_ = make_sne_params<T>(store_, model_channels(cfg_), cfg_.sne_ratio, rng);
    }
  }

  const ModelConfig& config() const { return cfg_; }
  ParamStore<T>& params() { return store_; }
  const ParamStore<T>& params() const { return store_; }

  /// Runs the two-stage core on a batch of blind images (N, H, W, C).
  /// Returns (stage1, stage2); with SNE disabled the pair aliases.
  std::pair<Var<T>, Var<T>> forward_blind(const Var<T>& blind) const {
    if (!blind || blind->value.rank() != 4) {
      throw ShapeError("forward_blind: input must be (N,H,W,C)");
    }
    Var<T> stage1 = sub(blind, stack_forward(blind, stack_));
    Var<T> stage2 = cfg_.enable_sne ? sub(stage1, sne_forward(stage1, sne_)) : stage1;
    return {stage1, stage2};
  }

  /// Denoises one whole image (H, W, C) with no gradient tape. Raw-bayer
  /// inputs are single-channel mosaics; all other modes must match the
  /// configured channel count.
  Tensor<T> full_inference(const Tensor<T>& image) const {
    if (image.rank() != 3) throw ShapeError("full_inference: image must be (H,W,C)");
    const bool raw = cfg_.colorspace == Colorspace::kRawBayer;
    if (raw) {
      if (image.dim(2) != 1) throw ShapeError("full_inference: raw input must be (H,W,1)");
    } else if (image.dim(2) != model_channels(cfg_)) {
      throw ShapeError("full_inference: expected " + std::to_string(model_channels(cfg_)) +
                       " channels, got " + std::to_string(image.dim(2)));
    }
    Tensor<T> packed = raw ? bayer_split(image) : image;
    const int p = cfg_.pd_factor;
    const i64 divisor = static_cast<i64>(p) * cfg_.mask_stride;
    if (packed.dim(0) % divisor != 0 || packed.dim(1) % divisor != 0) {
      throw ShapeError("full_inference: " + std::to_string(packed.dim(0)) + "x" +
                       std::to_string(packed.dim(1)) + " not divisible by p*s = " +
                       std::to_string(divisor));
    }
    std::vector<Tensor<T>> denoised_subs;
    for (Tensor<T>& sub_img : pd_split(packed, p)) {
      BlindStack<T> stack = mask_map(sub_img, cfg_.mask_stride);
      Tensor<T> stage2 = denoise_blind_values(stack.blinds);
      std::vector<Tensor<T>> outs;
      const i64 per = sub_img.size();
      for (std::size_t k = 0; k < stack.blinds.size(); ++k) {
        Tensor<T> slice(sub_img.shape());
        for (i64 i = 0; i < per; ++i) slice[i] = stage2[static_cast<i64>(k) * per + i];
        outs.push_back(std::move(slice));
      }
      denoised_subs.push_back(collect_blind(outs, stack));
    }
    Tensor<T> merged = pd_merge(denoised_subs, p);
    Tensor<T> out = raw ? bayer_merge(merged) : merged;
    for (i64 i = 0; i < out.size(); ++i) out[i] = std::clamp(out[i], T(0), T(1));
    return out;
  }

 private:
  /// Batches the blind entries through the core without building a tape.
  Tensor<T> denoise_blind_values(const std::vector<Tensor<T>>& blinds) const {
    const i64 n = static_cast<i64>(blinds.size());
    const i64 h = blinds[0].dim(0), w = blinds[0].dim(1), c = blinds[0].dim(2);
    Tensor<T> batch({n, h, w, c});
    const i64 per = h * w * c;
    for (i64 k = 0; k < n; ++k) {
      for (i64 i = 0; i < per; ++i) batch[k * per + i] = blinds[static_cast<std::size_t>(k)][i];
    }
    return forward_blind(make_const(std::move(batch))).second->value;
  }

  ModelConfig cfg_;
  ParamStore<T> store_;
  StackParams<T> stack_;
  SneParams<T> sne_;
};

}  // namespace dtd
