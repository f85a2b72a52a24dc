// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dtdenoise/adam.hpp"
#include "dtdenoise/checkpoint.hpp"
#include "dtdenoise/image.hpp"
#include "dtdenoise/jsonutil.hpp"
#include "dtdenoise/mask.hpp"
#include "dtdenoise/metrics.hpp"
#include "dtdenoise/model.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/rng.hpp"

// Self-supervised training loop. Each step samples augmented crops, injects
// noise (synthetic mode), expands every crop into its blind-spot stack, and
// minimizes the L2 error against the noisy values at masked positions only.
// Checkpoints are written after every epoch (last) and at the best
// validation PSNR (best); the per-epoch curve goes to curve.jsonl.

namespace dtd {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 4;
  i64 crop = 128;
  double lr_init = 3e-4;
  double lr_gamma = 0.25;
  int lr_step = 20;
  double weight_decay = 1e-8;
  std::uint64_t seed = 1;
  int steps_per_epoch = 0;   // 0: ceil(train images / batch)
  bool inject_noise = true;  // synthetic mode: AWGN on every sampled crop
  NoiseSpec noise;
};

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (cfg.crop < 1) throw ConfigError("train: crop must be >= 1");
  if (!(cfg.lr_init > 0.0)) throw ConfigError("train: lr_init must be positive");
  if (!(cfg.lr_gamma > 0.0 && cfg.lr_gamma <= 1.0)) {
    throw ConfigError("train: lr_gamma must be in (0, 1]");
  }
  if (cfg.lr_step < 1) throw ConfigError("train: lr_step must be >= 1");
  if (cfg.weight_decay < 0.0) throw ConfigError("train: weight_decay must be >= 0");
  if (cfg.steps_per_epoch < 0) throw ConfigError("train: steps_per_epoch must be >= 0");
  if (cfg.inject_noise) validate(cfg.noise);
}

inline nlohmann::json train_config_json(const TrainConfig& cfg) {
  return {{"epochs", cfg.epochs},
          {"batch_size", cfg.batch_size},
          {"crop", cfg.crop},
          {"lr_init", cfg.lr_init},
          {"lr_gamma", cfg.lr_gamma},
          {"lr_step", cfg.lr_step},
          {"weight_decay", cfg.weight_decay},
          {"steps_per_epoch", cfg.steps_per_epoch},
          {"inject_noise", cfg.inject_noise},
          {"sigma_min", cfg.noise.sigma_min},
          {"sigma_max", cfg.noise.sigma_max},
          {"per_image_sigma", cfg.noise.per_image_sigma}};
}

/// Overlays the keys of `j` onto `base`, rejecting unknown keys. The seed
/// is not part of this section; run configs carry it at the top level.
inline TrainConfig parse_train_config(const nlohmann::json& j, const std::string& prefix,
                                      TrainConfig base) {
  detail::reject_unknown_keys(j, prefix,
                              {"epochs", "batch_size", "crop", "lr_init", "lr_gamma", "lr_step",
                               "weight_decay", "steps_per_epoch", "inject_noise", "sigma_min",
                               "sigma_max", "per_image_sigma"});
  detail::get_int(j, prefix, "epochs", base.epochs);
  detail::get_int(j, prefix, "batch_size", base.batch_size);
  detail::get_i64(j, prefix, "crop", base.crop);
  detail::get_double(j, prefix, "lr_init", base.lr_init);
  detail::get_double(j, prefix, "lr_gamma", base.lr_gamma);
  detail::get_int(j, prefix, "lr_step", base.lr_step);
  detail::get_double(j, prefix, "weight_decay", base.weight_decay);
  detail::get_int(j, prefix, "steps_per_epoch", base.steps_per_epoch);
  detail::get_bool(j, prefix, "inject_noise", base.inject_noise);
  detail::get_double(j, prefix, "sigma_min", base.noise.sigma_min);
  detail::get_double(j, prefix, "sigma_max", base.noise.sigma_max);
  detail::get_bool(j, prefix, "per_image_sigma", base.noise.per_image_sigma);
  return base;
}

/// Staircase schedule: lr_init * gamma^(e / lr_step) with integer division.
inline double lr_at_epoch(const TrainConfig& cfg, int epoch) {
  if (epoch < 0) throw ConfigError("lr_at_epoch: epoch must be >= 0");
  return cfg.lr_init * std::pow(cfg.lr_gamma, static_cast<double>(epoch / cfg.lr_step));
}

/// Training tensors for one optimizer step: all blind images of all crops
/// stacked into one batch, the noisy values they must reproduce, and the
/// flat positions where the loss applies.
template <typename T>
struct BlindBatch {
  Tensor<T> input;   // (K, h, w, C), K = crops * stride^2
  Tensor<T> target;  // same shape; each crop replicated stride^2 times
  std::vector<i64> mask_indices;
};

/// Expands noisy crops into their blind-spot stacks. Every pixel of every
/// crop appears in the mask set exactly once, so the index count equals the
/// total entry count of the crops.
template <typename T>
BlindBatch<T> make_blind_batch(const std::vector<Tensor<T>>& crops, int stride) {
  if (crops.empty()) throw ShapeError("make_blind_batch: no crops");
  const Shape shape = crops.front().shape();
  for (const auto& c : crops) {
    if (c.rank() != 3 || c.shape() != shape) {
      throw ShapeError("make_blind_batch: crops must share one (h,w,C) shape");
    }
  }
  const i64 h = shape[0], w = shape[1], ch = shape[2];
  const i64 per = h * w * ch;
  const i64 entries = static_cast<i64>(stride) * stride;
  BlindBatch<T> out;
  out.input = Tensor<T>({static_cast<i64>(crops.size()) * entries, h, w, ch});
  out.target = Tensor<T>(out.input.shape());
  out.mask_indices.reserve(static_cast<std::size_t>(crops.size()) * per);
  i64 k = 0;
  for (const auto& crop : crops) {
    BlindStack<T> stack = mask_map(crop, stride);
    for (std::size_t j = 0; j < stack.blinds.size(); ++j, ++k) {
      T* dst_in = out.input.data() + k * per;
      T* dst_tg = out.target.data() + k * per;
      const T* src_in = stack.blinds[j].data();
      const T* src_tg = crop.data();
      for (i64 i = 0; i < per; ++i) {
        dst_in[i] = src_in[i];
        dst_tg[i] = src_tg[i];
      }
      for (const auto& [r, c] : stack.mask_positions[j]) {
        const i64 base = (k * h * w + r * w + c) * ch;
        for (i64 cc = 0; cc < ch; ++cc) out.mask_indices.push_back(base + cc);
      }
    }
  }
  return out;
}

/// Mean squared error over masked positions only; predictions at unmasked
/// positions never influence the value or the gradient.
template <typename T>
Var<T> blind_l2_loss(const Var<T>& stage2, const Var<T>& noisy, const std::vector<i64>& mask) {
  if (mask.empty()) throw ConfigError("blind_l2_loss: empty mask set");
  return masked_mse(stage2, noisy, mask);
}

struct RunResult {
  std::vector<CurveRecord> curve;        // full history including resumed epochs
  std::vector<double> step_losses;       // losses of the steps this call ran
  double best_psnr = 0.0;
};

namespace detail {

inline nlohmann::json curve_to_json(const CurveRecord& r) {
  nlohmann::json j;
  j["epoch"] = r.epoch;
  j["mean_loss"] = r.mean_loss;
  j["val_psnr"] = std::isfinite(r.val_psnr) ? nlohmann::json(r.val_psnr) : nlohmann::json();
  j["val_ssim"] = std::isfinite(r.val_ssim) ? nlohmann::json(r.val_ssim) : nlohmann::json();
  j["lr"] = r.lr;
  return j;
}

inline CurveRecord curve_from_json(const nlohmann::json& j) {
  CurveRecord r;
  r.epoch = j.at("epoch").get<i64>();
  r.mean_loss = j.at("mean_loss").get<double>();
  r.val_psnr = j.at("val_psnr").is_null() ? std::nan("") : j.at("val_psnr").get<double>();
  r.val_ssim = j.at("val_ssim").is_null() ? std::nan("") : j.at("val_ssim").get<double>();
  r.lr = j.at("lr").get<double>();
  return r;
}

}  // namespace detail

/// Single-worker trainer; every stochastic choice draws from one seeded
/// generator, so a (config, seed) pair fixes the loss sequence bit for bit.
class Trainer {
 public:
  Trainer(const ModelConfig& mcfg, const TrainConfig& tcfg, std::vector<ImageSample> train_set,
          std::vector<ImageSample> val_set, std::filesystem::path out_dir)
      : model_(mcfg, tcfg.seed),
        tcfg_(tcfg),
        rng_(tcfg.seed ^ 0x9e3779b97f4a7c15ull),
        train_(std::move(train_set)),
        val_(std::move(val_set)),
        out_dir_(std::move(out_dir)) {
    validate(tcfg_);
    prepare();
  }

  DenoiserModel<float>& model() { return model_; }
  const std::vector<CurveRecord>& curve() const { return curve_; }
  int epoch() const { return epoch_; }
  double best_psnr() const { return best_psnr_; }

  /// Restores parameters, optimizer moments, generator state, epoch
  /// counter, best score, and curve history from a checkpoint.
  void resume(const std::filesystem::path& ckpt) {
    CheckpointExtra ex = load_checkpoint(ckpt.string(), model_.params(), &adam_);
    rng_.restore_state(ex.rng_state);
    epoch_ = static_cast<int>(ex.epoch);
    best_psnr_ = ex.best_psnr;
    curve_.clear();
    for (const auto& j : ex.curve) curve_.push_back(detail::curve_from_json(j));
    rewrite_curve_file();
  }

  /// One optimizer step: sample, corrupt, mask, forward, masked L2,
  /// backward, adam. Returns the loss; non-finite losses abort.
  double step() {
    std::vector<Tensor<float>> crops;
    crops.reserve(static_cast<std::size_t>(tcfg_.batch_size) * pd_count_);
    for (int b = 0; b < tcfg_.batch_size; ++b) {
      const ImageSample& src = train_[rng_.index(static_cast<i64>(train_.size()))];
      ImageSample crop = augment(src, tcfg_.crop, rng_);
      ImageSample noisy = tcfg_.inject_noise ? add_gaussian(crop, tcfg_.noise, rng_) : crop;
      if (model_.config().pd_factor > 1) {
        for (Tensor<float>& sub : pd_split(noisy.pixels, model_.config().pd_factor)) {
          crops.push_back(std::move(sub));
        }
      } else {
        crops.push_back(std::move(noisy.pixels));
      }
    }
    BlindBatch<float> batch = make_blind_batch(crops, model_.config().mask_stride);
    auto [stage1, stage2] = model_.forward_blind(make_const(std::move(batch.input)));
    Var<float> loss =
        blind_l2_loss(stage2, make_const(std::move(batch.target)), batch.mask_indices);
    const double value = static_cast<double>(loss->value[0]);
    if (!std::isfinite(value)) {
      throw NumericalError("trainer: non-finite loss at step " +
                           std::to_string(model_.params().step_count() + 1));
    }
    model_.params().zero_grads();
    backward(loss);
    AdamConfig<float> acfg;
    acfg.learning_rate = static_cast<float>(lr_at_epoch(tcfg_, epoch_));
    acfg.weight_decay = static_cast<float>(tcfg_.weight_decay);
    adam_.step(model_.params(), acfg);
    return value;
  }

  /// Runs the remaining epochs (all of them on a fresh trainer). Returns
  /// the curve plus this call's per-step losses.
  RunResult run() {
    RunResult res;
    while (epoch_ < tcfg_.epochs) {
      double sum = 0.0;
      for (int i = 0; i < steps_per_epoch_; ++i) {
        const double v = step();
        sum += v;
        res.step_losses.push_back(v);
      }
      CurveRecord rec;
      rec.epoch = epoch_;
      rec.mean_loss = sum / steps_per_epoch_;
      rec.lr = lr_at_epoch(tcfg_, epoch_);
      score_validation(rec);
      curve_.push_back(rec);
      append_curve_record(rec);
      ++epoch_;
      if (std::isfinite(rec.val_psnr) && rec.val_psnr > best_psnr_) {
        best_psnr_ = rec.val_psnr;
        save(kBestName);
      }
      save(kLastName);
    }
    res.curve = curve_;
    res.best_psnr = best_psnr_;
    return res;
  }

  static constexpr const char* kBestName = "best.ckpt";
  static constexpr const char* kLastName = "last.ckpt";

 private:
  void prepare() {
    if (train_.empty()) throw ConfigError("trainer: empty training set");
    const bool raw = model_.config().colorspace == Colorspace::kRawBayer;
    // Raw mosaics train in the packed 4-channel domain so crops and flips
    // cannot shift the Bayer phase.
    if (raw) {
      for (auto& s : train_) {
        if (s.channels() != 1) throw ShapeError("trainer: raw samples must be (H,W,1)");
        s.pixels = bayer_split(s.pixels);
        if (s.clean.defined()) s.clean = bayer_split(s.clean);
      }
    }
    const i64 want = model_channels(model_.config());
    for (const auto& s : train_) {
      if (s.channels() != want) {
        throw ShapeError("trainer: sample " + s.name + " has " + std::to_string(s.channels()) +
                         " channels, model wants " + std::to_string(want));
      }
      if (s.height() < tcfg_.crop || s.width() < tcfg_.crop) {
        throw ConfigError("trainer: sample " + s.name + " smaller than crop " +
                          std::to_string(tcfg_.crop));
      }
    }
    if (tcfg_.crop % model_.config().pd_factor != 0) {
      throw ConfigError("trainer: crop must be divisible by the pd factor");
    }
    for (const auto& v : val_) {
      if (!v.clean.defined()) {
        throw ConfigError("trainer: validation sample " + v.name + " has no clean reference");
      }
    }
    const int p2 = model_.config().pd_factor * model_.config().pd_factor;
    pd_count_ = p2;
    steps_per_epoch_ = tcfg_.steps_per_epoch > 0
                           ? tcfg_.steps_per_epoch
                           : static_cast<int>((train_.size() + tcfg_.batch_size - 1) /
                                              tcfg_.batch_size);
    std::error_code ec;
    std::filesystem::create_directories(out_dir_, ec);
    if (ec) throw IoError("trainer: cannot create " + out_dir_.string() + ": " + ec.message());
    // A fresh trainer starts a fresh curve log; resume() rewrites it from
    // the restored history.
    std::ofstream(out_dir_ / "curve.jsonl", std::ios::trunc);
  }

  void score_validation(CurveRecord& rec) {
    if (val_.empty()) {
      rec.val_psnr = std::nan("");
      rec.val_ssim = std::nan("");
      return;
    }
    const bool raw = model_.config().colorspace == Colorspace::kRawBayer;
    double psnr_sum = 0.0, ssim_sum = 0.0;
    for (const auto& v : val_) {
      Tensor<float> out = model_.full_inference(v.pixels);
      // Raw pairs are scored in the packed domain.
      Tensor<float> got = raw ? bayer_split(out) : out;
      Tensor<float> want = raw ? bayer_split(v.clean) : v.clean;
      psnr_sum += display_db(psnr(got, want));
      ssim_sum += ssim(got, want);
    }
    rec.val_psnr = psnr_sum / static_cast<double>(val_.size());
    rec.val_ssim = ssim_sum / static_cast<double>(val_.size());
  }

  void save(const char* name) {
    CheckpointExtra ex;
    ex.step_count = model_.params().step_count();
    ex.epoch = epoch_;
    ex.rng_state = rng_.save_state();
    ex.best_psnr = best_psnr_;
    // Checkpoints are self-describing: the model section is enough to
    // rebuild a matching parameter store for inference.
    ex.config = {{"model", model_config_json(model_.config())},
                 {"train", train_config_json(tcfg_)},
                 {"seed", tcfg_.seed}};
    ex.curve = nlohmann::json::array();
    for (const auto& r : curve_) ex.curve.push_back(detail::curve_to_json(r));
    save_checkpoint((out_dir_ / name).string(), model_.params(), &adam_, ex);
  }

  void append_curve_record(const CurveRecord& rec) {
    std::ofstream out(out_dir_ / "curve.jsonl", std::ios::app);
    if (!out) throw IoError("trainer: cannot write curve.jsonl");
    out << detail::curve_to_json(rec).dump() << "\n";
  }

  void rewrite_curve_file() {
    std::ofstream out(out_dir_ / "curve.jsonl", std::ios::trunc);
    if (!out) throw IoError("trainer: cannot write curve.jsonl");
    for (const auto& r : curve_) out << detail::curve_to_json(r).dump() << "\n";
  }

  DenoiserModel<float> model_;
  TrainConfig tcfg_;
  AdamState<float> adam_;
  Rng rng_;
  std::vector<ImageSample> train_;
  std::vector<ImageSample> val_;
  std::filesystem::path out_dir_;
  std::vector<CurveRecord> curve_;
  int epoch_ = 0;
  int steps_per_epoch_ = 1;
  int pd_count_ = 1;
  double best_psnr_ = -std::numeric_limits<double>::infinity();
};

}  // namespace dtd
