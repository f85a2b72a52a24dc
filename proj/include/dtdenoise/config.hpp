// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <string>

#include <json.hpp>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/jsonutil.hpp"
#include "dtdenoise/model.hpp"
#include "dtdenoise/trainer.hpp"

// Run configuration: everything a command needs, merged from a named preset,
// an optional JSON file, and command-line overrides, in that order. Parsing
// is strict: unknown keys are rejected with the full field path.

namespace dtd {

struct RunConfig {
  ModelConfig model;
  TrainConfig train;       // train.seed doubles as the run seed
  std::string train_dir;   // empty: synthesize a procedural dataset
  std::string val_dir;     // empty: noisy copies of the training images
  std::string out_dir = "out";
  int synth_count = 20;    // procedural dataset size
  i64 synth_size = 64;     // procedural image edge length
};

/// The mode string couples the input layout to the network width: sRGB
/// trains on 3-channel images, raw mode on Bayer mosaics stored as
/// (H, W, 1) and packed to 4 channels internally, grey on single-channel
/// images.
inline std::string mode_name(Colorspace c) {
  switch (c) {
    case Colorspace::kSrgb: return "synthetic-srgb";
    case Colorspace::kRawBayer: return "raw-bayer";
    case Colorspace::kGrey: return "grey";
  }
  return "grey";
}

inline Colorspace parse_mode(const std::string& s) {
  if (s == "synthetic-srgb") return Colorspace::kSrgb;
  if (s == "raw-bayer") return Colorspace::kRawBayer;
  if (s == "grey") return Colorspace::kGrey;
  throw ConfigError("config: unknown mode \"" + s + '"');
}

/// Channels of the files a run reads: raw mosaics travel as single-channel
/// images until the model packs them.
inline i64 file_channels(Colorspace c) { return c == Colorspace::kSrgb ? 3 : 1; }

inline void validate(const RunConfig& cfg) {
  validate(cfg.model);
  validate(cfg.train);
  if (cfg.synth_count < 1) throw ConfigError("config: data.synth_count must be >= 1");
  if (cfg.synth_size < 1) throw ConfigError("config: data.synth_size must be >= 1");
  const i64 cell = static_cast<i64>(cfg.model.pd_factor) * cfg.model.mask_stride;
  if (cfg.train.crop % cell != 0) {
    throw ConfigError("config: crop " + std::to_string(cfg.train.crop) +
                      " must be a multiple of pd_factor*mask_stride = " + std::to_string(cell));
  }
  if ((cfg.train.crop / cell) % cfg.model.stack.window != 0) {
    throw ConfigError("config: blind images of edge " + std::to_string(cfg.train.crop / cell) +
                      " do not tile with window " + std::to_string(cfg.model.stack.window));
  }
}

inline nlohmann::json run_config_json(const RunConfig& cfg) {
  return {{"mode", mode_name(cfg.model.colorspace)},
          {"seed", cfg.train.seed},
          {"out_dir", cfg.out_dir},
          {"data",
           {{"train_dir", cfg.train_dir},
            {"val_dir", cfg.val_dir},
            {"synth_count", cfg.synth_count},
            {"synth_size", cfg.synth_size}}},
          {"model", model_config_json(cfg.model)},
          {"train", train_config_json(cfg.train)}};
}

/// Overlays a JSON document onto `base`. "mode" is shorthand for
/// model.colorspace and is applied first, so an explicit model.colorspace
/// key wins if both appear.
inline RunConfig parse_run_config(const nlohmann::json& j, RunConfig base) {
  detail::reject_unknown_keys(j, "", {"mode", "seed", "out_dir", "data", "model", "train"});
  std::string mode = mode_name(base.model.colorspace);
  detail::get_string(j, "", "mode", mode);
  base.model.colorspace = parse_mode(mode);
  if (j.contains("model")) base.model = parse_model_config(j["model"], "model.", base.model);
  if (j.contains("train")) base.train = parse_train_config(j["train"], "train.", base.train);
  detail::get_u64(j, "", "seed", base.train.seed);
  detail::get_string(j, "", "out_dir", base.out_dir);
  if (j.contains("data")) {
    const auto& d = j["data"];
    detail::reject_unknown_keys(d, "data.", {"train_dir", "val_dir", "synth_count", "synth_size"});
    detail::get_string(d, "data.", "train_dir", base.train_dir);
    detail::get_string(d, "data.", "val_dir", base.val_dir);
    detail::get_int(d, "data.", "synth_count", base.synth_count);
    detail::get_i64(d, "data.", "synth_size", base.synth_size);
  }
  return base;
}

inline RunConfig load_run_config(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
  return parse_run_config(j, std::move(base));
}

inline void save_run_config(const RunConfig& cfg, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write config " + path);
  out << run_config_json(cfg).dump(2) << "\n";
  if (!out) throw IoError("short write to " + path);
}

/// Named starting points. "paper" is the full-scale recipe (C=60, 3 groups
/// of 6 units, window 8, crop 128, 100 epochs); "toy" is a desk-scale
/// greyscale setup that trains in minutes.
inline RunConfig preset_config(const std::string& name) {
  RunConfig cfg;
  if (name == "paper") {
    cfg.model.stack = StackConfig{3, 6, 60, 8, 6, true, true};
    cfg.model.enable_sne = true;
    cfg.model.sne_ratio = 2;
    cfg.model.mask_stride = 4;
    cfg.model.pd_factor = 1;
    cfg.model.colorspace = Colorspace::kSrgb;
    cfg.train.epochs = 100;
    cfg.train.batch_size = 4;
    cfg.train.crop = 128;
    cfg.train.lr_init = 3e-4;
    cfg.train.lr_gamma = 0.25;
    cfg.train.lr_step = 20;
    cfg.train.weight_decay = 1e-8;
    cfg.train.noise = NoiseSpec{5.0, 50.0, true};
    cfg.synth_count = 20;
    cfg.synth_size = 128;
    return cfg;
  }
  if (name == "toy") {
    cfg.model.stack = StackConfig{1, 2, 16, 4, 4, true, true};
    cfg.model.enable_sne = true;
    cfg.model.sne_ratio = 4;
    cfg.model.mask_stride = 4;
    cfg.model.pd_factor = 1;
    cfg.model.colorspace = Colorspace::kGrey;
    cfg.train.epochs = 20;
    cfg.train.batch_size = 4;
    cfg.train.crop = 32;
    cfg.train.lr_init = 1e-3;
    cfg.train.lr_gamma = 0.25;
    cfg.train.lr_step = 12;
    cfg.train.weight_decay = 1e-8;
    cfg.train.noise = NoiseSpec{25.0, 25.0, false};
    cfg.synth_count = 20;
    cfg.synth_size = 64;
    return cfg;
  }
  throw ConfigError("config: unknown preset \"" + name + "\" (want paper or toy)");
}

}  // namespace dtd
