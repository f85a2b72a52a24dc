// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "dtdenoise/checkpoint.hpp"
#include "dtdenoise/config.hpp"
#include "dtdenoise/image_io.hpp"
#include "dtdenoise/metrics.hpp"
#include "dtdenoise/model.hpp"
#include "dtdenoise/synth.hpp"
#include "dtdenoise/trainer.hpp"

// Command implementations behind the dtdenoise binary. Each command takes
// explicit output streams and returns a process exit code: 0 success,
// 2 configuration or input errors, 3 numerical aborts. The thin main() in
// tools/dtdenoise.cpp maps exceptions to those codes.

namespace dtd {

/// What one training run produced, for summaries and ablation tables.
struct RunSummary {
  int epochs = 0;
  double noisy_psnr = std::nan("");  // mean PSNR of the noisy inputs
  double best_psnr = std::nan("");
  double best_ssim = std::nan("");
};

namespace detail {

constexpr std::uint64_t kDataSalt = 0x8f1bbcdcbfa53e0bull;
constexpr std::uint64_t kValSalt = 0xd6e8feb86659fd93ull;

inline std::vector<ImageSample> synth_train_set(const RunConfig& cfg) {
  return make_toy_dataset(cfg.synth_count, cfg.synth_size, cfg.synth_size,
                          file_channels(cfg.model.colorspace), cfg.train.seed ^ kDataSalt,
                          cfg.model.colorspace);
}

/// Noisy copies of the given images, each keeping its source as the clean
/// reference. Raw mosaics stay in mosaic layout; scoring packs them.
inline std::vector<ImageSample> synth_val_set(const std::vector<ImageSample>& clean,
                                              const RunConfig& cfg) {
  Rng rng(cfg.train.seed ^ kValSalt);
  std::vector<ImageSample> out;
  out.reserve(clean.size());
  for (const auto& s : clean) out.push_back(add_gaussian(s, cfg.train.noise, rng));
  return out;
}

inline std::pair<double, double> scored_pair(const Tensor<float>& got, const Tensor<float>& want,
                                             bool raw) {
  const Tensor<float> a = raw ? bayer_split(got) : got;
  const Tensor<float> b = raw ? bayer_split(want) : want;
  return {display_db(psnr(a, b)), ssim(a, b)};
}

/// Loads or synthesizes the datasets, trains, and writes the config echo
/// plus the report under cfg.out_dir. Shared by cmd_train and cmd_ablate.
inline RunSummary run_training(const RunConfig& cfg) {
  validate(cfg);
  std::vector<ImageSample> train =
      cfg.train_dir.empty() ? synth_train_set(cfg) : load_dataset(cfg.train_dir);
  std::vector<ImageSample> val;
  if (!cfg.val_dir.empty()) {
    val = load_dataset(cfg.val_dir);
  } else if (cfg.train.inject_noise) {
    val = synth_val_set(train, cfg);
  }

  std::filesystem::create_directories(cfg.out_dir);
  save_run_config(cfg, (std::filesystem::path(cfg.out_dir) / "config.json").string());

  const bool raw = cfg.model.colorspace == Colorspace::kRawBayer;
  RunSummary sum;
  if (!val.empty()) {
    double acc = 0.0;
    for (const auto& v : val) acc += scored_pair(v.pixels, v.clean, raw).first;
    sum.noisy_psnr = acc / static_cast<double>(val.size());
  }

  Trainer trainer(cfg.model, cfg.train, train, val, cfg.out_dir);
  RunResult res = trainer.run();
  sum.epochs = cfg.train.epochs;
  sum.best_psnr = res.best_psnr;
  for (const auto& rec : trainer.curve()) {
    if (rec.val_psnr == res.best_psnr) sum.best_ssim = rec.val_ssim;
  }

  std::vector<EvalEntry> entries;
  for (const auto& v : val) {
    const auto [p, s] = scored_pair(trainer.model().full_inference(v.pixels), v.clean, raw);
    entries.push_back({v.name, p, s});
  }
  emit_report(make_eval_result(std::move(entries)), trainer.curve(),
              std::filesystem::path(cfg.out_dir) / "report");
  return sum;
}

inline std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

inline std::string fixed_str(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

}  // namespace detail

inline int cmd_train(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  (void)err;
  RunSummary sum = detail::run_training(cfg);
  out << "trained " << sum.epochs << " epoch(s), output in " << cfg.out_dir << "\n";
  if (std::isfinite(sum.noisy_psnr)) {
    out << "noisy-input PSNR " << detail::fixed_str(sum.noisy_psnr, 2) << " dB, best val PSNR "
        << detail::fixed_str(sum.best_psnr, 2) << " dB\n";
  }
  return 0;
}

inline int cmd_denoise(const std::string& checkpoint, const std::string& input_dir,
                       const std::string& output_dir, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  const nlohmann::json manifest = read_manifest(checkpoint);
  if (!manifest.contains("config") || !manifest["config"].is_object() ||
      !manifest["config"].contains("model")) {
    throw FormatError(checkpoint + ": checkpoint carries no model config");
  }
  ModelConfig mcfg = parse_model_config(manifest["config"]["model"], "model.", ModelConfig{});
  validate(mcfg);
  DenoiserModel<float> model(mcfg, 0);
  load_checkpoint(checkpoint, model.params(), nullptr);

  const i64 want = file_channels(mcfg.colorspace);
  fs::create_directories(output_dir);
  int written = 0;
  int skipped = 0;
  for (const auto& path : detail::list_images(input_dir)) {
    ImageSample img;
    try {
      img = read_image(path.string());
    } catch (const Error& e) {
      err << "warning: skipping " << path.filename().string() << ": " << e.what() << "\n";
      ++skipped;
      continue;
    }
    if (img.channels() != want) {
      err << "error: " << path.filename().string() << " has " << img.channels()
          << " channel(s) but the checkpoint was trained for "
          << mode_name(mcfg.colorspace) << " inputs (" << want << ")\n";
      return 2;
    }
    ImageSample result = img;
    result.pixels = model.full_inference(img.pixels);
    result.clean = Tensor<float>();
    write_image(result, (fs::path(output_dir) / path.filename()).string());
    ++written;
  }
  if (written == 0) {
    err << "error: no inputs denoised from " << input_dir
        << (skipped > 0 ? " (all files were unreadable)" : " (no .pgm/.ppm files)") << "\n";
    return 2;
  }
  out << "denoised " << written << " file(s) into " << output_dir << "\n";
  return 0;
}

inline int cmd_eval(const std::string& denoised_dir, const std::string& clean_dir,
                    const std::string& out_dir, std::ostream& out, std::ostream& err) {
  namespace fs = std::filesystem;
  std::map<std::string, fs::path> den, ref;
  for (const auto& p : detail::list_images(denoised_dir)) den[p.filename().string()] = p;
  for (const auto& p : detail::list_images(clean_dir)) ref[p.filename().string()] = p;
  if (den.empty() || ref.empty()) {
    err << "error: no images in " << (den.empty() ? denoised_dir : clean_dir) << "\n";
    return 2;
  }
  bool unpaired = false;
  for (const auto& [name, path] : den) {
    if (!ref.count(name)) {
      err << "unpaired: " << name << " only in " << denoised_dir << "\n";
      unpaired = true;
    }
  }
  for (const auto& [name, path] : ref) {
    if (!den.count(name)) {
      err << "unpaired: " << name << " only in " << clean_dir << "\n";
      unpaired = true;
    }
  }
  if (unpaired) return 2;

  std::vector<EvalEntry> entries;
  for (const auto& [name, path] : den) {
    const ImageSample a = read_image(path.string());
    const ImageSample b = read_image(ref.at(name).string());
    if (a.pixels.shape() != b.pixels.shape()) {
      throw ShapeError(name + ": denoised and clean shapes differ");
    }
    entries.push_back({name, display_db(psnr(a.pixels, b.pixels)), ssim(a.pixels, b.pixels)});
  }
  const EvalResult result = make_eval_result(std::move(entries));
  emit_report(result, {}, std::filesystem::path(out_dir) / "report");
  out << "evaluated " << result.entries.size() << " pair(s): mean PSNR "
      << detail::fixed_str(result.mean_psnr, 2) << " dB, mean SSIM "
      << detail::fixed_str(result.mean_ssim, 4) << "\n";
  return 0;
}

/// Ablation grid: the four variants toggle the local branch and the
/// secondary extractor while everything else (data, noise, schedule) stays
/// fixed per seed. Scores are the best validation PSNR/SSIM of each run.
inline int cmd_ablate(const RunConfig& base, const std::vector<std::uint64_t>& seeds,
                      std::ostream& out, std::ostream& err) {
  (void)err;
  if (seeds.empty()) throw ConfigError("ablate: need at least one seed");
  struct Variant {
    const char* name;
    const char* dir;
    bool local;
    bool sne;
  };
  static constexpr Variant kVariants[] = {{"baseline", "baseline", false, false},
                                          {"+SNE", "sne", false, true},
                                          {"+CADT", "cadt", true, false},
                                          {"+CADT+SNE", "cadt_sne", true, true}};

  namespace fs = std::filesystem;
  const fs::path root = fs::path(base.out_dir) / "ablate";
  fs::create_directories(root);

  std::ostringstream table;
  table << "variant,seed,psnr_db,ssim\n";
  double means[4] = {};
  for (int vi = 0; vi < 4; ++vi) {
    const Variant& v = kVariants[vi];
    double acc = 0.0;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = base;
      cfg.model.stack.enable_local = v.local;
      cfg.model.enable_sne = v.sne;
      cfg.train.seed = seed;
      cfg.out_dir = (root / v.dir / ("seed" + std::to_string(seed))).string();
      const RunSummary sum = detail::run_training(cfg);
      table << v.name << "," << seed << "," << detail::fixed_str(sum.best_psnr, 4) << ","
            << detail::fixed_str(sum.best_ssim, 4) << "\n";
      acc += sum.best_psnr;
    }
    means[vi] = acc / static_cast<double>(seeds.size());
    table << v.name << ",mean," << detail::fixed_str(means[vi], 4) << ",\n";
  }

  {
    std::ofstream csv(root / "table.csv");
    if (!csv) throw IoError("ablate: cannot write " + (root / "table.csv").string());
    csv << table.str();
  }
  out << table.str();
  const bool ordered = means[3] >= means[2] && means[2] >= means[0];
  out << "ordering: +CADT+SNE (" << detail::fixed_str(means[3], 4) << ") >= +CADT ("
      << detail::fixed_str(means[2], 4) << ") >= baseline (" << detail::fixed_str(means[0], 4)
      << "): " << (ordered ? "OK" : "VIOLATED") << "\n";
  return 0;
}

}  // namespace dtd
