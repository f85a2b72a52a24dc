// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dtdenoise/cli.hpp"
#include "dtdenoise/config.hpp"

// Argument parsing for the dtdenoise binary, separated from main() so tests
// can drive the full command surface in-process.

namespace dtd {
namespace detail {

inline std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    const std::size_t comma = csv.find(',', pos);
    const std::string item = csv.substr(pos, comma == std::string::npos ? comma : comma - pos);
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError("ablate: bad seed \"" + item + "\" in list \"" + csv + '"');
    }
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return seeds;
}

/// Merge order: preset, then config file, then individual flags. The
/// DTDENOISE_DATA environment variable supplies a training data root only
/// when neither the file nor the flags did. train starts from the full-size
/// preset; ablate starts from the desk-scale one.
struct CommonFlags {
  std::string config_path;
  std::string preset = "paper";
  std::string out_dir;
  std::string data_dir;
  std::string val_dir;
  std::uint64_t seed = 0;
  bool seed_set = false;

  RunConfig assemble() const {
    RunConfig cfg = preset_config(preset);
    if (!config_path.empty()) cfg = load_run_config(config_path, cfg);
    if (seed_set) cfg.train.seed = seed;
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!data_dir.empty()) cfg.train_dir = data_dir;
    if (!val_dir.empty()) cfg.val_dir = val_dir;
    if (cfg.train_dir.empty()) {
      if (const char* env = std::getenv("DTDENOISE_DATA"); env && *env) cfg.train_dir = env;
    }
    return cfg;
  }
};

inline void add_common_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON run config overlaid on the preset");
  cmd->add_option("--preset", f.preset, "starting point: paper or toy (default " + f.preset + ")");
  cmd->add_option("--seed", f.seed, "run seed")->each([&f](const std::string&) {
    f.seed_set = true;
  });
  cmd->add_option("--out", f.out_dir, "output directory");
  cmd->add_option("--data", f.data_dir, "training image directory");
  cmd->add_option("--val", f.val_dir, "validation image directory");
}

}  // namespace detail

/// Full command surface; args excludes the program name. Returns the
/// process exit code: 0 success, 2 config or input errors, 3 numerical
/// aborts.
inline int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"self-supervised two-stage transformer image denoiser"};
  app.require_subcommand(1);

  detail::CommonFlags train_flags;
  CLI::App* train = app.add_subcommand("train", "train a model");
  detail::add_common_flags(train, train_flags);

  std::string ckpt, in_dir, den_out;
  CLI::App* denoise = app.add_subcommand("denoise", "run a checkpoint over a directory");
  denoise->add_option("--checkpoint", ckpt, "checkpoint file")->required();
  denoise->add_option("--in", in_dir, "input image directory")->required();
  denoise->add_option("--out", den_out, "output image directory")->required();

  std::string eval_den, eval_clean, eval_out = "out";
  CLI::App* eval = app.add_subcommand("eval", "score denoised images against references");
  eval->add_option("--denoised", eval_den, "denoised image directory")->required();
  eval->add_option("--clean", eval_clean, "clean reference directory")->required();
  eval->add_option("--out", eval_out, "report directory (default out)");

  detail::CommonFlags ablate_flags;
  ablate_flags.preset = "toy";
  std::string seeds_csv = "1,2,3";
  CLI::App* ablate = app.add_subcommand("ablate", "run the four-variant comparison grid");
  detail::add_common_flags(ablate, ablate_flags);
  ablate->add_option("--seeds", seeds_csv, "comma-separated seed list (default 1,2,3)");

  std::vector<const char*> argv;
  argv.push_back("dtdenoise");
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags.assemble(), out, err);
    if (denoise->parsed()) return cmd_denoise(ckpt, in_dir, den_out, out, err);
    if (eval->parsed()) return cmd_eval(eval_den, eval_clean, eval_out, out, err);
    if (ablate->parsed()) {
      return cmd_ablate(ablate_flags.assemble(), detail::parse_seed_list(seeds_csv), out, err);
    }
  } catch (const NumericalError& e) {
    err << "numerical abort: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace dtd
