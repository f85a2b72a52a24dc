// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include <json.hpp>

#include "dtdenoise/config.hpp"

using namespace dtd;
using nlohmann::json;

namespace {

std::filesystem::path temp_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("dtd_config_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("presets carry the documented hyperparameters") {
  const RunConfig paper = preset_config("paper");
  CHECK(paper.model.stack.channels == 60);
  CHECK(paper.model.stack.groups == 3);
  CHECK(paper.model.stack.units == 6);
  CHECK(paper.model.stack.window == 8);
  CHECK(paper.model.stack.heads == 6);
  CHECK(paper.model.mask_stride == 4);
  CHECK(paper.model.pd_factor == 1);
  CHECK(paper.model.colorspace == Colorspace::kSrgb);
  CHECK(paper.train.epochs == 100);
  CHECK(paper.train.batch_size == 4);
  CHECK(paper.train.crop == 128);
  CHECK(paper.train.lr_init == 3e-4);
  CHECK(paper.train.lr_gamma == 0.25);
  CHECK(paper.train.lr_step == 20);
  CHECK(paper.train.noise.sigma_min == 5.0);
  CHECK(paper.train.noise.sigma_max == 50.0);

  const RunConfig toy = preset_config("toy");
  CHECK(toy.model.stack.channels == 16);
  CHECK(toy.model.stack.groups == 1);
  CHECK(toy.model.stack.units == 2);
  CHECK(toy.model.stack.window == 4);
  CHECK(toy.model.colorspace == Colorspace::kGrey);
  CHECK(toy.train.noise.sigma_min == 25.0);
  CHECK(toy.train.noise.sigma_max == 25.0);
  CHECK(toy.synth_count == 20);
  CHECK(toy.synth_size == 64);
  REQUIRE_NOTHROW(validate(paper));
  REQUIRE_NOTHROW(validate(toy));

  REQUIRE_THROWS_AS(preset_config("huge"), ConfigError);
}

TEST_CASE("the config echo covers every field") {
  // Parsing a toy echo on top of the "paper" preset must reproduce the toy config
  // exactly, so no field can be missing from the echo.
  const RunConfig toy = preset_config("toy");
  const json echo = run_config_json(toy);
  const RunConfig rebuilt = parse_run_config(echo, preset_config("paper"));
  CHECK(run_config_json(rebuilt) == echo);
}

TEST_CASE("unknown keys are rejected with their field path") {
  const RunConfig base = preset_config("toy");
  REQUIRE_THROWS_WITH(parse_run_config(json{{"windw", 3}}, base),
                      Catch::Matchers::ContainsSubstring("\"windw\""));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"model", {{"windw", 3}}}}, base),
                      Catch::Matchers::ContainsSubstring("\"model.windw\""));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"train", {{"epoch", 3}}}}, base),
                      Catch::Matchers::ContainsSubstring("\"train.epoch\""));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"data", {{"dir", "x"}}}}, base),
                      Catch::Matchers::ContainsSubstring("\"data.dir\""));
}

TEST_CASE("type mismatches name the field") {
  const RunConfig base = preset_config("toy");
  REQUIRE_THROWS_WITH(parse_run_config(json{{"train", {{"epochs", "ten"}}}}, base),
                      Catch::Matchers::ContainsSubstring("train.epochs"));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"model", {{"enable_sne", 1}}}}, base),
                      Catch::Matchers::ContainsSubstring("model.enable_sne"));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"seed", -3}}, base),
                      Catch::Matchers::ContainsSubstring("seed"));
  REQUIRE_THROWS_WITH(parse_run_config(json{{"model", json::array()}}, base),
                      Catch::Matchers::ContainsSubstring("section"));
}

TEST_CASE("mode selects the colorspace and file layout") {
  const RunConfig base = preset_config("toy");
  CHECK(parse_run_config(json{{"mode", "synthetic-srgb"}}, base).model.colorspace ==
        Colorspace::kSrgb);
  CHECK(parse_run_config(json{{"mode", "raw-bayer"}}, base).model.colorspace ==
        Colorspace::kRawBayer);
  CHECK(parse_run_config(json{{"mode", "grey"}}, base).model.colorspace == Colorspace::kGrey);
  REQUIRE_THROWS_AS(parse_run_config(json{{"mode", "cmyk"}}, base), ConfigError);

  CHECK(file_channels(Colorspace::kSrgb) == 3);
  CHECK(file_channels(Colorspace::kRawBayer) == 1);
  CHECK(file_channels(Colorspace::kGrey) == 1);

  // An explicit model.colorspace wins over the mode shorthand.
  const RunConfig both = parse_run_config(
      json{{"mode", "grey"}, {"model", {{"colorspace", "srgb"}}}}, base);
  CHECK(both.model.colorspace == Colorspace::kSrgb);
}

TEST_CASE("the top-level seed feeds the training seed") {
  const RunConfig base = preset_config("toy");
  CHECK(parse_run_config(json{{"seed", 42}}, base).train.seed == 42u);
  CHECK(run_config_json(parse_run_config(json{{"seed", 42}}, base))["seed"] == 42u);
}

TEST_CASE("geometry validation catches crops that do not tile") {
  RunConfig cfg = preset_config("toy");
  cfg.train.crop = 30;  // not a multiple of pd_factor * mask_stride = 4
  REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("multiple"));
  cfg.train.crop = 24;  // blind edge 6 does not tile with window 4
  REQUIRE_THROWS_WITH(validate(cfg), Catch::Matchers::ContainsSubstring("window"));
  cfg.train.crop = 32;
  REQUIRE_NOTHROW(validate(cfg));
  cfg.synth_count = 0;
  REQUIRE_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("config files round-trip through disk") {
  const auto dir = temp_dir("roundtrip");
  const RunConfig toy = preset_config("toy");
  const auto path = (dir / "config.json").string();
  save_run_config(toy, path);
  const RunConfig loaded = load_run_config(path, preset_config("paper"));
  CHECK(run_config_json(loaded) == run_config_json(toy));

  REQUIRE_THROWS_AS(load_run_config((dir / "absent.json").string(), toy), IoError);
  std::ofstream(dir / "broken.json") << "{not json";
  REQUIRE_THROWS_AS(load_run_config((dir / "broken.json").string(), toy), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("model configs rebuild from checkpoint manifests") {
  ModelConfig mcfg;
  mcfg.stack = StackConfig{2, 3, 24, 4, 4, true, false};
  mcfg.enable_sne = false;
  mcfg.sne_ratio = 3;
  mcfg.mask_stride = 2;
  mcfg.pd_factor = 2;
  mcfg.colorspace = Colorspace::kRawBayer;
  const json j = model_config_json(mcfg);
  const ModelConfig back = parse_model_config(j, "model.", ModelConfig{});
  CHECK(model_config_json(back) == j);
  CHECK(back.stack.enable_local == false);
  CHECK(back.colorspace == Colorspace::kRawBayer);
}
