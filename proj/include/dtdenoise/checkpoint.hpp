// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <bit>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtdenoise/adam.hpp"
#include "dtdenoise/errors.hpp"
#include "dtdenoise/param_store.hpp"

// Checkpoint container: the magic line "DTCKPT1\n", a little-endian u64
// with the manifest byte length, a JSON manifest (config echo, array
// directory, training counters, rng state, curve log), then the raw
// float32 arrays packed back to back in directory order. Round trips are
// bit-exact.

namespace dtd {

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

constexpr char kCheckpointMagic[] = "DTCKPT1\n";

/// Training-state sidecar saved with the parameters. A best_psnr of
/// -infinity means no validated epoch yet; it round-trips as JSON null.
struct CheckpointExtra {
  i64 step_count = 0;
  int epoch = 0;
  std::string rng_state;
  double best_psnr = -std::numeric_limits<double>::infinity();
  nlohmann::json config;                    // free-form config echo
  nlohmann::json curve = nlohmann::json::array();  // per-epoch records
};

namespace detail {

inline void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline std::uint64_t get_u64(std::istream& in, const std::string& path) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw FormatError(path + ": truncated header");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const ParamStore<float>& params,
                            const AdamState<float>* adam, const CheckpointExtra& extra) {
  nlohmann::json manifest;
  manifest["format"] = "dtckpt";
  manifest["version"] = 1;
  manifest["config"] = extra.config;
  manifest["step_count"] = extra.step_count;
  manifest["epoch"] = extra.epoch;
  manifest["rng_state"] = extra.rng_state;
  manifest["best_psnr"] = extra.best_psnr;
  manifest["curve"] = extra.curve;

  nlohmann::json arrays = nlohmann::json::array();
  std::vector<const Tensor<float>*> payload;
  for (const auto& entry : params.entries()) {
    arrays.push_back({{"name", entry.name},
                      {"shape", entry.var->value.shape()},
                      {"kind", "param"}});
    payload.push_back(&entry.var->value);
  }
  if (adam) {
    for (const auto& entry : params.entries()) {
      if (!adam->has(entry.name)) {
        throw StateError("checkpoint: optimizer has no state for " + entry.name);
      }
      arrays.push_back({{"name", entry.name},
                        {"shape", entry.var->value.shape()},
                        {"kind", "adam_m"}});
      payload.push_back(&adam->first_moment(entry.name));
      arrays.push_back({{"name", entry.name},
                        {"shape", entry.var->value.shape()},
                        {"kind", "adam_v"}});
      payload.push_back(&adam->second_moment(entry.name));
    }
  }
  manifest["arrays"] = arrays;

  const std::string text = manifest.dump();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out.write(kCheckpointMagic, 8);
  detail::put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Tensor<float>* t : payload) {
    out.write(reinterpret_cast<const char*>(t->data()),
              static_cast<std::streamsize>(t->size() * sizeof(float)));
  }
  if (!out) throw IoError("short write to " + path);
}

/// Reads just the manifest, for config inspection before building a model.
inline nlohmann::json read_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::string(magic, 8) != kCheckpointMagic) {
    throw FormatError(path + ": bad checkpoint magic");
  }
  const std::uint64_t len = detail::get_u64(in, path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len)) {
    throw FormatError(path + ": truncated manifest");
  }
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": manifest is not valid JSON: " + e.what());
  }
}

/// Fills an existing store (and optionally optimizer state) from a file.
/// The store must already contain every named parameter with the stored
/// shape; any mismatch raises FormatError naming the parameter.
inline CheckpointExtra load_checkpoint(const std::string& path, ParamStore<float>& params,
                                       AdamState<float>* adam) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (in.gcount() != 8 || std::string(magic, 8) != kCheckpointMagic) {
    throw FormatError(path + ": bad checkpoint magic");
  }
  const std::uint64_t len = detail::get_u64(in, path);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (in.gcount() != static_cast<std::streamsize>(len)) {
    throw FormatError(path + ": truncated manifest");
  }
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": manifest is not valid JSON: " + e.what());
  }
  if (!manifest.contains("arrays") || !manifest["arrays"].is_array()) {
    throw FormatError(path + ": manifest lacks an arrays directory");
  }

  std::size_t params_seen = 0;
  std::map<std::string, Tensor<float>> pending_m;
  for (const auto& entry : manifest["arrays"]) {
    const std::string name = entry.at("name").get<std::string>();
    const Shape shape = entry.at("shape").get<Shape>();
    const std::string kind = entry.at("kind").get<std::string>();
    if (!params.has(name)) throw FormatError(path + ": unknown parameter " + name);
    Var<float> var = params.get(name);
    if (var->value.shape() != shape) {
      throw FormatError(path + ": shape mismatch for " + name + " (file " + shape_str(shape) +
                        ", store " + shape_str(var->value.shape()) + ")");
    }
    Tensor<float> buf(shape);
    const std::streamsize bytes = static_cast<std::streamsize>(buf.size() * sizeof(float));
    in.read(reinterpret_cast<char*>(buf.data()), bytes);
    if (in.gcount() != bytes) throw FormatError(path + ": truncated array data for " + name);
    if (kind == "param") {
      var->value = buf;
      ++params_seen;
    } else if (kind == "adam_m") {
      pending_m[name] = buf;
    } else if (kind == "adam_v") {
      auto it = pending_m.find(name);
      if (it == pending_m.end()) {
        throw FormatError(path + ": adam_v for " + name + " arrived without adam_m");
      }
      if (adam) adam->set_moments(name, it->second, buf);
      pending_m.erase(it);
    } else {
      throw FormatError(path + ": unknown array kind " + kind);
    }
  }
  if (params_seen != params.count()) {
    throw FormatError(path + ": file holds " + std::to_string(params_seen) +
                      " parameters, store expects " + std::to_string(params.count()));
  }

  CheckpointExtra extra;
  extra.step_count = manifest.value("step_count", i64(0));
  extra.epoch = manifest.value("epoch", 0);
  extra.rng_state = manifest.value("rng_state", std::string());
  if (manifest.contains("best_psnr") && manifest["best_psnr"].is_number()) {
    extra.best_psnr = manifest["best_psnr"].get<double>();
  }
  if (manifest.contains("config")) extra.config = manifest["config"];
  if (manifest.contains("curve")) extra.curve = manifest["curve"];
  params.set_step_count(extra.step_count);
  return extra;
}

}  // namespace dtd
