// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <istream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/image.hpp"

// Netpbm image IO. Greyscale images are stored as binary PGM (P5) and
// three-channel images as binary PPM (P6); a maxval above 255 selects
// 16-bit big-endian samples. Values map linearly to [0, 1] on read and the
// stored bit depth is kept on the sample so writes round-trip exactly.

namespace dtd {

namespace detail {

inline int pbm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch) && ch != '#') {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return ch;  // the delimiter consumed after the token (or EOF)
}

inline i64 pbm_int(std::istream& in, const std::string& path, const char* what) {
  std::string tok;
  pbm_next_token(in, tok);
  if (tok.empty()) throw FormatError(path + ": missing " + what);
  for (char c : tok) {
    if (c < '0' || c > '9') throw FormatError(path + ": bad " + std::string(what) + " '" + tok + "'");
  }
  return std::stoll(tok);
}

}  // namespace detail

inline ImageSample read_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string magic;
  detail::pbm_next_token(in, magic);
  i64 channels = 0;
  if (magic == "P5") channels = 1;
  else if (magic == "P6") channels = 3;
  else throw FormatError(path + ": unsupported magic '" + magic + "' (want P5 or P6)");

  const i64 W = detail::pbm_int(in, path, "width");
  const i64 H = detail::pbm_int(in, path, "height");
  const i64 maxval = detail::pbm_int(in, path, "maxval");
  if (W < 1 || H < 1) throw FormatError(path + ": bad dimensions");
  if (maxval < 1 || maxval > 65535) throw FormatError(path + ": maxval out of range");
  const bool wide = maxval > 255;
  const i64 bytes = H * W * channels * (wide ? 2 : 1);
  std::vector<unsigned char> buf(static_cast<std::size_t>(bytes));
  in.read(reinterpret_cast<char*>(buf.data()), bytes);
  if (in.gcount() != bytes) throw FormatError(path + ": truncated raster");

  ImageSample s;
  s.pixels = Tensor<float>({H, W, channels});
  const double scale = 1.0 / static_cast<double>(maxval);
  for (i64 i = 0; i < H * W * channels; ++i) {
    i64 raw;
    if (wide) {
      raw = (static_cast<i64>(buf[static_cast<std::size_t>(2 * i)]) << 8) |
            static_cast<i64>(buf[static_cast<std::size_t>(2 * i + 1)]);
    } else {
      raw = buf[static_cast<std::size_t>(i)];
    }
    s.pixels[i] = static_cast<float>(raw * scale);
  }
  s.colorspace = (channels == 3) ? Colorspace::kSrgb : Colorspace::kGrey;
  s.bit_depth = wide ? 16 : 8;
  s.name = std::filesystem::path(path).stem().string();
  return s;
}

inline void write_image(const ImageSample& img, const std::string& path) {
  if (!img.pixels.defined() || img.pixels.rank() != 3) {
    throw ShapeError("write_image: pixels must be (H,W,C)");
  }
  const i64 H = img.height(), W = img.width(), C = img.channels();
  if (C != 1 && C != 3) {
    throw ConfigError("write_image: " + std::to_string(C) +
                      " channels not representable (want 1 or 3)");
  }
  if (img.bit_depth != 8 && img.bit_depth != 16) {
    throw ConfigError("write_image: bit depth must be 8 or 16");
  }
  const i64 maxval = (img.bit_depth == 16) ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << (C == 3 ? "P6" : "P5") << "\n" << W << " " << H << "\n" << maxval << "\n";
  std::vector<unsigned char> buf;
  buf.reserve(static_cast<std::size_t>(H * W * C * (maxval > 255 ? 2 : 1)));
  for (i64 i = 0; i < H * W * C; ++i) {
    const double v = std::clamp(static_cast<double>(img.pixels[i]), 0.0, 1.0);
    const i64 q = std::llround(v * maxval);
    if (maxval > 255) {
      buf.push_back(static_cast<unsigned char>((q >> 8) & 0xff));
      buf.push_back(static_cast<unsigned char>(q & 0xff));
    } else {
      buf.push_back(static_cast<unsigned char>(q));
    }
  }
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("short write to " + path);
}

/// Loads every image in a directory. When `manifest.json` is present it
/// drives the listing:
///
///   {"images": [{"file": "a.pgm", "colorspace": "grey", "clean": "ref/a.pgm"}]}
///
/// `file` is required; `colorspace` overrides the format default and `clean`
/// attaches a same-shaped reference image. Without a manifest, all *.pgm and
/// *.ppm files are loaded in name order.
inline std::vector<ImageSample> load_dataset(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<ImageSample> out;
  const fs::path manifest = fs::path(dir) / "manifest.json";
  if (fs::exists(manifest)) {
    std::ifstream in(manifest);
    if (!in) throw IoError("cannot open " + manifest.string());
    nlohmann::json doc;
    try {
      in >> doc;
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(manifest.string() + ": " + e.what());
    }
    if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array()) {
      throw FormatError(manifest.string() + ": expected {\"images\": [...]}");
    }
    for (const auto& entry : doc["images"]) {
      if (!entry.is_object() || !entry.contains("file") || !entry["file"].is_string()) {
        throw FormatError(manifest.string() + ": each image needs a \"file\" string");
      }
      ImageSample s = read_image((fs::path(dir) / entry["file"].get<std::string>()).string());
      if (entry.contains("colorspace")) {
        s.colorspace = parse_colorspace(entry["colorspace"].get<std::string>());
      }
      if (entry.contains("clean")) {
        ImageSample ref = read_image((fs::path(dir) / entry["clean"].get<std::string>()).string());
        if (ref.pixels.shape() != s.pixels.shape()) {
          throw ShapeError(s.name + ": clean reference shape differs from image");
        }
        s.clean = ref.pixels;
      }
      out.push_back(std::move(s));
    }
    return out;
  }
  std::vector<fs::path> files;
  for (const auto& de : fs::directory_iterator(dir)) {
    if (!de.is_regular_file()) continue;
    const std::string ext = de.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(de.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) out.push_back(read_image(f.string()));
  return out;
}

}  // namespace dtd
