// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/rng.hpp"
#include "dtdenoise/tensor.hpp"

// Deterministic image-space transforms. Images are (H, W, C) tensors with
// values in [0, 1]; every random draw flows through an explicit Rng.

namespace dtd {

enum class Colorspace { kSrgb, kRawBayer, kGrey };

inline std::string colorspace_name(Colorspace c) {
  switch (c) {
    case Colorspace::kSrgb: return "srgb";
    case Colorspace::kRawBayer: return "raw-bayer";
    case Colorspace::kGrey: return "grey";
  }
  return "grey";
}

inline Colorspace parse_colorspace(const std::string& s) {
  if (s == "srgb") return Colorspace::kSrgb;
  if (s == "raw-bayer") return Colorspace::kRawBayer;
  if (s == "grey") return Colorspace::kGrey;
  throw ConfigError("unknown colorspace: " + s);
}

/// One image plus bookkeeping: colorspace tag, source bit depth (so files
/// round-trip byte for byte), and an optional clean reference with the
/// same shape.
struct ImageSample {
  Tensor<float> pixels;  // (H, W, C)
  Tensor<float> clean;   // undefined when absent
  Colorspace colorspace = Colorspace::kGrey;
  int bit_depth = 8;
  std::string name;

  i64 height() const { return pixels.dim(0); }
  i64 width() const { return pixels.dim(1); }
  i64 channels() const { return pixels.dim(2); }
};

// ---------------------------------------------------------------------------
// Pixel-shuffle downsampling: an H x W image becomes p^2 sub-images of size
// (H/p) x (W/p); sub-image (a, b) holds every pixel at (p*i + a, p*j + b).
// Sub-images are ordered row-major in (a, b).

template <typename T>
std::vector<Tensor<T>> pd_split(const Tensor<T>& img, int p) {
  if (img.rank() != 3) throw ShapeError("pd_split: image must be (H,W,C)");
  if (p < 1) throw ConfigError("pd_split: p must be >= 1");
  const i64 H = img.dim(0), W = img.dim(1), C = img.dim(2);
  if (H % p != 0 || W % p != 0) {
    throw ShapeError("pd_split: " + std::to_string(H) + "x" + std::to_string(W) +
                     " not divisible by p=" + std::to_string(p));
  }
  std::vector<Tensor<T>> subs;
  subs.reserve(static_cast<std::size_t>(p) * p);
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < p; ++b) {
      Tensor<T> sub({H / p, W / p, C});
      for (i64 i = 0; i < H / p; ++i)
        for (i64 j = 0; j < W / p; ++j)
          for (i64 c = 0; c < C; ++c) sub.at3(i, j, c) = img.at3(i64(p) * i + a, i64(p) * j + b, c);
      subs.push_back(std::move(sub));
    }
  }
  return subs;
}

template <typename T>
Tensor<T> pd_merge(const std::vector<Tensor<T>>& subs, int p) {
  if (p < 1) throw ConfigError("pd_merge: p must be >= 1");
  if (subs.size() != static_cast<std::size_t>(p) * p) {
    throw ShapeError("pd_merge: expected " + std::to_string(p * p) + " sub-images, got " +
                     std::to_string(subs.size()));
  }
  if (subs[0].rank() != 3) throw ShapeError("pd_merge: sub-images must be (H,W,C)");
  const Shape s0 = subs[0].shape();
  for (const auto& s : subs) {
    if (s.shape() != s0) throw ShapeError("pd_merge: sub-images must share one shape");
  }
  const i64 h = s0[0], w = s0[1], C = s0[2];
  Tensor<T> img({h * p, w * p, C});
  for (int a = 0; a < p; ++a)
    for (int b = 0; b < p; ++b) {
      const Tensor<T>& sub = subs[static_cast<std::size_t>(a) * p + b];
      for (i64 i = 0; i < h; ++i)
        for (i64 j = 0; j < w; ++j)
          for (i64 c = 0; c < C; ++c) img.at3(i64(p) * i + a, i64(p) * j + b, c) = sub.at3(i, j, c);
    }
  return img;
}

// ---------------------------------------------------------------------------
// Bayer packing: a single-channel raw mosaic becomes a quarter-resolution
// 4-channel image with the fixed phase order (0,0), (0,1), (1,0), (1,1).

template <typename T>
Tensor<T> bayer_split(const Tensor<T>& raw) {
  if (raw.rank() != 3 || raw.dim(2) != 1) throw ShapeError("bayer_split: raw must be (H,W,1)");
  const i64 H = raw.dim(0), W = raw.dim(1);
  if (H % 2 != 0 || W % 2 != 0) throw ShapeError("bayer_split: H and W must be even");
  Tensor<T> quad({H / 2, W / 2, 4});
  for (i64 i = 0; i < H / 2; ++i)
    for (i64 j = 0; j < W / 2; ++j)
      for (i64 a = 0; a < 2; ++a)
        for (i64 b = 0; b < 2; ++b) quad.at3(i, j, a * 2 + b) = raw.at3(2 * i + a, 2 * j + b, 0);
  return quad;
}

template <typename T>
Tensor<T> bayer_merge(const Tensor<T>& quad) {
  if (quad.rank() != 3 || quad.dim(2) != 4) throw ShapeError("bayer_merge: input must be (H,W,4)");
  const i64 h = quad.dim(0), w = quad.dim(1);
  Tensor<T> raw({h * 2, w * 2, 1});
  for (i64 i = 0; i < h; ++i)
    for (i64 j = 0; j < w; ++j)
      for (i64 a = 0; a < 2; ++a)
        for (i64 b = 0; b < 2; ++b) raw.at3(2 * i + a, 2 * j + b, 0) = quad.at3(i, j, a * 2 + b);
  return raw;
}

// ---------------------------------------------------------------------------
// Synthetic Gaussian noise.

/// Noise amplitude on the 0..255 scale; the draw happens per image when
/// per_image_sigma is set, otherwise the midpoint is used.
struct NoiseSpec {
  double sigma_min = 5.0;
  double sigma_max = 50.0;
  bool per_image_sigma = true;
};

inline void validate(const NoiseSpec& spec) {
  if (spec.sigma_min < 0 || spec.sigma_max < spec.sigma_min) {
    throw ConfigError("noise: need 0 <= sigma_min <= sigma_max");
  }
}

/// Adds i.i.d. zero-mean Gaussian noise scaled to the [0,1] range and clips.
/// The returned sample keeps the input pixels as its clean reference.
inline ImageSample add_gaussian(const ImageSample& img, const NoiseSpec& spec, Rng& rng) {
  validate(spec);
  const double sigma255 = spec.per_image_sigma ? rng.uniform(spec.sigma_min, spec.sigma_max)
                                               : 0.5 * (spec.sigma_min + spec.sigma_max);
  const double sigma = sigma255 / 255.0;
  ImageSample out;
  out.pixels = Tensor<float>(img.pixels.shape());
  for (i64 i = 0; i < img.pixels.size(); ++i) {
    const double v = static_cast<double>(img.pixels[i]) + sigma * rng.normal();
    out.pixels[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  out.clean = img.pixels;
  out.colorspace = img.colorspace;
  out.bit_depth = img.bit_depth;
  out.name = img.name;
  return out;
}

// ---------------------------------------------------------------------------
// Training augmentation: random square crop, rotation from {0, 90} degrees,
// and independent horizontal/vertical flips. Paired clean pixels receive
// exactly the same transform.

struct AugmentDraw {
  i64 y0 = 0;
  i64 x0 = 0;
  bool rot90 = false;
  bool flip_h = false;
  bool flip_v = false;
};

namespace detail {

template <typename T>
Tensor<T> apply_augment(const Tensor<T>& img, const AugmentDraw& d, i64 crop) {
  const i64 C = img.dim(2);
  Tensor<T> out({crop, crop, C});
  for (i64 r = 0; r < crop; ++r) {
    for (i64 c = 0; c < crop; ++c) {
      i64 sr = r, sc = c;
      if (d.flip_v) sr = crop - 1 - sr;
      if (d.flip_h) sc = crop - 1 - sc;
      // Inverse of a clockwise quarter turn.
      if (d.rot90) {
        const i64 tr = crop - 1 - sc;
        sc = sr;
        sr = tr;
      }
      for (i64 ch = 0; ch < C; ++ch) out.at3(r, c, ch) = img.at3(d.y0 + sr, d.x0 + sc, ch);
    }
  }
  return out;
}

}  // namespace detail

inline ImageSample augment_with(const ImageSample& img, const AugmentDraw& draw, i64 crop) {
  if (crop < 1 || crop > img.height() || crop > img.width()) {
    throw ShapeError("augment: crop " + std::to_string(crop) + " does not fit " +
                     std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  if (draw.y0 < 0 || draw.x0 < 0 || draw.y0 + crop > img.height() || draw.x0 + crop > img.width()) {
    throw ShapeError("augment: crop window out of bounds");
  }
  ImageSample out;
  out.pixels = detail::apply_augment(img.pixels, draw, crop);
  if (img.clean.defined()) out.clean = detail::apply_augment(img.clean, draw, crop);
  out.colorspace = img.colorspace;
  out.bit_depth = img.bit_depth;
  out.name = img.name;
  return out;
}

inline AugmentDraw draw_augment(const ImageSample& img, i64 crop, Rng& rng) {
  if (crop < 1 || crop > img.height() || crop > img.width()) {
    throw ShapeError("augment: crop " + std::to_string(crop) + " does not fit " +
                     std::to_string(img.height()) + "x" + std::to_string(img.width()));
  }
  AugmentDraw d;
  d.y0 = rng.index(img.height() - crop + 1);
  d.x0 = rng.index(img.width() - crop + 1);
  d.rot90 = rng.coin();
  d.flip_h = rng.coin();
  d.flip_v = rng.coin();
  return d;
}

inline ImageSample augment(const ImageSample& img, i64 crop, Rng& rng) {
  return augment_with(img, draw_augment(img, crop, rng), crop);
}

}  // namespace dtd
