// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/tensor.hpp"

// Global-aware mask mapper. A stride-s masker turns one noisy image into
// s^2 blind images: entry (a, b) replaces every pixel at (r, c) with
// r = a (mod s), c = b (mod s) by the mean of its valid 4-neighbours in the
// original image and leaves all other pixels untouched. The masked sets of
// the s^2 entries partition the pixel grid, so a network that only ever sees
// blind entry k at the positions masked in k never sees the pixel it is
// asked to predict.

namespace dtd {

using PixelPos = std::pair<i64, i64>;

template <typename T>
struct BlindStack {
  std::vector<Tensor<T>> blinds;                  // s^2 images, each (H, W, C)
  std::vector<std::vector<PixelPos>> mask_positions;  // per entry, row-major
  int stride = 1;
};

template <typename T>
BlindStack<T> mask_map(const Tensor<T>& img, int s) {
  if (img.rank() != 3) throw ShapeError("mask_map: image must be (H,W,C)");
  const i64 H = img.dim(0), W = img.dim(1), C = img.dim(2);
  if (s < 1 || s > H || s > W) {
    throw ConfigError("mask_map: stride " + std::to_string(s) + " must lie in [1, min(H,W)] for " +
                      std::to_string(H) + "x" + std::to_string(W));
  }
  BlindStack<T> stack;
  stack.stride = s;
  stack.blinds.reserve(static_cast<std::size_t>(s) * s);
  stack.mask_positions.resize(static_cast<std::size_t>(s) * s);
  for (int a = 0; a < s; ++a) {
    for (int b = 0; b < s; ++b) {
      const std::size_t k = static_cast<std::size_t>(a) * s + b;
      Tensor<T> blind = img.clone();
      auto& positions = stack.mask_positions[k];
      for (i64 r = a; r < H; r += s) {
        for (i64 c = b; c < W; c += s) {
          positions.emplace_back(r, c);
          for (i64 ch = 0; ch < C; ++ch) {
            double sum = 0.0;
            int n = 0;
            if (r > 0) { sum += img.at3(r - 1, c, ch); ++n; }
            if (r + 1 < H) { sum += img.at3(r + 1, c, ch); ++n; }
            if (c > 0) { sum += img.at3(r, c - 1, ch); ++n; }
            if (c + 1 < W) { sum += img.at3(r, c + 1, ch); ++n; }
            blind.at3(r, c, ch) = static_cast<T>(sum / n);
          }
        }
      }
      stack.blinds.push_back(std::move(blind));
    }
  }
  return stack;
}

/// Reassembles one full-resolution image by reading each pixel from the
/// blind entry in which that pixel was masked.
template <typename T>
Tensor<T> collect_blind(const std::vector<Tensor<T>>& outputs, const BlindStack<T>& stack) {
  const std::size_t n = stack.blinds.size();
  if (n == 0) throw ShapeError("collect_blind: empty blind stack");
  if (outputs.size() != n) {
    throw ShapeError("collect_blind: expected " + std::to_string(n) + " outputs, got " +
                     std::to_string(outputs.size()));
  }
  const Shape& shape = stack.blinds[0].shape();
  for (const auto& out : outputs) {
    if (out.shape() != shape) throw ShapeError("collect_blind: output shape mismatch");
  }
  const i64 C = shape[2];
  Tensor<T> result(shape);
  for (std::size_t k = 0; k < n; ++k) {
    for (const PixelPos& pos : stack.mask_positions[k]) {
      for (i64 ch = 0; ch < C; ++ch) {
        result.at3(pos.first, pos.second, ch) = outputs[k].at3(pos.first, pos.second, ch);
      }
    }
  }
  return result;
}

}  // namespace dtd
