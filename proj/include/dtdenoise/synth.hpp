// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "dtdenoise/image.hpp"
#include "dtdenoise/rng.hpp"
#include "dtdenoise/tensor.hpp"

// Synthetic clean images for tests and desk-scale training runs. Each image
// mixes low-frequency cosine waves, a couple of Gaussian blobs, and one soft
// edge, then rescales into [0.08, 0.92] so that added noise rarely clips and
// no channel slice is exactly constant.

namespace dtd {

inline Tensor<float> make_toy_image(i64 H, i64 W, i64 C, Rng& rng) {
  if (H < 1 || W < 1 || C < 1) throw ShapeError("make_toy_image: bad dimensions");
  const double tau = 6.283185307179586477;
  Tensor<double> field({H, W});

  struct Wave { double u, v, phase, amp; };
  std::vector<Wave> waves;
  for (int j = 0; j < 3; ++j) {
    waves.push_back({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0), rng.uniform(0.0, tau),
                     rng.uniform(0.5, 1.0)});
  }
  // One finer wave gives local texture that a plain neighbour average blurs.
  {
    const double su = rng.coin() ? 1.0 : -1.0;
    const double sv = rng.coin() ? 1.0 : -1.0;
    waves.push_back({su * rng.uniform(2.0, 5.0), sv * rng.uniform(2.0, 5.0),
                     rng.uniform(0.0, tau), rng.uniform(0.2, 0.4)});
  }

  struct Blob { double cy, cx, rho, amp; };
  std::vector<Blob> blobs;
  const double base_r = static_cast<double>(std::min(H, W));
  for (int j = 0; j < 2; ++j) {
    blobs.push_back({rng.uniform(0.0, static_cast<double>(H - 1)),
                     rng.uniform(0.0, static_cast<double>(W - 1)),
                     rng.uniform(0.10, 0.30) * base_r,
                     (rng.coin() ? 1.0 : -1.0) * rng.uniform(0.8, 1.6)});
  }

  const double edge_theta = rng.uniform(0.0, tau);
  const double edge_cy = rng.uniform(0.25, 0.75) * H;
  const double edge_cx = rng.uniform(0.25, 0.75) * W;
  const double edge_width = rng.uniform(1.5, 3.0);
  const double edge_amp = rng.uniform(0.5, 1.0);

  double fmin = 1e300, fmax = -1e300;
  for (i64 y = 0; y < H; ++y) {
    for (i64 x = 0; x < W; ++x) {
      double f = 0.0;
      for (const Wave& wv : waves) {
        f += wv.amp * std::cos(tau * (wv.u * x / W + wv.v * y / H) + wv.phase);
      }
      for (const Blob& bl : blobs) {
        const double dy = y - bl.cy, dx = x - bl.cx;
        f += bl.amp * std::exp(-(dy * dy + dx * dx) / (2.0 * bl.rho * bl.rho));
      }
      const double d = (x - edge_cx) * std::cos(edge_theta) + (y - edge_cy) * std::sin(edge_theta);
      f += edge_amp * std::tanh(d / edge_width);
      field.at2(y, x) = f;
      fmin = std::min(fmin, f);
      fmax = std::max(fmax, f);
    }
  }

  const double span = std::max(fmax - fmin, 1e-9);
  std::vector<double> gain(static_cast<std::size_t>(C)), bias(static_cast<std::size_t>(C));
  for (i64 c = 0; c < C; ++c) {
    gain[static_cast<std::size_t>(c)] = (C == 1) ? 1.0 : rng.uniform(0.75, 1.0);
    bias[static_cast<std::size_t>(c)] = (C == 1) ? 0.0 : rng.uniform(0.0, 0.08);
  }
  Tensor<float> img({H, W, C});
  for (i64 y = 0; y < H; ++y) {
    for (i64 x = 0; x < W; ++x) {
      const double g = (field.at2(y, x) - fmin) / span;
      for (i64 c = 0; c < C; ++c) {
        const double v = 0.08 + 0.84 * std::clamp(bias[static_cast<std::size_t>(c)] +
                                                      gain[static_cast<std::size_t>(c)] * g,
                                                  0.0, 1.0);
        img.at3(y, x, c) = static_cast<float>(v);
      }
    }
  }
  return img;
}

inline std::vector<ImageSample> make_toy_dataset(int count, i64 H, i64 W, i64 C,
                                                 std::uint64_t seed,
                                                 Colorspace cs = Colorspace::kGrey) {
  if (count < 1) throw ConfigError("make_toy_dataset: count must be >= 1");
  Rng rng(seed);
  std::vector<ImageSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    ImageSample s;
    s.pixels = make_toy_image(H, W, C, rng);
    s.colorspace = cs;
    s.bit_depth = 8;
    char buf[16];
    std::snprintf(buf, sizeof(buf), "toy%03d", i);
    s.name = buf;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dtd
