// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/tensor.hpp"

// Image quality metrics and report emission. Metrics accumulate in double
// regardless of the tensor's scalar type and assume pixel values in [0, 1].

namespace dtd {

/// Peak signal-to-noise ratio in dB over all entries of two equal-shape
/// tensors. Identical inputs give +infinity; display code caps that at 99.
template <typename T>
double psnr(const Tensor<T>& a, const Tensor<T>& b, double peak = 1.0) {
  if (!a.same_shape(b)) {
    throw ShapeError("psnr: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (peak <= 0.0) throw ConfigError("psnr: peak must be positive");
  const T* pa = a.data();
  const T* pb = b.data();
  double mse = 0.0;
  for (i64 i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(pa[i]) - static_cast<double>(pb[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

/// dB value as shown in tables: infinities cap at 99.
inline double display_db(double v) { return std::min(v, 99.0); }

namespace detail {

// Normalized 1-D Gaussian taps at integer offsets -radius..radius.
inline std::vector<double> gaussian_taps(int radius, double sigma) {
  std::vector<double> w(2 * radius + 1);
  double total = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    w[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    total += w[i + radius];
  }
  for (double& v : w) v /= total;
  return w;
}

// Mean SSIM of one channel plane over every position where the full
// window fits, with Gaussian-weighted local statistics.
template <typename T>
double ssim_plane(const T* pa, const T* pb, i64 H, i64 W, i64 stride) {
  constexpr int kRadius = 5;
  constexpr double kC1 = 0.01 * 0.01;
  constexpr double kC2 = 0.03 * 0.03;
  static const std::vector<double> w1d = gaussian_taps(kRadius, 1.5);
  double acc = 0.0;
  i64 count = 0;
  for (i64 ci = kRadius; ci < H - kRadius; ++ci) {
    for (i64 cj = kRadius; cj < W - kRadius; ++cj) {
      double sx = 0.0, sy = 0.0, sxx = 0.0, syy = 0.0, sxy = 0.0;
      for (int di = -kRadius; di <= kRadius; ++di) {
        const double wi = w1d[di + kRadius];
        const i64 row = (ci + di) * W;
        for (int dj = -kRadius; dj <= kRadius; ++dj) {
          const double wt = wi * w1d[dj + kRadius];
          const i64 at = (row + cj + dj) * stride;
          const double x = static_cast<double>(pa[at]);
          const double y = static_cast<double>(pb[at]);
          sx += wt * x;
          sy += wt * y;
          sxx += wt * x * x;
          syy += wt * y * y;
          sxy += wt * x * y;
        }
      }
      const double vx = sxx - sx * sx;
      const double vy = syy - sy * sy;
      const double vxy = sxy - sx * sy;
      acc += ((2.0 * sx * sy + kC1) * (2.0 * vxy + kC2)) /
             ((sx * sx + sy * sy + kC1) * (vx + vy + kC2));
      ++count;
    }
  }
  return acc / static_cast<double>(count);
}

}  // namespace detail

/// Structural similarity over an (H, W) or (H, W, C) image pair with the
/// standard 11x11 Gaussian window (sigma 1.5) and K1=0.01, K2=0.03 on a
/// [0, 1] range. Channels are scored independently and averaged.
template <typename T>
double ssim(const Tensor<T>& a, const Tensor<T>& b) {
  if (!a.same_shape(b)) {
    throw ShapeError("ssim: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  if (a.rank() != 2 && a.rank() != 3) {
    throw ShapeError("ssim: expected (H,W) or (H,W,C), got " + shape_str(a.shape()));
  }
  const i64 H = a.dim(0);
  const i64 W = a.dim(1);
  const i64 C = a.rank() == 3 ? a.dim(2) : 1;
  if (H < 11 || W < 11) {
    throw ShapeError("ssim: image " + shape_str(a.shape()) + " smaller than the 11x11 window");
  }
  double total = 0.0;
  for (i64 c = 0; c < C; ++c) {
    total += detail::ssim_plane(a.data() + c, b.data() + c, H, W, C);
  }
  return total / static_cast<double>(C);
}

/// One scored image.
struct EvalEntry {
  std::string name;
  double psnr_db = 0.0;
  double ssim = 0.0;
};

/// Per-image scores plus dataset means.
struct EvalResult {
  std::vector<EvalEntry> entries;
  double mean_psnr = 0.0;
  double mean_ssim = 0.0;
};

inline EvalResult make_eval_result(std::vector<EvalEntry> entries) {
  EvalResult r;
  r.entries = std::move(entries);
  if (!r.entries.empty()) {
    for (const auto& e : r.entries) {
      r.mean_psnr += e.psnr_db;
      r.mean_ssim += e.ssim;
    }
    r.mean_psnr /= static_cast<double>(r.entries.size());
    r.mean_ssim /= static_cast<double>(r.entries.size());
  }
  return r;
}

/// One completed training epoch.
struct CurveRecord {
  i64 epoch = 0;
  double mean_loss = 0.0;
  double val_psnr = 0.0;
  double val_ssim = 0.0;
  double lr = 0.0;
};

namespace detail {

inline std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Polyline plot of one series with its maximum annotated. `y0` is the top
// of the panel in SVG coordinates.
inline std::string svg_panel(const std::vector<double>& xs, const std::vector<double>& ys,
                             double y0, const std::string& label, const char* value_spec) {
  const double kW = 560.0, kH = 150.0, kPad = 40.0;
  double xmin = xs.front(), xmax = xs.back();
  if (xmax == xmin) xmax = xmin + 1.0;
  double ymin = ys[0], ymax = ys[0];
  for (double v : ys) {
    ymin = std::min(ymin, v);
    ymax = std::max(ymax, v);
  }
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  auto px = [&](double x) { return kPad + (x - xmin) / (xmax - xmin) * (kW - 2 * kPad); };
  auto py = [&](double y) { return y0 + kH - kPad - (y - ymin) / (ymax - ymin) * (kH - 2 * kPad); };
  std::size_t best = 0;
  for (std::size_t i = 1; i < ys.size(); ++i) {
    if (ys[i] > ys[best]) best = i;
  }
  std::string s;
  s += "<polyline fill=\"none\" stroke=\"#2266cc\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) {
    s += fmt(px(xs[i]), "%.2f") + "," + fmt(py(ys[i]), "%.2f") + " ";
  }
  s += "\"/>\n";
  s += "<circle cx=\"" + fmt(px(xs[best]), "%.2f") + "\" cy=\"" + fmt(py(ys[best]), "%.2f") +
       "\" r=\"3\" fill=\"#cc3322\"/>\n";
  s += "<text x=\"" + fmt(kPad, "%.1f") + "\" y=\"" + fmt(y0 + 16.0, "%.1f") +
       "\" font-family=\"sans-serif\" font-size=\"12\">" + label + ": max " +
       fmt(ys[best], value_spec) + " at epoch " + fmt(xs[best], "%.0f") + "</text>\n";
  return s;
}

}  // namespace detail

/// Writes `summary.csv` (one row per image plus a mean row) and, when the
/// curve is non-empty, `curve.svg` with the maximum validation PSNR and
/// SSIM annotated. Creates `out_dir` if needed.
inline void emit_report(const EvalResult& results, const std::vector<CurveRecord>& curve,
                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("emit_report: cannot create " + out_dir.string() + ": " + ec.message());

  const auto csv_path = out_dir / "summary.csv";
  {
    std::ofstream csv(csv_path);
    if (!csv) throw IoError("emit_report: cannot open " + csv_path.string());
    csv << "name,psnr_db,ssim\n";
    for (const auto& e : results.entries) {
      csv << e.name << "," << detail::fmt(display_db(e.psnr_db)) << "," << detail::fmt(e.ssim)
          << "\n";
    }
    if (!results.entries.empty()) {
      csv << "mean," << detail::fmt(display_db(results.mean_psnr)) << ","
          << detail::fmt(results.mean_ssim) << "\n";
    }
    if (!csv.good()) throw IoError("emit_report: write failed for " + csv_path.string());
  }

  if (curve.empty()) return;
  std::vector<double> xs, psnrs, ssims;
  xs.reserve(curve.size());
  for (const auto& r : curve) {
    xs.push_back(static_cast<double>(r.epoch));
    psnrs.push_back(r.val_psnr);
    ssims.push_back(r.val_ssim);
  }
  const auto svg_path = out_dir / "curve.svg";
  std::ofstream svg(svg_path);
  if (!svg) throw IoError("emit_report: cannot open " + svg_path.string());
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"560\" height=\"310\">\n";
  svg << detail::svg_panel(xs, psnrs, 0.0, "validation PSNR (dB)", "%.2f");
  svg << detail::svg_panel(xs, ssims, 155.0, "validation SSIM", "%.4f");
  svg << "</svg>\n";
  if (!svg.good()) throw IoError("emit_report: write failed for " + svg_path.string());
}

}  // namespace dtd
