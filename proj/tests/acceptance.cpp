// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0

// Release gate: nine checks covering exact transforms, gradients, the
// zero-init identity, loss locality, the learning-rate schedule, the toy
// denoising experiment, the ablation ordering, metric oracles, and
// checkpoint fidelity. Prints one [PASS]/[FAIL] line per check and exits
// nonzero if any fail.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtdenoise/cli.hpp"
#include "dtdenoise/config.hpp"
#include "dtdenoise/conv.hpp"
#include "dtdenoise/grad_check.hpp"
#include "dtdenoise/image.hpp"
#include "dtdenoise/mask.hpp"
#include "dtdenoise/metrics.hpp"
#include "dtdenoise/model.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/rng.hpp"
#include "dtdenoise/synth.hpp"
#include "dtdenoise/trainer.hpp"

using namespace dtd;

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

double since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

template <typename T>
Tensor<T> random_tensor(const Shape& shape, Rng& rng, T lo = T(0), T hi = T(1)) {
  Tensor<T> t(shape);
  for (i64 i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// ---------------------------------------------------------------------------
// 1. Split/merge round trips and the mask partition property.

Outcome check_exact_transforms() {
  const auto t0 = Clock::now();
  Outcome o;
  Rng rng(101);
  for (int k = 0; k < 100; ++k) {
    const int p = (k % 2 == 0) ? 2 : 4;
    const i64 H = p * (2 + rng.index(5));
    const i64 W = p * (2 + rng.index(5));
    const i64 C = 1 + rng.index(3);
    const Tensor<float> img = random_tensor<float>({H, W, C}, rng);
    const Tensor<float> merged = pd_merge(pd_split(img, p), p);
    for (i64 i = 0; i < img.size(); ++i) {
      if (merged[i] != img[i]) {
        o.detail = "pd round trip differs at flat index " + std::to_string(i);
        return o;
      }
    }
    const i64 He = H + (H % 2), We = W + (W % 2);
    const Tensor<float> raw = random_tensor<float>({He, We, i64(1)}, rng);
    const Tensor<float> back = bayer_merge(bayer_split(raw));
    for (i64 i = 0; i < raw.size(); ++i) {
      if (back[i] != raw[i]) {
        o.detail = "bayer round trip differs at flat index " + std::to_string(i);
        return o;
      }
    }
  }
  for (i64 H : {8, 12, 16}) {
    for (i64 W : {8, 12, 16}) {
      for (int s : {1, 2, 4}) {
        const Tensor<float> img = random_tensor<float>({H, W, i64(1)}, rng);
        const BlindStack<float> stack = mask_map(img, s);
        if (static_cast<int>(stack.mask_positions.size()) != s * s) {
          o.detail = "expected " + std::to_string(s * s) + " masked sets";
          return o;
        }
        std::vector<int> hits(static_cast<std::size_t>(H * W), 0);
        for (const auto& set : stack.mask_positions) {
          for (const auto& [r, c] : set) ++hits[static_cast<std::size_t>(r * W + c)];
        }
        for (std::size_t i = 0; i < hits.size(); ++i) {
          if (hits[i] != 1) {
            o.detail = "pixel " + std::to_string(i) + " covered " + std::to_string(hits[i]) +
                       " times (H=" + std::to_string(H) + ", W=" + std::to_string(W) +
                       ", s=" + std::to_string(s) + ")";
            return o;
          }
        }
      }
    }
  }
  o.seconds = since(t0);
  o.pass = o.seconds < 60.0;
  o.detail = "100 split/merge round trips bit-exact, masked sets partition 27 grids (" +
             fmt(o.seconds, 1) + " s)";
  if (!o.pass) o.detail += " [over the 60 s budget]";
  return o;
}

// ---------------------------------------------------------------------------
// 2. Central finite differences against every analytic gradient, 20 seeds
// per operation at 64-bit. eps sits below each LeakyReLU preactivation's
// distance to the kink so the differences never straddle the slope change.

template <typename F>
double grad_worst(const char* label, F make_check, bool& all_ok, std::string& detail) {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const GradReport<double> report = make_check(seed);
    worst = std::max(worst, report.worst);
    if (!report.ok) {
      all_ok = false;
      if (detail.empty()) {
        detail = std::string(label) + " seed " + std::to_string(seed) + " worst " +
                 fmt(report.worst, 8);
      }
    }
  }
  return worst;
}

MsaParams<double> random_msa(i64 C, int window, int heads, Rng& rng) {
  const i64 span = 2 * window - 1;
  MsaParams<double> p;
  p.wq = make_var(random_tensor<double>({C, C}, rng, -1.0, 1.0));
  p.bq = make_var(random_tensor<double>({C}, rng, -1.0, 1.0));
  p.wk = make_var(random_tensor<double>({C, C}, rng, -1.0, 1.0));
  p.bk = make_var(random_tensor<double>({C}, rng, -1.0, 1.0));
  p.wv = make_var(random_tensor<double>({C, C}, rng, -1.0, 1.0));
  p.bv = make_var(random_tensor<double>({C}, rng, -1.0, 1.0));
  p.wo = make_var(random_tensor<double>({C, C}, rng, -1.0, 1.0));
  p.bo = make_var(random_tensor<double>({C}, rng, -1.0, 1.0));
  p.bias_table = make_var(random_tensor<double>({span * span, heads}, rng, -0.5, 0.5));
  return p;
}

std::vector<GradCheckInput<double>> all_params(ParamStore<double>& store) {
  std::vector<GradCheckInput<double>> inputs;
  for (const auto& e : store.entries()) inputs.push_back({e.name, e.var});
  return inputs;
}

Outcome check_gradients() {
  const auto t0 = Clock::now();
  Outcome o;
  bool ok = true;
  std::string first_fail;
  const double eps = 1e-5;
  double worst = 0.0;

  worst = std::max(worst, grad_worst("conv2d", [&](std::uint64_t seed) {
    Rng rng(1000 + seed);
    auto x = make_var(random_tensor<double>({1, 4, 4, 3}, rng, -1.0, 1.0));
    auto w = make_var(random_tensor<double>({3, 3, 3, 4}, rng, -0.6, 0.6));
    auto b = make_var(random_tensor<double>({4}, rng, -0.5, 0.5));
    return grad_check<double>([&] { return conv2d(x, w, b); },
                              {{"x", x}, {"w", w}, {"b", b}}, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("deformable_conv2d", [&](std::uint64_t seed) {
    Rng rng(2000 + seed);
    auto x = make_var(random_tensor<double>({1, 4, 4, 2}, rng, -1.0, 1.0));
    auto w = make_var(random_tensor<double>({3, 3, 2, 3}, rng, -0.6, 0.6));
    auto b = make_var(random_tensor<double>({3}, rng, -0.5, 0.5));
    auto off = make_var(random_tensor<double>({1, 4, 4, 18}, rng, -0.4, 0.4));
    return grad_check<double>([&] { return deformable_conv2d(x, w, b, off); },
                              {{"x", x}, {"w", w}, {"b", b}, {"off", off}}, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("layer_norm", [&](std::uint64_t seed) {
    Rng rng(3000 + seed);
    auto x = make_var(random_tensor<double>({2, 4, 6}, rng, -1.0, 1.0));
    auto gain = make_var(random_tensor<double>({6}, rng, 0.5, 1.5));
    auto shift = make_var(random_tensor<double>({6}, rng, -0.5, 0.5));
    return grad_check<double>([&] { return layer_norm(x, 2, gain, shift); },
                              {{"x", x}, {"gain", gain}, {"shift", shift}}, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("window_msa", [&](std::uint64_t seed) {
    Rng rng(4000 + seed);
    auto p = random_msa(4, 2, 2, rng);
    auto x = make_var(random_tensor<double>({1, 4, 4, 4}, rng, -1.0, 1.0));
    return grad_check<double>(
        [&] { return window_msa(x, p, 2, 2); },
        {{"x", x}, {"wq", p.wq}, {"bq", p.bq}, {"wk", p.wk}, {"bk", p.bk}, {"wv", p.wv},
         {"bv", p.bv}, {"wo", p.wo}, {"bo", p.bo}, {"bias_table", p.bias_table}},
        eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("mlp", [&](std::uint64_t seed) {
    Rng rng(5000 + seed);
    MlpParams<double> p;
    p.w1 = make_var(random_tensor<double>({6, 12}, rng, -0.6, 0.6));
    p.b1 = make_var(random_tensor<double>({12}, rng, -0.5, 0.5));
    p.w2 = make_var(random_tensor<double>({12, 6}, rng, -0.6, 0.6));
    p.b2 = make_var(random_tensor<double>({6}, rng, -0.5, 0.5));
    auto x = make_var(random_tensor<double>({3, 5, 6}, rng, -1.0, 1.0));
    return grad_check<double>(
        [&] { return mlp(x, p); },
        {{"x", x}, {"w1", p.w1}, {"b1", p.b1}, {"w2", p.w2}, {"b2", p.b2}}, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("lfe_forward", [&](std::uint64_t seed) {
    Rng rng(6000 + seed);
    ParamStore<double> store;
    LfeParams<double> p = make_lfe_params<double>(store, "lfe", 16, rng);
    for (const char* name : {"lfe.off1.w", "lfe.off2.w"}) {
      Var<double> w = store.get(name);
      for (i64 i = 0; i < w->value.size(); ++i) w->value[i] = rng.uniform(0.05, 0.15);
    }
    auto x = make_var(random_tensor<double>({1, 4, 4, 16}, rng, -1.0, 1.0));
    auto inputs = all_params(store);
    inputs.push_back({"x", x});
    return grad_check<double>([&] { return lfe_forward(x, p); }, inputs, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("encoder_forward", [&](std::uint64_t seed) {
    Rng rng(7000 + seed);
    ParamStore<double> store;
    EncoderParams<double> p = make_encoder_params<double>(store, "enc", 8, 2, 2, rng);
    Var<double> bt = store.get("enc.msa.bias_table");
    for (i64 i = 0; i < bt->value.size(); ++i) bt->value[i] = rng.uniform(-0.3, 0.3);
    auto x = make_var(random_tensor<double>({1, 4, 4, 8}, rng, -1.0, 1.0));
    auto inputs = all_params(store);
    inputs.push_back({"x", x});
    return grad_check<double>([&] { return encoder_forward(x, p, 2, 2); }, inputs, eps);
  }, ok, first_fail));

  worst = std::max(worst, grad_worst("sne_forward", [&](std::uint64_t seed) {
    Rng rng(8000 + seed);
    ParamStore<double> store;
    SneParams<double> p = make_sne_params<double>(store, 3, 2, rng);
    for (const char* name : {"sne.mlp.w2", "sne.mlp.b2"}) {
      Var<double> v = store.get(name);
      for (i64 i = 0; i < v->value.size(); ++i) v->value[i] = rng.uniform(-0.5, 0.5);
    }
    auto x = make_var(random_tensor<double>({1, 4, 4, 3}, rng, -1.0, 1.0));
    auto inputs = all_params(store);
    inputs.push_back({"x", x});
    return grad_check<double>([&] { return sne_forward(x, p); }, inputs, eps);
  }, ok, first_fail));

  o.seconds = since(t0);
  o.pass = ok && o.seconds < 600.0;
  o.detail = "8 operations x 20 seeds, worst relative error " + fmt(worst, 8) + " (" +
             fmt(o.seconds, 1) + " s)";
  if (!ok) o.detail = "gradient mismatch: " + first_fail;
  if (ok && o.seconds >= 600.0) o.detail += " [over the 600 s budget]";
  return o;
}

// ---------------------------------------------------------------------------
// 3. Zero-init identity: a fresh model is the identity on its blind inputs,
// so full inference equals the analytic neighbor-mean fill, and a constant
// image passes through unchanged.

Tensor<float> fill_oracle(const Tensor<float>& img) {
  const i64 H = img.dim(0), W = img.dim(1), C = img.dim(2);
  Tensor<float> out(img.shape());
  for (i64 i = 0; i < H; ++i) {
    for (i64 j = 0; j < W; ++j) {
      for (i64 c = 0; c < C; ++c) {
        double acc = 0.0;
        int count = 0;
        if (i > 0) acc += static_cast<double>(img.at3(i - 1, j, c)), ++count;
        if (i + 1 < H) acc += static_cast<double>(img.at3(i + 1, j, c)), ++count;
        if (j > 0) acc += static_cast<double>(img.at3(i, j - 1, c)), ++count;
        if (j + 1 < W) acc += static_cast<double>(img.at3(i, j + 1, c)), ++count;
        out.at3(i, j, c) = static_cast<float>(acc / count);
      }
    }
  }
  return out;
}

Outcome check_zero_init_identity() {
  const auto t0 = Clock::now();
  Outcome o;
  ModelConfig cfg = preset_config("toy").model;
  DenoiserModel<float> model(cfg, 5);

  Tensor<float> flat({64, 64, 1});
  flat.fill(0.43f);
  const Tensor<float> flat_out = model.full_inference(flat);
  for (i64 i = 0; i < flat.size(); ++i) {
    if (flat_out[i] != flat[i]) {
      o.detail = "constant image not returned exactly at index " + std::to_string(i);
      return o;
    }
  }

  Rng rng(303);
  for (int k = 0; k < 10; ++k) {
    const Tensor<float> img = random_tensor<float>({64, 64, 1}, rng);
    const Tensor<float> got = model.full_inference(img);
    const Tensor<float> want = fill_oracle(img);
    for (i64 i = 0; i < img.size(); ++i) {
      if (got[i] != want[i]) {
        o.detail = "fill oracle mismatch, image " + std::to_string(k) + ", index " +
                   std::to_string(i);
        return o;
      }
    }
  }
  o.seconds = since(t0);
  o.pass = o.seconds < 60.0;
  o.detail = "constant exact, 10 images equal the neighbor-mean fill bit for bit (" +
             fmt(o.seconds, 1) + " s)";
  if (!o.pass) o.detail += " [over the 60 s budget]";
  return o;
}

// ---------------------------------------------------------------------------
// 4. Loss locality: unmasked predictions cannot influence the loss.

Outcome check_loss_locality() {
  Outcome o;
  Rng rng(77);
  for (int trial = 0; trial < 50; ++trial) {
    const i64 N = 1 + rng.index(3), H = 4 + rng.index(4), W = 4 + rng.index(4);
    const i64 size = N * H * W;
    Tensor<float> pred_t = random_tensor<float>({N, H, W, i64(1)}, rng);
    const Tensor<float> noisy_t = random_tensor<float>({N, H, W, i64(1)}, rng);
    std::vector<i64> mask;
    for (i64 i = 0; i < size; ++i) {
      if (rng.uniform(0.0, 1.0) < 0.3) mask.push_back(i);
    }
    if (mask.empty()) mask.push_back(rng.index(size));
    std::vector<bool> masked(static_cast<std::size_t>(size), false);
    for (i64 i : mask) masked[static_cast<std::size_t>(i)] = true;

    const float base =
        blind_l2_loss(make_var(pred_t, false), make_const(noisy_t), mask)->value[0];
    Tensor<float> poked = pred_t;
    for (i64 i = 0; i < size; ++i) {
      if (!masked[static_cast<std::size_t>(i)]) {
        poked[i] = static_cast<float>(rng.uniform(-100.0, 100.0));
      }
    }
    const float after =
        blind_l2_loss(make_var(poked, false), make_const(noisy_t), mask)->value[0];
    if (base != after) {
      o.detail = "trial " + std::to_string(trial) + ": loss moved from " + fmt(base, 9) +
                 " to " + fmt(after, 9);
      return o;
    }
  }
  o.pass = true;
  o.detail = "50 trials bit-exact under unmasked perturbations";
  return o;
}

// ---------------------------------------------------------------------------
// 5. Learning-rate schedule, checked against a running product.

Outcome check_schedule() {
  Outcome o;
  TrainConfig cfg;
  cfg.lr_init = 3e-4;
  cfg.lr_gamma = 0.25;
  cfg.lr_step = 20;
  double expected = cfg.lr_init;
  for (int e = 0; e < 100; ++e) {
    if (e > 0 && e % cfg.lr_step == 0) expected *= cfg.lr_gamma;
    if (lr_at_epoch(cfg, e) != expected) {
      o.detail = "epoch " + std::to_string(e) + ": got " + fmt(lr_at_epoch(cfg, e), 12) +
                 ", want " + fmt(expected, 12);
      return o;
    }
  }
  o.pass = true;
  o.detail = "lr(e) = 3e-4 * 0.25^(e/20) exact for all e in [0, 100)";
  return o;
}

// ---------------------------------------------------------------------------
// 6 + 7. The toy experiment and the ablation grid share one set of runs.

struct GridResult {
  double mean_over_noisy = 0.0;  // full model, mean (best - noisy) over seeds
  double means[4] = {};          // per-variant mean best PSNR
  double full_seconds = 0.0;     // wall time of the three full-model runs
  double grid_seconds = 0.0;
  std::string table;
  bool ran = false;
};

GridResult run_grid(const fs::path& root) {
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
  const std::vector<std::uint64_t> seeds = {1, 2, 3};

  GridResult g;
  const auto grid_t0 = Clock::now();
  std::ostringstream table;
  table << "variant,seed,noisy_psnr,best_psnr\n";
  for (int vi = 0; vi < 4; ++vi) {
    const Variant& v = kVariants[vi];
    double acc = 0.0, acc_gain = 0.0;
    for (std::uint64_t seed : seeds) {
      RunConfig cfg = preset_config("toy");
      cfg.model.stack.enable_local = v.local;
      cfg.model.enable_sne = v.sne;
      cfg.train.seed = seed;
      cfg.out_dir = (root / v.dir / ("seed" + std::to_string(seed))).string();
      const auto run_t0 = Clock::now();
      const RunSummary sum = detail::run_training(cfg);
      const double run_s = since(run_t0);
      if (vi == 3) g.full_seconds += run_s;
      acc += sum.best_psnr;
      acc_gain += sum.best_psnr - sum.noisy_psnr;
      table << v.name << "," << seed << "," << fmt(sum.noisy_psnr, 4) << ","
            << fmt(sum.best_psnr, 4) << "\n";
      std::cerr << "  [grid] " << v.name << " seed " << seed << ": noisy "
                << fmt(sum.noisy_psnr, 2) << " dB, best " << fmt(sum.best_psnr, 2) << " dB ("
                << fmt(run_s, 0) << " s)\n";
    }
    g.means[vi] = acc / 3.0;
    if (vi == 3) g.mean_over_noisy = acc_gain / 3.0;
  }
  g.grid_seconds = since(grid_t0);
  g.table = table.str();
  g.ran = true;
  return g;
}

Outcome check_toy_experiment(const GridResult& g) {
  Outcome o;
  o.seconds = g.full_seconds;
  const bool margin = g.mean_over_noisy >= 2.0;
  o.pass = g.ran && margin && g.full_seconds < 1800.0;
  o.detail = "full model beats the noisy input by " + fmt(g.mean_over_noisy, 2) +
             " dB on average over 3 seeds (need >= 2.00, " + fmt(g.full_seconds, 0) + " s)";
  if (!margin) o.detail += " [margin too small]";
  if (g.full_seconds >= 1800.0) o.detail += " [over the 1800 s budget]";
  return o;
}

Outcome check_ablation(const GridResult& g) {
  Outcome o;
  o.seconds = g.grid_seconds;
  const double base = g.means[0], sne = g.means[1], cadt = g.means[2], full = g.means[3];
  const bool ordered = full >= cadt && cadt >= base;
  const bool gap = cadt - base >= 0.3;
  o.pass = g.ran && ordered && gap && g.grid_seconds < 7200.0;
  o.detail = "mean best PSNR: baseline " + fmt(base, 2) + ", +SNE " + fmt(sne, 2) + ", +CADT " +
             fmt(cadt, 2) + ", +CADT+SNE " + fmt(full, 2) + " dB; +CADT-baseline " +
             fmt(cadt - base, 2) + " dB (" + fmt(g.grid_seconds, 0) + " s)";
  if (!ordered) o.detail += " [ordering violated]";
  if (!gap) o.detail += " [gap below 0.3 dB]";
  if (g.grid_seconds >= 7200.0) o.detail += " [over the 7200 s budget]";
  return o;
}

// ---------------------------------------------------------------------------
// 8. Metric oracles: frozen reference values plus closed forms.

struct OracleLcg {
  std::uint64_t state;
  explicit OracleLcg(std::uint64_t seed) : state(seed) {}
  double next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<double>(state >> 40) / 16777216.0;
  }
};

Tensor<double> lcg_tensor(const Shape& shape, std::uint64_t seed) {
  Tensor<double> t(shape);
  OracleLcg lcg(seed);
  for (i64 i = 0; i < t.size(); ++i) t[i] = lcg.next();
  return t;
}

Outcome check_metric_oracles() {
  Outcome o;
  const fs::path path = fs::path(DTD_TEST_DATA_DIR) / "metric_oracle.json";
  std::ifstream in(path);
  if (!in) {
    o.detail = "cannot open " + path.string();
    return o;
  }
  nlohmann::json doc;
  in >> doc;
  double worst_psnr = 0.0, worst_ssim = 0.0;
  int cases = 0;
  for (const auto& c : doc["cases"]) {
    const i64 h = c["h"], w = c["w"], ch = c["c"];
    const double amp = c["amp"];
    Tensor<double> a = lcg_tensor({h, w, ch}, c["seed_a"].get<std::uint64_t>());
    Tensor<double> noise = lcg_tensor({h, w, ch}, c["seed_b"].get<std::uint64_t>());
    Tensor<double> b(a.shape());
    for (i64 i = 0; i < a.size(); ++i) {
      b[i] = std::clamp(a[i] + amp * (noise[i] - 0.5), 0.0, 1.0);
    }
    if (ch == 1) {
      a = a.reshaped({h, w});
      b = b.reshaped({h, w});
    }
    worst_psnr = std::max(worst_psnr, std::abs(psnr(a, b) - c["psnr"].get<double>()));
    worst_ssim = std::max(worst_ssim, std::abs(ssim(a, b) - c["ssim"].get<double>()));
    ++cases;
  }
  if (cases != 50 || worst_psnr >= 1e-6 || worst_ssim >= 1e-4) {
    o.detail = std::to_string(cases) + " cases, worst PSNR gap " + fmt(worst_psnr, 9) +
               " dB, worst SSIM gap " + fmt(worst_ssim, 9);
    return o;
  }

  Rng rng(909);
  Tensor<double> a({16, 24});
  for (i64 i = 0; i < a.size(); ++i) a[i] = rng.uniform(0.1, 0.8);
  Tensor<double> b(a.shape());
  for (i64 i = 0; i < a.size(); ++i) b[i] = a[i] + 0.1;
  const double offset_gap = std::abs(psnr(a, b) - 20.0);

  const double c1 = 0.3, c2 = 0.55, kC1 = 0.01 * 0.01;
  Tensor<double> u({16, 16}), v({16, 16});
  u.fill(c1);
  v.fill(c2);
  const double lum = (2.0 * c1 * c2 + kC1) / (c1 * c1 + c2 * c2 + kC1);
  const double ssim_gap = std::abs(ssim(u, v) - lum);
  if (offset_gap >= 1e-9 || ssim_gap >= 1e-9) {
    o.detail = "closed forms: offset gap " + fmt(offset_gap, 12) + ", luminance gap " +
               fmt(ssim_gap, 12);
    return o;
  }
  o.pass = true;
  o.detail = "50 reference pairs within 1e-6 dB / 1e-4 SSIM, closed forms within 1e-9";
  return o;
}

// ---------------------------------------------------------------------------
// 9. Checkpoint fidelity over 5 optimizer steps.

Outcome check_checkpoint_fidelity(const fs::path& root) {
  Outcome o;
  ModelConfig mcfg;
  mcfg.stack = StackConfig{1, 1, 8, 2, 2, true, true};
  mcfg.mask_stride = 2;
  mcfg.colorspace = Colorspace::kGrey;
  TrainConfig tcfg;
  tcfg.epochs = 5;
  tcfg.batch_size = 2;
  tcfg.crop = 8;
  tcfg.lr_init = 1e-3;
  tcfg.lr_step = 2;
  tcfg.seed = 21;
  tcfg.steps_per_epoch = 1;
  tcfg.noise = NoiseSpec{25.0, 25.0, false};
  const auto data = make_toy_dataset(2, 16, 16, 1, 99);

  Trainer full(mcfg, tcfg, data, {}, root / "full");
  const RunResult whole = full.run();

  TrainConfig head_cfg = tcfg;
  head_cfg.epochs = 2;
  Trainer head(mcfg, head_cfg, data, {}, root / "split");
  const RunResult first = head.run();

  Trainer tail(mcfg, tcfg, data, {}, root / "split");
  tail.resume(root / "split" / Trainer::kLastName);
  const RunResult rest = tail.run();

  std::vector<double> stitched = first.step_losses;
  stitched.insert(stitched.end(), rest.step_losses.begin(), rest.step_losses.end());
  if (stitched.size() != whole.step_losses.size()) {
    o.detail = "step counts differ: " + std::to_string(stitched.size()) + " vs " +
               std::to_string(whole.step_losses.size());
    return o;
  }
  for (std::size_t i = 0; i < stitched.size(); ++i) {
    if (stitched[i] != whole.step_losses[i]) {
      o.detail = "loss " + std::to_string(i) + " differs after resume: " +
                 fmt(stitched[i], 12) + " vs " + fmt(whole.step_losses[i], 12);
      return o;
    }
  }
  o.pass = true;
  o.detail = "5-step loss sequence identical across save/load/resume";
  return o;
}

}  // namespace

int main() {
  const fs::path root = fs::temp_directory_path() / "dtd_acceptance";
  fs::remove_all(root);
  fs::create_directories(root);

  Outcome results[9];
  std::cerr << "[acceptance] fast checks...\n";
  results[0] = check_exact_transforms();
  results[2] = check_zero_init_identity();
  results[3] = check_loss_locality();
  results[4] = check_schedule();
  results[7] = check_metric_oracles();
  results[8] = check_checkpoint_fidelity(root / "ckpt");
  std::cerr << "[acceptance] gradient suite...\n";
  results[1] = check_gradients();
  std::cerr << "[acceptance] toy training grid (12 runs, expect roughly an hour)...\n";
  const GridResult grid = run_grid(root / "grid");
  {
    std::ofstream table(root / "grid" / "table.csv");
    table << grid.table;
  }
  results[5] = check_toy_experiment(grid);
  results[6] = check_ablation(grid);

  static const char* kLabels[9] = {
      "exact transforms",    "gradient suite",    "zero-init identity",
      "loss locality",       "schedule exactness", "toy denoising experiment",
      "ablation ordering",   "metric oracles",    "checkpoint fidelity"};
  int failures = 0;
  for (int i = 0; i < 9; ++i) {
    const bool pass = results[i].pass;
    std::cout << (pass ? "[PASS] " : "[FAIL] ") << (i + 1) << ". " << kLabels[i] << ": "
              << results[i].detail << "\n";
    if (!pass) ++failures;
  }
  std::cout << (failures == 0 ? "acceptance: all 9 criteria hold"
                              : "acceptance: " + std::to_string(failures) + " criterion(s) failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
