// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "dtdenoise/cadt.hpp"
#include "dtdenoise/grad_check.hpp"

using namespace dtd;

namespace {

template <typename T>
Var<T> random_feature(i64 N, i64 H, i64 W, i64 C, Rng& rng, bool grad = false) {
  Tensor<T> t({N, H, W, C});
  for (i64 i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-1.0, 1.0));
  return make_var(t, grad);
}

template <typename T>
std::vector<GradCheckInput<T>> store_inputs(ParamStore<T>& store) {
  std::vector<GradCheckInput<T>> inputs;
  for (const auto& e : store.entries()) inputs.push_back({e.name, e.var});
  return inputs;
}

template <typename T>
void zero_params(ParamStore<T>& store) {
  for (const auto& e : store.entries()) e.var->value.fill(T(0));
}

}  // namespace

TEST_CASE("encoder with zero projections and zero mlp is the identity") {
  ParamStore<float> store;
  Rng rng(3);
  EncoderParams<float> p = make_encoder_params<float>(store, "enc", 8, 2, 2, rng);
  for (const char* name : {"enc.msa.wq", "enc.msa.wk", "enc.msa.wv", "enc.msa.wo",
                           "enc.mlp.w1", "enc.mlp.w2"}) {
    store.get(name)->value.fill(0.0f);
  }
  Var<float> x = random_feature<float>(1, 4, 4, 8, rng);
  Var<float> y = encoder_forward(x, p, 2, 2);
  REQUIRE(max_abs_diff(y->value, x->value) == 0.0f);
}

TEST_CASE("encoder preserves shape on a random feature map") {
  ParamStore<float> store;
  Rng rng(5);
  EncoderParams<float> p = make_encoder_params<float>(store, "enc", 16, 4, 4, rng);
  Var<float> x = random_feature<float>(1, 8, 8, 16, rng);
  Var<float> y = encoder_forward(x, p, 4, 4);
  REQUIRE(y->value.shape() == x->value.shape());
  REQUIRE(all_finite(y->value));
}

TEST_CASE("encoder gradients match finite differences") {
  ParamStore<double> store;
  Rng rng(11);
  EncoderParams<double> p = make_encoder_params<double>(store, "enc", 8, 2, 2, rng);
  // A nonzero bias table exercises its gradient path too.
  {
    Var<double> bt = store.get("enc.msa.bias_table");
    for (i64 i = 0; i < bt->value.size(); ++i) bt->value[i] = rng.uniform(-0.3, 0.3);
  }
  Var<double> x = random_feature<double>(1, 4, 4, 8, rng, true);
  auto inputs = store_inputs(store);
  inputs.push_back({"x", x});
  // eps below every preactivation's distance to the LeakyReLU kink, so the
  // central differences never straddle the slope change.
  GradReport<double> report =
      grad_check<double>([&] { return encoder_forward(x, p, 2, 2); }, inputs, 1e-5);
  INFO("worst relative error " << report.worst);
  REQUIRE(report.ok);
  REQUIRE(report.worst < 1e-4);
}

TEST_CASE("local branch with zero conv weights emits zero") {
  ParamStore<float> store;
  Rng rng(7);
  LfeParams<float> p = make_lfe_params<float>(store, "lfe", 16, rng);
  for (const auto& e : store.entries()) {
    if (e.name.find(".w") != std::string::npos) e.var->value.fill(0.0f);
  }
  Var<float> x = random_feature<float>(2, 4, 4, 16, rng);
  Var<float> y = lfe_forward(x, p);
  REQUIRE(y->value.shape() == x->value.shape());
  for (i64 i = 0; i < y->value.size(); ++i) REQUIRE(y->value[i] == 0.0f);
}

TEST_CASE("fresh local branch equals the same pyramid with plain convs") {
  // Offset predictors start at zero, so both deformable stages must match
  // ordinary convolutions with the same kernels.
  ParamStore<float> store;
  Rng rng(9);
  LfeParams<float> p = make_lfe_params<float>(store, "lfe", 16, rng);
  Var<float> x = random_feature<float>(1, 6, 6, 16, rng);

  Var<float> got = lfe_forward(x, p);

  Var<float> n = layer_norm(x, 3, p.ln.gain, p.ln.shift);
  Var<float> r = conv2d(n, p.reduce.w, p.reduce.b);
  Var<float> l = leaky_relu(conv2d(r, p.local.w, p.local.b));
  Var<float> d1 = leaky_relu(conv2d(l, p.deform1.w, p.deform1.b));
  Var<float> d2 = leaky_relu(conv2d(d1, p.deform2.w, p.deform2.b));
  Var<float> want = conv2d(d2, p.expand.w, p.expand.b);

  REQUIRE(max_abs_diff(got->value, want->value) < 1e-6f);
}

TEST_CASE("local branch exposes its intermediate taps") {
  ParamStore<float> store;
  Rng rng(13);
  LfeParams<float> p = make_lfe_params<float>(store, "lfe", 16, rng);
  Var<float> x = random_feature<float>(1, 4, 4, 16, rng);
  LfeTrace<float> trace;
  Var<float> y = lfe_forward(x, p, &trace);
  REQUIRE(trace.f_reduction.shape() == Shape({1, 4, 4, 2}));
  REQUIRE(trace.f_local.shape() == Shape({1, 4, 4, 8}));
  REQUIRE(trace.f_expansion.shape() == Shape({1, 4, 4, 16}));
  REQUIRE(max_abs_diff(trace.f_expansion, y->value) == 0.0f);
}

TEST_CASE("local branch gradients match finite differences") {
  ParamStore<double> store;
  Rng rng(17);
  LfeParams<double> p = make_lfe_params<double>(store, "lfe", 16, rng);
  // Give the offset predictors small nonzero weights so the deformable taps
  // sit between grid points, where bilinear sampling is differentiable.
  for (const char* name : {"lfe.off1.w", "lfe.off2.w"}) {
    Var<double> w = store.get(name);
    for (i64 i = 0; i < w->value.size(); ++i) w->value[i] = rng.uniform(0.05, 0.15);
  }
  Var<double> x = random_feature<double>(1, 4, 4, 16, rng, true);
  auto inputs = store_inputs(store);
  inputs.push_back({"x", x});
  GradReport<double> report = grad_check<double>([&] { return lfe_forward(x, p); }, inputs, 1e-5);
  INFO("worst relative error " << report.worst);
  REQUIRE(report.ok);
  REQUIRE(report.worst < 1e-4);
}

TEST_CASE("unit fusion adds the two branch outputs") {
  StackConfig cfg;
  cfg.groups = 1;
  cfg.units = 1;
  cfg.channels = 16;
  cfg.window = 2;
  cfg.heads = 2;
  ParamStore<float> store;
  Rng rng(19);
  UnitParams<float> p = make_unit_params<float>(store, "u", cfg, rng);
  Var<float> x = random_feature<float>(1, 4, 4, 16, rng);

  Var<float> fused = cadt_forward(x, p, cfg.window, cfg.heads);
  Var<float> global = encoder_forward(x, p.enc, cfg.window, cfg.heads);
  Var<float> local = lfe_forward(x, p.lfe);
  for (i64 i = 0; i < fused->value.size(); ++i) {
    REQUIRE(std::abs(fused->value[i] - (global->value[i] + local->value[i])) < 1e-6f);
  }

  // Zeroed local weights reduce the fusion to the global branch.
  for (const auto& e : store.entries()) {
    if (e.name.find(".lfe.") != std::string::npos) e.var->value.fill(0.0f);
  }
  Var<float> zeroed = cadt_forward(x, p, cfg.window, cfg.heads);
  Var<float> global2 = encoder_forward(x, p.enc, cfg.window, cfg.heads);
  REQUIRE(max_abs_diff(zeroed->value, global2->value) == 0.0f);
}

TEST_CASE("disabling the local branch selects the encoder bit for bit") {
  StackConfig cfg;
  cfg.groups = 1;
  cfg.units = 1;
  cfg.channels = 16;
  cfg.window = 2;
  cfg.heads = 2;
  cfg.enable_local = false;
  ParamStore<float> store;
  Rng rng(23);
  UnitParams<float> p = make_unit_params<float>(store, "u", cfg, rng);
  Var<float> x = random_feature<float>(1, 4, 4, 16, rng);
  Var<float> y = cadt_forward(x, p, cfg.window, cfg.heads);
  Var<float> enc = encoder_forward(x, p.enc, cfg.window, cfg.heads);
  REQUIRE(max_abs_diff(y->value, enc->value) == 0.0f);
  // No local-branch parameters were registered at all.
  for (const auto& e : store.entries()) {
    REQUIRE(e.name.find(".lfe.") == std::string::npos);
  }
}

TEST_CASE("stack with all weights zero emits a zero noise map") {
  StackConfig cfg;
  cfg.groups = 2;
  cfg.units = 2;
  cfg.channels = 8;
  cfg.window = 2;
  cfg.heads = 2;
  ParamStore<float> store;
  Rng rng(29);
  StackParams<float> p = make_stack_params<float>(store, cfg, 1, rng);
  zero_params(store);
  Var<float> x = random_feature<float>(2, 4, 4, 1, rng);
  Var<float> y = stack_forward(x, p);
  REQUIRE(y->value.shape() == x->value.shape());
  for (i64 i = 0; i < y->value.size(); ++i) REQUIRE(y->value[i] == 0.0f);
}

TEST_CASE("paper-scale configuration builds eighteen units") {
  StackConfig cfg;
  cfg.groups = 3;
  cfg.units = 6;
  cfg.channels = 60;
  cfg.window = 8;
  cfg.heads = 6;
  ParamStore<float> store;
  Rng rng(31);
  StackParams<float> p = make_stack_params<float>(store, cfg, 3, rng);
  REQUIRE(p.units.size() == 3);
  for (const auto& group : p.units) REQUIRE(group.size() == 6);
  REQUIRE(store.has("group0.unit0.enc.ln1.gain"));
  REQUIRE(store.has("group2.unit5.lfe.expand.w"));
  // Channel widths follow the floor schedule 60 -> 7 -> 15 -> 15 -> 30 -> 60.
  REQUIRE(store.get("group0.unit0.lfe.reduce.w")->value.shape() == Shape({3, 3, 60, 7}));
  REQUIRE(store.get("group0.unit0.lfe.local.w")->value.shape() == Shape({3, 3, 7, 15}));
  REQUIRE(store.get("group0.unit0.lfe.deform2.w")->value.shape() == Shape({3, 3, 15, 30}));
  REQUIRE(store.get("group0.unit0.lfe.expand.w")->value.shape() == Shape({3, 3, 30, 60}));
  REQUIRE(store.get("group0.unit0.enc.msa.bias_table")->value.shape() == Shape({225, 6}));
}

TEST_CASE("tiny stack forward is deterministic across fresh builds") {
  StackConfig cfg;
  cfg.groups = 1;
  cfg.units = 2;
  cfg.channels = 16;
  cfg.window = 4;
  cfg.heads = 4;

  Tensor<float> img({4, 64, 64, 3});
  Rng data_rng(37);
  for (i64 i = 0; i < img.size(); ++i) img[i] = static_cast<float>(data_rng.uniform());

  Tensor<float> first;
  for (int run = 0; run < 2; ++run) {
    ParamStore<float> store;
    Rng rng(41);
    StackParams<float> p = make_stack_params<float>(store, cfg, 3, rng);
    Var<float> y = stack_forward(make_const(img), p);
    REQUIRE(y->value.shape() == img.shape());
    REQUIRE(all_finite(y->value));
    if (run == 0) {
      first = y->value.clone();
    } else {
      REQUIRE(max_abs_diff(first, y->value) == 0.0f);
    }
  }
}

TEST_CASE("stack configuration validation") {
  StackConfig ok;
  ok.channels = 60;
  ok.heads = 6;
  CHECK_NOTHROW(validate(ok));

  StackConfig bad_heads = ok;
  bad_heads.heads = 7;
  CHECK_THROWS_AS(validate(bad_heads), ConfigError);

  StackConfig small = ok;
  small.channels = 6;
  small.heads = 6;
  CHECK_THROWS_AS(validate(small), ConfigError);  // local branch needs C >= 8
  small.enable_local = false;
  CHECK_NOTHROW(validate(small));

  StackConfig none = ok;
  none.enable_global = false;
  none.enable_local = false;
  CHECK_THROWS_AS(validate(none), ConfigError);

  StackConfig bad_groups = ok;
  bad_groups.groups = 0;
  CHECK_THROWS_AS(validate(bad_groups), ConfigError);
}
