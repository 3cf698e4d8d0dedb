// Copyright 2026 The notecoder Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "common/error.hpp"
#include "nn/network.hpp"
#include "support/generators.hpp"
#include "support/oracles.hpp"

using namespace notecoder;
using namespace notecoder::nn;

namespace {

std::vector<double> random_vec(std::mt19937_64& g, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(g);
  return v;
}

std::vector<double> random_labels(std::mt19937_64& g, std::size_t n) {
  std::vector<double> v(n);
  for (auto& x : v) x = gen::coin(g, 0.4) ? 1.0 : 0.0;
  return v;
}

}  // namespace

TEST_SUITE("nn") {

TEST_CASE("zero network outputs exactly one half") {
  const auto spec = NetSpec::text_cnn(4, {2, 3}, 3, 5, 6);
  const auto params = make_params(spec);
  const EmbeddingTensor x(7, 4);
  for (double p : forward(x, {}, params, spec)) CHECK(p == 0.5);
}

TEST_CASE("forward matches scalar reference") {
  std::mt19937_64 g(41);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t D = gen::between(g, 1, 10), L = gen::between(g, 4, 14);
    std::vector<std::size_t> widths;
    for (std::size_t w = 1; w <= 4; ++w)
      if (gen::coin(g, 0.6)) widths.push_back(w);
    if (widths.empty()) widths.push_back(2);
    const std::size_t aux = gen::between(g, 0, 3);
    const auto spec = NetSpec::text_cnn(D, widths, gen::between(g, 1, 5), gen::between(g, 0, 6),
                                        gen::between(g, 1, 6), aux);
    auto params = init_params(spec, g());
    oracle::randomize(params, g, 0.8);
    const auto x = oracle::random_embedding(g, L, D, gen::between(g, 0, L));
    const auto a = random_vec(g, aux, -1, 1);
    const auto got = forward(x, a, params, spec);
    const auto want = oracle::forward(x, a, params, spec);
    REQUIRE(got.size() == want.size());
    for (std::size_t k = 0; k < got.size(); ++k) {
      CHECK(std::abs(got[k] - want[k]) < 1e-10);
      CHECK(got[k] > 0.0);
      CHECK(got[k] < 1.0);
    }
    const auto feats = conv_features(x, params, spec);
    CHECK(forward_from_features(feats, a, params, spec) == got);
  }
}

TEST_CASE("forward shape and numeric errors") {
  const auto spec = NetSpec::text_cnn(4, {3}, 2, 0, 2, 1);
  const auto params = init_params(spec, 1);
  CHECK_THROWS_AS(forward(EmbeddingTensor(5, 3), std::vector<double>{0.0}, params, spec), Error);
  CHECK_THROWS_AS(forward(EmbeddingTensor(2, 4), std::vector<double>{0.0}, params, spec), Error);
  CHECK_THROWS_AS(forward(EmbeddingTensor(5, 4), {}, params, spec), Error);
  EmbeddingTensor bad(5, 4);
  bad.values[0] = std::nan("");
  try {
    forward(bad, std::vector<double>{0.0}, params, spec);
    FAIL("expected numeric error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
  }
}

TEST_CASE("bce_loss") {
  CHECK(bce_loss(std::vector<double>{0.5}, std::vector<double>{1.0}) ==
        doctest::Approx(0.6931472).epsilon(1e-7));
  CHECK(bce_loss(std::vector<double>{1.0, 0.0}, std::vector<double>{1.0, 0.0}) <= 1e-6);
  CHECK_THROWS_AS(bce_loss(std::vector<double>{0.5}, std::vector<double>{1.0, 0.0}), Error);
  std::mt19937_64 g(42);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = gen::between(g, 1, 20);
    const auto p = random_vec(g, n, 0.0, 1.0);
    const auto y = random_labels(g, n);
    const double got = bce_loss(p, y);
    CHECK(std::abs(got - oracle::bce(p, y)) <= 1e-12);
    CHECK(got >= 0);
  }
}

TEST_CASE("gradient check on a random small net") {
  std::mt19937_64 g(43);
  const auto spec = NetSpec::text_cnn(8, {2, 3}, 4, 0, 5);
  auto params = init_params(spec, 7);
  oracle::randomize(params, g, 0.5);
  const auto x = oracle::random_embedding(g, 12, 8, 12);
  const auto y = random_labels(g, 5);
  CHECK(grad_check(params, spec, x, {}, y) < 1e-4);
}

TEST_CASE("gradient check on a dense-only net") {
  std::mt19937_64 g(44);
  NetSpec spec;
  spec.conv.kernel_widths.clear();
  spec.conv.input_dim = 3;
  spec.aux_dim = 6;
  spec.dense = {{6, 4, Activation::kIdentity}, {4, 3, Activation::kSigmoid}};
  auto params = init_params(spec, 3);
  oracle::randomize(params, g, 0.7);
  const auto aux = random_vec(g, 6, -1, 1);
  const auto y = random_labels(g, 3);
  const EmbeddingTensor x(4, 3);
  const double fine = grad_check(params, spec, x, aux, y, 1e-5);
  CHECK(fine < 1e-6);
  CHECK(grad_check(params, spec, x, aux, y, 1e-2) > fine);
}

TEST_CASE("gradient check with auxiliary input and hidden layer") {
  std::mt19937_64 g(45);
  for (int trial = 0; trial < 10; ++trial) {
    const auto spec = NetSpec::text_cnn(5, {1, 3}, 3, 4, 4, 3);
    auto params = init_params(spec, g());
    oracle::randomize(params, g, 0.6);
    const auto x = oracle::random_embedding(g, 9, 5, gen::between(g, 3, 9));
    CHECK(grad_check(params, spec, x, random_vec(g, 3, -1, 1), random_labels(g, 4)) < 1e-4);
  }
}

TEST_CASE("backward gradients are finite and need a matching cache") {
  std::mt19937_64 g(46);
  const auto spec = NetSpec::text_cnn(4, {2}, 3, 3, 2);
  const auto params = init_params(spec, 5);
  const auto x = oracle::random_embedding(g, 6, 4, 6);
  ForwardCache cache;
  forward(x, {}, params, spec, &cache);
  GradSet grads = params.zeros_like();
  backward(cache, std::vector<double>{1, 0}, params, spec, grads);
  CHECK(grads.all_finite());

  ForwardCache empty;
  try {
    backward(empty, std::vector<double>{1, 0}, params, spec, grads);
    FAIL("expected usage error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kUsage);
  }
  const auto other = NetSpec::text_cnn(4, {2}, 3, 4, 2);
  auto other_params = init_params(other, 5);
  GradSet other_grads = other_params.zeros_like();
  CHECK_THROWS_AS(backward(cache, std::vector<double>{1, 0}, other_params, other, other_grads),
                  Error);
}

TEST_CASE("max pooling routes gradient to the first of tied windows") {
  // Identical rows give identical window responses; only window 0 may get
  // gradient, so permuting the tied rows changes nothing.
  NetSpec spec = NetSpec::text_cnn(2, {1}, 1, 0, 1);
  auto params = make_params(spec);
  params.at("conv_w0").data = {1.0, 1.0};
  params.at("conv_b0").data = {0.1};
  params.at("dense_w0").data = {0.5};
  EmbeddingTensor x(3, 2);
  for (std::size_t i = 0; i < 3; ++i) {
    x.row(i)[0] = 0.3;
    x.row(i)[1] = 0.2;
  }
  ForwardCache cache;
  forward(x, {}, params, spec, &cache);
  CHECK(cache.argmax[0][0] == 0);
  GradSet grads = params.zeros_like();
  backward(cache, std::vector<double>{1.0}, params, spec, grads);
  const double gw0 = grads.at("conv_w0").data[0];
  // d/dw of w . x_0 is x_0.
  CHECK(gw0 == doctest::Approx(grads.at("conv_b0").data[0] * 0.3));
}

TEST_CASE("adam step") {
  ParamSet p;
  p.tensors.push_back({"t", {1}, {0.0}});
  ParamSet g = p.zeros_like();
  g.tensors[0].data[0] = 1.0;
  auto st = AdamState::for_params(p);
  adam_step(p, g, st);
  CHECK(st.t == 1);
  // m_hat = v_hat = 1, so the step is lr * 1 / (1 + eps).
  CHECK(p.tensors[0].data[0] == doctest::Approx(-0.001 / (1 + 1e-8)).epsilon(1e-12));

  ParamSet q;
  q.tensors.push_back({"t", {3}, {0.5, -1.0, 2.0}});
  auto st2 = AdamState::for_params(q);
  adam_step(q, q.zeros_like(), st2);
  CHECK(q.tensors[0].data == std::vector<double>{0.5, -1.0, 2.0});

  ParamSet bad;
  bad.tensors.push_back({"t", {2}, {0.0, 0.0}});
  CHECK_THROWS_AS(adam_step(bad, g, st), Error);
}

TEST_CASE("adam respects frozen tensors") {
  ParamSet p;
  p.tensors.push_back({"a", {1}, {1.0}});
  p.tensors.push_back({"b", {1}, {1.0}});
  ParamSet g = p.zeros_like();
  g.tensors[0].data[0] = 1;
  g.tensors[1].data[0] = 1;
  auto st = AdamState::for_params(p);
  const std::vector<bool> frozen{true, false};
  adam_step(p, g, st, &frozen);
  CHECK(p.tensors[0].data[0] == 1.0);
  CHECK(p.tensors[1].data[0] < 1.0);
  CHECK(st.m.tensors[0].data[0] == 0.0);
}

TEST_CASE("training trajectories are deterministic") {
  auto run = [] {
    std::mt19937_64 g(47);
    const auto spec = NetSpec::text_cnn(4, {2, 3}, 3, 4, 3);
    auto params = init_params(spec, 9);
    auto st = AdamState::for_params(params, 0.01);
    for (int step = 0; step < 20; ++step) {
      const auto x = oracle::random_embedding(g, 8, 4, 8);
      ForwardCache cache;
      forward(x, {}, params, spec, &cache);
      GradSet grads = params.zeros_like();
      backward(cache, random_labels(g, 3), params, spec, grads);
      adam_step(params, grads, st);
    }
    return params;
  };
  const auto a = run();
  const auto b = run();
  for (std::size_t k = 0; k < a.tensors.size(); ++k) CHECK(a.tensors[k].data == b.tensors[k].data);
}

TEST_CASE("init is glorot uniform with zero biases") {
  const auto spec = NetSpec::text_cnn(10, {3}, 8, 6, 4);
  const auto p = init_params(spec, 1);
  for (const auto& t : p.tensors) {
    if (t.name.find("_b") != std::string::npos) {
      for (double v : t.data) CHECK(v == 0.0);
      continue;
    }
    double fan_in = 0, fan_out = 0;
    if (t.name == "conv_w0") {
      fan_in = 3 * 10;
      fan_out = 8;
    } else {
      fan_out = static_cast<double>(t.shape[0]);
      fan_in = static_cast<double>(t.shape[1]);
    }
    const double lim = std::sqrt(6.0 / (fan_in + fan_out));
    for (double v : t.data) CHECK(std::abs(v) <= lim);
  }
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto spec = NetSpec::text_cnn(6, {2, 4}, 3, 5, 4, 2);
  Checkpoint ck{spec, init_params(spec, 12), {{"note", "x"}}};
  ck.params.round_to_float();
  const std::string bytes = serialize_checkpoint(ck);
  const auto back = deserialize_checkpoint(bytes);
  CHECK(back.spec == spec);
  CHECK(back.meta["note"] == "x");
  for (std::size_t k = 0; k < ck.params.tensors.size(); ++k)
    CHECK(back.params.tensors[k].data == ck.params.tensors[k].data);

  auto expect_load_error = [](const std::string& b) {
    try {
      deserialize_checkpoint(b);
      FAIL("expected load error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLoad);
    }
  };
  expect_load_error(bytes.substr(0, bytes.size() - 4));
  std::string flipped = bytes;
  flipped.back() = static_cast<char>(flipped.back() ^ 0x40);
  expect_load_error(flipped);
  expect_load_error("not a checkpoint");
  std::string wrong_version = bytes;
  const auto at = wrong_version.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  wrong_version.replace(at, 11, "\"version\":7");
  expect_load_error(wrong_version);
}

TEST_CASE("net spec json round trip") {
  const auto spec = NetSpec::text_cnn(6, {2, 4}, 3, 5, 4, 2);
  CHECK(net_spec_from_json(to_json(spec)) == spec);
  CHECK_THROWS_AS(NetSpec::text_cnn(6, {9}, 3, 5, 4).validate(8), Error);
}

}  // TEST_SUITE
