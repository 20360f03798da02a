/* Copyright 2026 The sedkit Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "sedkit/pooling.hpp"

using namespace sedkit;

namespace {

Tensor tensor3(int k, int t, int f, const std::vector<double>& vals) {
  Tensor z({k, t, f});
  std::copy(vals.begin(), vals.end(), z.vec().begin());
  return z;
}

double inv_sigmoid_free(double p) { return std::log(p / (1.0 - p)); }

// Random attention parameters with moderate magnitudes.
AttentionParams random_params(int K, int F, bool per_class, uint64_t seed) {
  AttentionParams p = AttentionParams::init(K, F, per_class, seed);
  std::mt19937_64 rng(seed ^ 0x9e37);
  std::uniform_real_distribution<double> dist(-0.7, 0.7);
  for (Tensor* t : {&p.b_a1, &p.b_c1, &p.b_a2, &p.b_c2})
    for (int64_t i = 0; i < t->size(); ++i) (*t)[i] = dist(rng);
  return p;
}

}  // namespace

TEST_CASE("global max pooling") {
  Tensor z({2, 2, 2});
  SUBCASE("all zeros gives 0.5") {
    auto pred = global_max_pool(z);
    CHECK(pred.probs[0] == doctest::Approx(0.5));
    CHECK(pred.probs[1] == doctest::Approx(0.5));
  }
  SUBCASE("single high entry dominates") {
    z.fill(-10.0);
    z.at3(0, 1, 1) = 10.0;
    auto pred = global_max_pool(z);
    CHECK(pred.probs[0] == doctest::Approx(1.0 / (1.0 + std::exp(-10.0))).epsilon(1e-9));
  }
  SUBCASE("permutation invariance") {
    Tensor a = oracle::random_tensor({1, 3, 4}, 7);
    Tensor b({1, 3, 4});
    // reverse the (t,f) cells
    for (int64_t i = 0; i < a.size(); ++i) b[a.size() - 1 - i] = a[i];
    CHECK(global_max_pool(a).probs[0] == global_max_pool(b).probs[0]);
  }
}

TEST_CASE("global average pooling") {
  SUBCASE("constant plane") {
    Tensor z({1, 3, 3});
    z.fill(1.7);
    CHECK(global_avg_pool(z).probs[0] ==
          doctest::Approx(1.0 / (1.0 + std::exp(-1.7))).epsilon(1e-12));
  }
  SUBCASE("all zeros gives 0.5") {
    Tensor z({3, 2, 5});
    for (double p : global_avg_pool(z).probs) CHECK(p == doctest::Approx(0.5));
  }
}

TEST_CASE("gwrp examples and limits") {
  // {0.2, 0.8, 0.5} as a 1x1x3 mask
  Tensor z = tensor3(1, 1, 3, {0.2, 0.8, 0.5});
  SUBCASE("r=0 reduces to the max") {
    CHECK(inv_sigmoid_free(gwrp(z, 0.0).probs[0]) == doctest::Approx(0.8).epsilon(1e-9));
    CHECK(gwrp(z, 0.0).probs[0] == global_max_pool(z).probs[0]);
  }
  SUBCASE("r=1 reduces to the mean") {
    CHECK(inv_sigmoid_free(gwrp(z, 1.0).probs[0]) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(gwrp(z, 1.0).probs[0] == global_avg_pool(z).probs[0]);
  }
  SUBCASE("r=0.5 weight formula") {
    // sorted {0.8, 0.5, 0.2}, weights {1, .5, .25}: 1.10 / 1.75
    CHECK(inv_sigmoid_free(gwrp(z, 0.5).probs[0]) ==
          doctest::Approx(1.10 / 1.75).epsilon(1e-9));
  }
  SUBCASE("matches the direct weight-formula oracle") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> rdist(0.05, 0.95);
    for (int trial = 0; trial < 50; ++trial) {
      Tensor zt = oracle::random_tensor({2, 3, 4}, 100 + trial);
      const double r = rdist(rng);
      auto pred = gwrp(zt, r);
      for (int k = 0; k < 2; ++k) {
        std::vector<double> vals;
        for (int t = 0; t < 3; ++t)
          for (int f = 0; f < 4; ++f) vals.push_back(zt.at3(k, t, f));
        const double want = oracle::gwrp_presigmoid(vals, r);
        CHECK(inv_sigmoid_free(pred.probs[k]) == doctest::Approx(want).epsilon(1e-9));
      }
    }
  }
  SUBCASE("r outside [0,1] is rejected") {
    CHECK_THROWS_AS(gwrp(z, -0.1), InvalidInput);
    CHECK_THROWS_AS(gwrp(z, 1.1), InvalidInput);
  }
}

TEST_CASE("attention step 1 contracts") {
  const int K = 2, T = 3, F = 4;
  AttentionParams p = random_params(K, F, false, 21);

  SUBCASE("constant classification branch passes through") {
    // zero classify weights, bias c: convex combination of equal values
    p.w_c1.zero();
    const double c = 0.8;
    for (int f = 0; f < F; ++f) p.b_c1[f] = c;
    Tensor z = oracle::random_tensor({K, T, F}, 22);
    auto [p1, w1] = attention_step1(z, p);
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t)
        CHECK(p1.at2(k, t) ==
              doctest::Approx(1.0 / (1.0 + std::exp(-c))).epsilon(1e-9));
  }
  SUBCASE("constant attention branch gives uniform weights") {
    p = random_params(K, F, false, 23);
    p.w_a1.zero();
    Tensor z = oracle::random_tensor({K, T, F}, 24);
    auto [p1, w1] = attention_step1(z, p);
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t)
        for (int f = 0; f < F; ++f)
          CHECK(w1.at3(k, t, f) == doctest::Approx(1.0 / F).epsilon(1e-9));
  }
  SUBCASE("weights sum to one over frequency") {
    Tensor z = oracle::random_tensor({K, T, F}, 25);
    auto [p1, w1] = attention_step1(z, p);
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t) {
        double sum = 0.0;
        for (int f = 0; f < F; ++f) sum += w1.at3(k, t, f);
        CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      }
  }
}

TEST_CASE("attention step 2 contracts") {
  const int K = 3;
  AttentionParams p = random_params(K, 4, false, 31);

  SUBCASE("T=1 collapses to the classification branch") {
    Tensor p1({K, 1});
    p1.vec() = {0.2, -0.4, 0.9};
    auto [p2, w2] = attention_step2(p1, p);
    for (int k = 0; k < K; ++k) CHECK(w2.at2(k, 0) == doctest::Approx(1.0));
    // C2 = sigmoid(Wc2 p1 + bc2) at the single time step
    for (int k = 0; k < K; ++k) {
      double lc = p.b_c2[k];
      for (int ki = 0; ki < K; ++ki) lc += p.w_c2.at2(k, ki) * p1.at2(ki, 0);
      CHECK(p2[k] == doctest::Approx(1.0 / (1.0 + std::exp(-lc))).epsilon(1e-9));
    }
  }
  SUBCASE("duplicating every time column leaves the output unchanged") {
    const int T = 4;
    Tensor p1 = oracle::random_tensor({K, T}, 33);
    Tensor dup({K, 2 * T});
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t) {
        dup.at2(k, 2 * t) = p1.at2(k, t);
        dup.at2(k, 2 * t + 1) = p1.at2(k, t);
      }
    auto [p2a, w2a] = attention_step2(p1, p);
    auto [p2b, w2b] = attention_step2(dup, p);
    for (int k = 0; k < K; ++k) CHECK(p2a[k] == doctest::Approx(p2b[k]).epsilon(1e-6));
  }
  SUBCASE("weights sum to one over time") {
    Tensor p1 = oracle::random_tensor({K, 5}, 35);
    auto [p2, w2] = attention_step2(p1, p);
    for (int k = 0; k < K; ++k) {
      double sum = 0.0;
      for (int t = 0; t < 5; ++t) sum += w2.at2(k, t);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("two-step attention equals the scalar-loop oracle") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 60; ++trial) {
    const int K = 1 + static_cast<int>(rng() % 5);
    const int T = 1 + static_cast<int>(rng() % 5);
    const int F = 1 + static_cast<int>(rng() % 5);
    const bool per_class = trial % 5 == 0;
    AttentionParams p = random_params(K, F, per_class, 500 + trial);
    Tensor z = oracle::random_tensor({K, T, F}, 900 + trial, -2.0, 2.0);

    auto [pred, maps] = two_step_attention(z, p);
    const auto want = oracle::two_step_attention(z, p);
    for (int k = 0; k < K; ++k) {
      CHECK(pred.probs[k] == doctest::Approx(want.probs[k]).epsilon(1e-6));
      CHECK(pred.probs[k] > 0.0);
      CHECK(pred.probs[k] < 1.0);
      for (int t = 0; t < T; ++t) {
        CHECK(maps.step1_output.at2(k, t) ==
              doctest::Approx(want.p1[k][t]).epsilon(1e-6));
        CHECK(maps.step2_weights.at2(k, t) ==
              doctest::Approx(want.a2hat[k][t]).epsilon(1e-6));
        for (int f = 0; f < F; ++f)
          CHECK(maps.step1_weights.at3(k, t, f) ==
                doctest::Approx(want.a1hat[k][t][f]).epsilon(1e-6));
      }
    }
  }
}

TEST_CASE("all-zero parameters propagate 0.5 through both steps") {
  const int K = 3, T = 4, F = 5;
  AttentionParams p = AttentionParams::init(K, F, false, 1);
  p.w_a1.zero();
  p.w_c1.zero();
  p.w_a2.zero();
  p.w_c2.zero();
  Tensor z = oracle::random_tensor({K, T, F}, 2);
  auto [pred, maps] = two_step_attention(z, p);
  for (int k = 0; k < K; ++k) CHECK(pred.probs[k] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("saturated attention logits concentrate up to the sigmoid cap") {
  // The attention branch is squashed before the softmax, so softmax inputs
  // live in (0,1) and the sharpest achievable weight ratio is e : 1. A +20
  // logit therefore gets weight e/(e + F - 1), not ~1; asserted against the
  // scalar-loop oracle.
  const int K = 1, T = 2, F = 4;
  AttentionParams p = AttentionParams::init(K, F, false, 3);
  p.w_a1.zero();
  p.w_c1.zero();
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  for (int f = 0; f < F; ++f) p.b_c1[f] = dist(rng);
  const int fstar = 2;
  for (int f = 0; f < F; ++f) p.b_a1[f] = f == fstar ? 20.0 : -20.0;
  Tensor z({K, T, F});  // zeros: biases drive everything
  auto [p1, w1] = attention_step1(z, p);
  const auto want = oracle::two_step_attention(z, p);
  const double cap = std::exp(1.0) / (std::exp(1.0) + (F - 1));
  for (int t = 0; t < T; ++t) {
    CHECK(p1.at2(0, t) == doctest::Approx(want.p1[0][t]).epsilon(1e-9));
    CHECK(w1.at3(0, t, fstar) == doctest::Approx(cap).epsilon(1e-6));
    for (int f = 0; f < F; ++f)
      if (f != fstar) CHECK(w1.at3(0, t, f) < w1.at3(0, t, fstar));
  }
}

TEST_CASE("single-step attention matches the scalar-loop oracle") {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 40; ++trial) {
    const int K = 1 + static_cast<int>(rng() % 5);
    const int T = 1 + static_cast<int>(rng() % 5);
    const int F = 1 + static_cast<int>(rng() % 5);
    AttentionParams p = random_params(K, F, false, 600 + trial);
    Tensor z = oracle::random_tensor({K, T, F}, 700 + trial, -2.0, 2.0);
    auto pred = single_step_attention(z, p);
    const auto want = oracle::single_step_attention(z, p);
    for (int k = 0; k < K; ++k) {
      CHECK(pred.probs[k] == doctest::Approx(want[k]).epsilon(1e-6));
      CHECK(pred.probs[k] > 0.0);
      CHECK(pred.probs[k] < 1.0);
    }
  }
  SUBCASE("uniform attention logits average the classification branch") {
    const int K = 1, T = 3, F = 2;
    AttentionParams p = AttentionParams::init(K, F, false, 4);
    p.w_a1.zero();
    p.b_a1.zero();
    Tensor z = oracle::random_tensor({K, T, F}, 5);
    auto pred = single_step_attention(z, p);
    // classification branch with the initialized weights
    auto want = oracle::single_step_attention(z, p);
    CHECK(pred.probs[0] == doctest::Approx(want[0]).epsilon(1e-9));
  }
}

TEST_CASE("boundedness under extreme inputs") {
  const int K = 2, T = 3, F = 4;
  Tensor z({K, T, F});
  std::mt19937_64 rng(61);
  for (int64_t i = 0; i < z.size(); ++i) z[i] = (rng() % 2 ? 1.0 : -1.0) * 1e3;
  AttentionParams p = random_params(K, F, false, 62);

  auto check_bounds = [](const std::vector<double>& probs) {
    for (double v : probs) {
      CHECK(std::isfinite(v));
      CHECK(v > 0.0);
      CHECK(v < 1.0);
    }
  };
  check_bounds(global_max_pool(z).probs);
  check_bounds(global_avg_pool(z).probs);
  check_bounds(gwrp(z, 0.5).probs);
  check_bounds(single_step_attention(z, p).probs);
  auto [pred, maps] = two_step_attention(z, p);
  check_bounds(pred.probs);
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) {
      double sum = 0.0;
      for (int f = 0; f < F; ++f) sum += maps.step1_weights.at3(k, t, f);
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    }
}

TEST_CASE("pooling gradients match finite differences") {
  const int N = 2, K = 2, T = 3, F = 3;
  Tensor z = oracle::random_tensor({N, K, T, F}, 71, -1.5, 1.5);
  Tensor loss_w = oracle::random_tensor({N, K}, 72);

  auto run_case = [&](const HeadConfig& cfg, AttentionParams* params) {
    auto loss = [&]() {
      Tensor probs;
      PoolingCache cache;
      pooling_forward(z, cfg, params, probs, cache);
      double acc = 0.0;
      for (int64_t i = 0; i < probs.size(); ++i) acc += probs[i] * loss_w[i];
      return acc;
    };
    Tensor probs;
    PoolingCache cache;
    pooling_forward(z, cfg, params, probs, cache);
    Tensor grad_z(z.shape());
    AttentionParams grads;
    if (params) grads = AttentionParams::zeros_like(*params);
    pooling_backward(z, loss_w, cfg, params, cache, grad_z, params ? &grads : nullptr);

    auto res = oracle::fd_check(loss, z.ptr(), grad_z.ptr(), z.size(), 1e-4);
    CHECK(res.max_rel_err < 1e-4);
    if (params) {
      std::vector<std::pair<Tensor*, Tensor*>> pairs = {
          {&params->w_a1, &grads.w_a1}, {&params->b_a1, &grads.b_a1},
          {&params->w_c1, &grads.w_c1}, {&params->b_c1, &grads.b_c1}};
      if (cfg.kind == HeadKind::kTwoStep) {
        pairs.insert(pairs.end(), {{&params->w_a2, &grads.w_a2},
                                   {&params->b_a2, &grads.b_a2},
                                   {&params->w_c2, &grads.w_c2},
                                   {&params->b_c2, &grads.b_c2}});
      }
      for (auto [value, grad] : pairs) {
        auto r = oracle::fd_check(loss, value->ptr(), grad->ptr(), value->size(), 1e-4);
        CHECK(r.max_rel_err < 1e-4);
      }
    }
  };

  run_case({HeadKind::kGap, 0.0, {}}, nullptr);
  run_case({HeadKind::kGmp, 0.0, {}}, nullptr);
  run_case({HeadKind::kGwrp, 0.37, {}}, nullptr);
  AttentionParams p2 = random_params(K, F, false, 73);
  run_case({HeadKind::kTwoStep, 0.0, {}}, &p2);
  AttentionParams p1 = random_params(K, F, false, 74);
  run_case({HeadKind::kSingleStep, 0.0, {}}, &p1);
  AttentionParams ppc = random_params(K, F, true, 75);
  run_case({HeadKind::kTwoStep, 0.0, {}}, &ppc);
}

TEST_CASE("head name round trip") {
  for (const char* name : {"gmp", "gap", "gwrp", "attention", "2ap"})
    CHECK(head_name(head_from_name(name)) == name);
  CHECK_THROWS_AS(head_from_name("bogus"), ConfigError);
}
