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

#include <omp.h>

#include <array>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sedkit/kernels.hpp"

using namespace sedkit;

namespace {

std::vector<double> randu(size_t n, uint64_t seed, double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

void check_close(const std::vector<double>& a, const std::vector<double>& b,
                 double tol = 1e-12) {
  REQUIRE(a.size() == b.size());
  double worst = 0.0;
  for (size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  CHECK(worst <= tol);
}

}  // namespace

TEST_CASE("conv2d matches the serial reference") {
  for (auto [N, Cin, Cout, H, W, k] :
       {std::array<int, 6>{2, 3, 5, 9, 7, 3}, std::array<int, 6>{1, 1, 4, 12, 5, 3},
        std::array<int, 6>{3, 4, 2, 6, 6, 1}}) {
    auto in = randu(static_cast<size_t>(N) * Cin * H * W, 11 * k + H);
    auto w = randu(static_cast<size_t>(Cout) * Cin * k * k, 13 * k + W);
    auto b = randu(Cout, 17);
    std::vector<double> out_p(static_cast<size_t>(N) * Cout * H * W), out_s(out_p.size());
    kernels::conv2d_forward(in.data(), N, Cin, H, W, w.data(), Cout, k, k, b.data(),
                            out_p.data());
    refk::conv2d_forward(in.data(), N, Cin, H, W, w.data(), Cout, k, k, b.data(),
                         out_s.data());
    check_close(out_p, out_s);

    auto gout = randu(out_p.size(), 19);
    std::vector<double> gin_p(in.size()), gin_s(in.size());
    kernels::conv2d_backward_input(gout.data(), N, Cin, H, W, w.data(), Cout, k, k,
                                   gin_p.data());
    refk::conv2d_backward_input(gout.data(), N, Cin, H, W, w.data(), Cout, k, k,
                                gin_s.data());
    check_close(gin_p, gin_s);

    std::vector<double> gw_p(w.size()), gw_s(w.size()), gb_p(Cout), gb_s(Cout);
    kernels::conv2d_backward_params(in.data(), gout.data(), N, Cin, H, W, Cout, k, k,
                                    gw_p.data(), gb_p.data());
    refk::conv2d_backward_params(in.data(), gout.data(), N, Cin, H, W, Cout, k, k,
                                 gw_s.data(), gb_s.data());
    check_close(gw_p, gw_s);
    check_close(gb_p, gb_s);
  }
}

TEST_CASE("batchnorm, pooling, linear and softmax match the serial reference") {
  const int N = 3, C = 4, H = 7, W = 5;
  auto in = randu(static_cast<size_t>(N) * C * H * W, 23);

  SUBCASE("batchnorm train") {
    auto gamma = randu(C, 29, 0.5, 1.5);
    auto beta = randu(C, 31);
    std::vector<double> out_p(in.size()), out_s(in.size());
    std::vector<double> m_p(C), is_p(C), rm_p(C), rv_p(C, 1.0);
    std::vector<double> m_s(C), is_s(C), rm_s(C), rv_s(C, 1.0);
    kernels::batchnorm_forward_train(in.data(), N, C, H, W, gamma.data(), beta.data(),
                                     0.1, 1e-5, out_p.data(), m_p.data(), is_p.data(),
                                     rm_p.data(), rv_p.data());
    refk::batchnorm_forward_train(in.data(), N, C, H, W, gamma.data(), beta.data(), 0.1,
                                  1e-5, out_s.data(), m_s.data(), is_s.data(),
                                  rm_s.data(), rv_s.data());
    check_close(out_p, out_s);
    check_close(rm_p, rm_s);
    check_close(rv_p, rv_s);
  }
  SUBCASE("avgpool") {
    std::vector<double> out_p(in.size()), out_s(in.size());
    kernels::avgpool3x3_forward(in.data(), N, C, H, W, out_p.data());
    refk::avgpool3x3_forward(in.data(), N, C, H, W, out_s.data());
    check_close(out_p, out_s, 0.0);
  }
  SUBCASE("maxpool with ties") {
    auto tied = in;
    for (auto& v : tied) v = std::round(v * 4.0) / 4.0;  // force plateaus
    std::vector<double> out_p(in.size()), out_s(in.size());
    std::vector<int32_t> am_p(in.size()), am_s(in.size());
    kernels::maxpool3x3_forward(tied.data(), N, C, H, W, out_p.data(), am_p.data());
    refk::maxpool3x3_forward(tied.data(), N, C, H, W, out_s.data(), am_s.data());
    check_close(out_p, out_s, 0.0);
    CHECK(am_p == am_s);  // identical tie-breaking
  }
  SUBCASE("linear") {
    const int M = 13, Fin = 6, Fout = 9;
    auto x = randu(static_cast<size_t>(M) * Fin, 37);
    auto w = randu(static_cast<size_t>(Fout) * Fin, 41);
    auto b = randu(Fout, 43);
    std::vector<double> out_p(static_cast<size_t>(M) * Fout), out_s(out_p.size());
    kernels::linear_forward(x.data(), M, Fin, w.data(), Fout, b.data(), out_p.data());
    refk::linear_forward(x.data(), M, Fin, w.data(), Fout, b.data(), out_s.data());
    check_close(out_p, out_s);
  }
  SUBCASE("softmax") {
    const int M = 11, L = 9;
    auto x = randu(static_cast<size_t>(M) * L, 47, -30.0, 30.0);
    std::vector<double> out_p(x.size()), out_s(x.size());
    kernels::softmax_lastaxis_forward(x.data(), M, L, out_p.data());
    refk::softmax_lastaxis_forward(x.data(), M, L, out_s.data());
    check_close(out_p, out_s);
    for (int m = 0; m < M; ++m) {
      double sum = 0.0;
      for (int i = 0; i < L; ++i) sum += out_p[m * L + i];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("kernel results do not depend on the OpenMP thread count") {
  const int N = 2, Cin = 3, Cout = 6, H = 10, W = 8;
  auto in = randu(static_cast<size_t>(N) * Cin * H * W, 53);
  auto w = randu(static_cast<size_t>(Cout) * Cin * 9, 59);
  auto b = randu(Cout, 61);
  std::vector<double> out1(static_cast<size_t>(N) * Cout * H * W), out2(out1.size());
  omp_set_num_threads(1);
  kernels::conv2d_forward(in.data(), N, Cin, H, W, w.data(), Cout, 3, 3, b.data(),
                          out1.data());
  omp_set_num_threads(omp_get_num_procs());
  kernels::conv2d_forward(in.data(), N, Cin, H, W, w.data(), Cout, 3, 3, b.data(),
                          out2.data());
  CHECK(out1 == out2);  // bitwise
}

TEST_CASE("conv2d gradients match finite differences") {
  const int N = 2, Cin = 2, Cout = 3, H = 5, W = 4, k = 3;
  auto in = randu(static_cast<size_t>(N) * Cin * H * W, 67);
  auto w = randu(static_cast<size_t>(Cout) * Cin * k * k, 71);
  auto b = randu(Cout, 73);
  auto weights = randu(static_cast<size_t>(N) * Cout * H * W, 79);  // loss functional

  auto loss = [&]() {
    std::vector<double> out(static_cast<size_t>(N) * Cout * H * W);
    kernels::conv2d_forward(in.data(), N, Cin, H, W, w.data(), Cout, k, k, b.data(),
                            out.data());
    double acc = 0.0;
    for (size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
    return acc;
  };
  std::vector<double> gin(in.size()), gw(w.size()), gb(b.size());
  kernels::conv2d_backward_input(weights.data(), N, Cin, H, W, w.data(), Cout, k, k,
                                 gin.data());
  kernels::conv2d_backward_params(in.data(), weights.data(), N, Cin, H, W, Cout, k, k,
                                  gw.data(), gb.data());
  CHECK(oracle::fd_check(loss, in.data(), gin.data(), in.size(), 1e-5).max_rel_err < 1e-6);
  CHECK(oracle::fd_check(loss, w.data(), gw.data(), w.size(), 1e-5).max_rel_err < 1e-6);
  CHECK(oracle::fd_check(loss, b.data(), gb.data(), b.size(), 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("batchnorm gradients match finite differences") {
  const int N = 2, C = 3, H = 4, W = 3;
  auto in = randu(static_cast<size_t>(N) * C * H * W, 83);
  auto gamma = randu(C, 89, 0.5, 1.5);
  auto beta = randu(C, 97);
  auto weights = randu(in.size(), 101);

  auto loss = [&]() {
    std::vector<double> out(in.size()), m(C), is(C), rm(C), rv(C, 1.0);
    kernels::batchnorm_forward_train(in.data(), N, C, H, W, gamma.data(), beta.data(),
                                     0.1, 1e-5, out.data(), m.data(), is.data(),
                                     rm.data(), rv.data());
    double acc = 0.0;
    for (size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
    return acc;
  };
  std::vector<double> out(in.size()), m(C), is(C), rm(C), rv(C, 1.0);
  kernels::batchnorm_forward_train(in.data(), N, C, H, W, gamma.data(), beta.data(), 0.1,
                                   1e-5, out.data(), m.data(), is.data(), rm.data(),
                                   rv.data());
  std::vector<double> gin(in.size()), gg(C), gb(C);
  kernels::batchnorm_backward(in.data(), weights.data(), N, C, H, W, gamma.data(),
                              m.data(), is.data(), gin.data(), gg.data(), gb.data());
  CHECK(oracle::fd_check(loss, in.data(), gin.data(), in.size(), 1e-5).max_rel_err <
        1e-5);
  CHECK(oracle::fd_check(loss, gamma.data(), gg.data(), C, 1e-5).max_rel_err < 1e-6);
  CHECK(oracle::fd_check(loss, beta.data(), gb.data(), C, 1e-5).max_rel_err < 1e-6);
}

TEST_CASE("softmax and sigmoid gradients match finite differences") {
  const int M = 4, L = 5;
  auto in = randu(static_cast<size_t>(M) * L, 103);
  auto weights = randu(in.size(), 107);

  SUBCASE("softmax") {
    auto loss = [&]() {
      std::vector<double> out(in.size());
      kernels::softmax_lastaxis_forward(in.data(), M, L, out.data());
      double acc = 0.0;
      for (size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
      return acc;
    };
    std::vector<double> out(in.size()), gin(in.size());
    kernels::softmax_lastaxis_forward(in.data(), M, L, out.data());
    kernels::softmax_lastaxis_backward(out.data(), weights.data(), M, L, gin.data());
    CHECK(oracle::fd_check(loss, in.data(), gin.data(), in.size(), 1e-5).max_rel_err <
          1e-6);
  }
  SUBCASE("sigmoid") {
    auto loss = [&]() {
      std::vector<double> out(in.size());
      kernels::sigmoid_forward(in.data(), in.size(), out.data());
      double acc = 0.0;
      for (size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
      return acc;
    };
    std::vector<double> out(in.size()), gin(in.size());
    kernels::sigmoid_forward(in.data(), in.size(), out.data());
    kernels::sigmoid_backward(out.data(), weights.data(), in.size(), gin.data());
    CHECK(oracle::fd_check(loss, in.data(), gin.data(), in.size(), 1e-5).max_rel_err <
          1e-6);
  }
  SUBCASE("avgpool") {
    auto loss = [&]() {
      std::vector<double> out(in.size());
      kernels::avgpool3x3_forward(in.data(), 1, 1, M, L, out.data());
      double acc = 0.0;
      for (size_t i = 0; i < out.size(); ++i) acc += out[i] * weights[i];
      return acc;
    };
    std::vector<double> gin(in.size());
    kernels::avgpool3x3_backward(weights.data(), 1, 1, M, L, gin.data());
    CHECK(oracle::fd_check(loss, in.data(), gin.data(), in.size(), 1e-5).max_rel_err <
          1e-6);
  }
}

TEST_CASE("stable sigmoid saturates strictly inside (0,1)") {
  CHECK(stable_sigmoid(1e3) < 1.0);
  CHECK(stable_sigmoid(1e3) > 0.999);
  CHECK(stable_sigmoid(-1e3) > 0.0);
  CHECK(stable_sigmoid(-1e3) < 1e-3);
  CHECK(stable_sigmoid(0.0) == doctest::Approx(0.5));
}
