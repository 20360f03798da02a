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

// Races the OpenMP kernels against the serial reference implementations on
// training-sized tensors and reports the speedup. Only forward kernels have
// serial twins; that is where the cycles go.

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "sedkit/kernels.hpp"

using namespace sedkit;

namespace {

double time_best_ms(const std::function<void()>& fn, int reps) {
  fn();  // warm up
  double best = 1e300;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

std::vector<double> randu(size_t n, uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

struct Row {
  std::string name;
  double serial_ms, omp_ms, diff;
};

}  // namespace

int main(int argc, char** argv) {
  int reps = 5;
  if (argc > 1 && std::strcmp(argv[1], "--quick") == 0) reps = 2;

  // Desk-scale training shapes: batch 8, 4 s clips, 32 mel bins.
  const int N = 8, T = 124, F = 32;
  std::vector<Row> rows;

  {
    const int Cin = 16, Cout = 32;
    auto in = randu(static_cast<size_t>(N) * Cin * T * F, 1);
    auto w = randu(static_cast<size_t>(Cout) * Cin * 9, 2);
    auto b = randu(Cout, 3);
    std::vector<double> out_s(static_cast<size_t>(N) * Cout * T * F);
    std::vector<double> out_p(out_s.size());
    const double serial = time_best_ms(
        [&] {
          refk::conv2d_forward(in.data(), N, Cin, T, F, w.data(), Cout, 3, 3, b.data(),
                               out_s.data());
        },
        reps);
    const double par = time_best_ms(
        [&] {
          kernels::conv2d_forward(in.data(), N, Cin, T, F, w.data(), Cout, 3, 3, b.data(),
                                  out_p.data());
        },
        reps);
    rows.push_back({"conv2d 3x3 16->32", serial, par, max_abs_diff(out_s, out_p)});
  }
  {
    const int C = 32;
    auto in = randu(static_cast<size_t>(N) * C * T * F, 4);
    auto gamma = randu(C, 5);
    auto beta = randu(C, 6);
    std::vector<double> out_s(in.size()), out_p(in.size());
    std::vector<double> mean(C), invstd(C), rm_s(C), rv_s(C, 1.0), rm_p(C), rv_p(C, 1.0);
    const double serial = time_best_ms(
        [&] {
          refk::batchnorm_forward_train(in.data(), N, C, T, F, gamma.data(), beta.data(),
                                        0.1, 1e-5, out_s.data(), mean.data(),
                                        invstd.data(), rm_s.data(), rv_s.data());
        },
        reps);
    const double par = time_best_ms(
        [&] {
          kernels::batchnorm_forward_train(in.data(), N, C, T, F, gamma.data(),
                                           beta.data(), 0.1, 1e-5, out_p.data(),
                                           mean.data(), invstd.data(), rm_p.data(),
                                           rv_p.data());
        },
        reps);
    rows.push_back({"batchnorm train C=32", serial, par, max_abs_diff(out_s, out_p)});
  }
  {
    const int C = 32;
    auto in = randu(static_cast<size_t>(N) * C * T * F, 7);
    std::vector<double> out_s(in.size()), out_p(in.size());
    const double serial = time_best_ms(
        [&] { refk::avgpool3x3_forward(in.data(), N, C, T, F, out_s.data()); }, reps);
    const double par = time_best_ms(
        [&] { kernels::avgpool3x3_forward(in.data(), N, C, T, F, out_p.data()); }, reps);
    rows.push_back({"avgpool 3x3 C=32", serial, par, max_abs_diff(out_s, out_p)});
  }
  {
    const int K = 10;
    const int M = N * K * T;
    auto in = randu(static_cast<size_t>(M) * F, 8);
    auto w = randu(static_cast<size_t>(F) * F, 9);
    auto b = randu(F, 10);
    std::vector<double> out_s(static_cast<size_t>(M) * F), out_p(out_s.size());
    const double serial = time_best_ms(
        [&] { refk::linear_forward(in.data(), M, F, w.data(), F, b.data(), out_s.data()); },
        reps);
    const double par = time_best_ms(
        [&] {
          kernels::linear_forward(in.data(), M, F, w.data(), F, b.data(), out_p.data());
        },
        reps);
    rows.push_back({"linear FxF (step 1)", serial, par, max_abs_diff(out_s, out_p)});
  }
  {
    const int K = 10;
    const int M = N * K * T;
    auto in = randu(static_cast<size_t>(M) * F, 11);
    std::vector<double> out_s(in.size()), out_p(in.size());
    const double serial = time_best_ms(
        [&] { refk::softmax_lastaxis_forward(in.data(), M, F, out_s.data()); }, reps);
    const double par = time_best_ms(
        [&] { kernels::softmax_lastaxis_forward(in.data(), M, F, out_p.data()); }, reps);
    rows.push_back({"softmax over F", serial, par, max_abs_diff(out_s, out_p)});
  }

  std::printf("threads: %d\n", omp_get_max_threads());
  std::printf("%-22s %12s %12s %9s %12s\n", "kernel", "serial ms", "openmp ms", "speedup",
              "max |diff|");
  for (const auto& r : rows)
    std::printf("%-22s %12.3f %12.3f %8.2fx %12.3e\n", r.name.c_str(), r.serial_ms,
                r.omp_ms, r.serial_ms / r.omp_ms, r.diff);
  return 0;
}
