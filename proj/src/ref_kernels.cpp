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

// Serial reference kernels. Plain nested loops, written directly from the
// operator definitions, with no blocking or hoisting. They exist so the
// parallel kernels have something dumb and trustworthy to be checked
// against (tests/) and raced against (tools/bench_kernels).

#include <algorithm>
#include <cmath>
#include <limits>

#include "sedkit/kernels.hpp"

namespace sedkit::refk {

namespace {
inline int64_t idx4(int a, int b, int c, int d, int B, int C, int D) {
  return ((static_cast<int64_t>(a) * B + b) * C + c) * D + d;
}
}  // namespace

void conv2d_forward(const double* in, int N, int Cin, int H, int W,
                    const double* weight, int Cout, int kh, int kw,
                    const double* bias, double* out) {
  const int ph = kh / 2, pw = kw / 2;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = bias ? bias[co] : 0.0;
          for (int ci = 0; ci < Cin; ++ci)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx) {
                const int yy = y + dy - ph, xx = x + dx - pw;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                acc += weight[idx4(co, ci, dy, dx, Cin, kh, kw)] *
                       in[idx4(n, ci, yy, xx, Cin, H, W)];
              }
          out[idx4(n, co, y, x, Cout, H, W)] = acc;
        }
}

void conv2d_backward_input(const double* grad_out, int N, int Cin, int H, int W,
                           const double* weight, int Cout, int kh, int kw,
                           double* grad_in) {
  const int ph = kh / 2, pw = kw / 2;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double g = grad_out[idx4(n, co, y, x, Cout, H, W)];
          for (int ci = 0; ci < Cin; ++ci)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx) {
                const int yy = y + dy - ph, xx = x + dx - pw;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                grad_in[idx4(n, ci, yy, xx, Cin, H, W)] +=
                    g * weight[idx4(co, ci, dy, dx, Cin, kh, kw)];
              }
        }
}

void conv2d_backward_params(const double* in, const double* grad_out,
                            int N, int Cin, int H, int W,
                            int Cout, int kh, int kw,
                            double* grad_weight, double* grad_bias) {
  const int ph = kh / 2, pw = kw / 2;
  for (int n = 0; n < N; ++n)
    for (int co = 0; co < Cout; ++co)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double g = grad_out[idx4(n, co, y, x, Cout, H, W)];
          if (grad_bias) grad_bias[co] += g;
          for (int ci = 0; ci < Cin; ++ci)
            for (int dy = 0; dy < kh; ++dy)
              for (int dx = 0; dx < kw; ++dx) {
                const int yy = y + dy - ph, xx = x + dx - pw;
                if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                grad_weight[idx4(co, ci, dy, dx, Cin, kh, kw)] +=
                    g * in[idx4(n, ci, yy, xx, Cin, H, W)];
              }
        }
}

void batchnorm_forward_train(const double* in, int N, int C, int H, int W,
                             const double* gamma, const double* beta,
                             double momentum, double eps,
                             double* out, double* save_mean, double* save_invstd,
                             double* running_mean, double* running_var) {
  const int64_t m = static_cast<int64_t>(N) * H * W;
  for (int c = 0; c < C; ++c) {
    double mean = 0.0;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) mean += in[idx4(n, c, y, x, C, H, W)];
    mean /= static_cast<double>(m);
    double var = 0.0;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const double d = in[idx4(n, c, y, x, C, H, W)] - mean;
          var += d * d;
        }
    var /= static_cast<double>(m);
    const double invstd = 1.0 / std::sqrt(var + eps);
    save_mean[c] = mean;
    save_invstd[c] = invstd;
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
    for (int n = 0; n < N; ++n)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const int64_t i = idx4(n, c, y, x, C, H, W);
          out[i] = gamma[c] * (in[i] - mean) * invstd + beta[c];
        }
  }
}

void avgpool3x3_forward(const double* in, int N, int C, int H, int W, double* out) {
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double acc = 0.0;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              acc += in[idx4(n, c, yy, xx, C, H, W)];
            }
          out[idx4(n, c, y, x, C, H, W)] = acc / 9.0;
        }
}

void maxpool3x3_forward(const double* in, int N, int C, int H, int W,
                        double* out, int32_t* argmax) {
  for (int n = 0; n < N; ++n)
    for (int c = 0; c < C; ++c)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double best = -std::numeric_limits<double>::infinity();
          int32_t besti = -1;
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int yy = y + dy, xx = x + dx;
              if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
              if (in[idx4(n, c, yy, xx, C, H, W)] > best) {
                best = in[idx4(n, c, yy, xx, C, H, W)];
                besti = yy * W + xx;
              }
            }
          out[idx4(n, c, y, x, C, H, W)] = best;
          argmax[idx4(n, c, y, x, C, H, W)] = besti;
        }
}

void linear_forward(const double* in, int M, int Fin,
                    const double* weight, int Fout, const double* bias,
                    double* out) {
  for (int m = 0; m < M; ++m)
    for (int fo = 0; fo < Fout; ++fo) {
      double acc = bias ? bias[fo] : 0.0;
      for (int fi = 0; fi < Fin; ++fi)
        acc += weight[static_cast<int64_t>(fo) * Fin + fi] *
               in[static_cast<int64_t>(m) * Fin + fi];
      out[static_cast<int64_t>(m) * Fout + fo] = acc;
    }
}

void softmax_lastaxis_forward(const double* in, int M, int L, double* out) {
  for (int m = 0; m < M; ++m) {
    const double* ip = in + static_cast<int64_t>(m) * L;
    double* op = out + static_cast<int64_t>(m) * L;
    double mx = ip[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, ip[i]);
    double sum = 0.0;
    for (int i = 0; i < L; ++i) sum += std::exp(ip[i] - mx);
    for (int i = 0; i < L; ++i) op[i] = std::exp(ip[i] - mx) / sum;
  }
}

}  // namespace sedkit::refk
