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
#include "sedkit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sedkit {

double stable_sigmoid(double x) {
  double s;
  if (x >= 0.0) {
    const double e = std::exp(-x);
    s = 1.0 / (1.0 + e);
  } else {
    const double e = std::exp(x);
    s = e / (1.0 + e);
  }
  return std::clamp(s, kSigmoidFloor, 1.0 - kSigmoidFloor);
}

namespace kernels {

namespace {
inline int64_t plane(int H, int W) { return static_cast<int64_t>(H) * W; }
}  // namespace

void conv2d_forward(const double* in, int N, int Cin, int H, int W,
                    const double* weight, int Cout, int kh, int kw,
                    const double* bias, double* out) {
  const int ph = kh / 2, pw = kw / 2;
  const int64_t hw = plane(H, W);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int co = 0; co < Cout; ++co) {
      double* op = out + (static_cast<int64_t>(n) * Cout + co) * hw;
      const double b = bias ? bias[co] : 0.0;
      for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) op[y * W + x] = b;
      }
      for (int ci = 0; ci < Cin; ++ci) {
        const double* ip = in + (static_cast<int64_t>(n) * Cin + ci) * hw;
        const double* wp = weight + ((static_cast<int64_t>(co) * Cin + ci) * kh) * kw;
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            const double wv = wp[dy * kw + dx];
            if (wv == 0.0) continue;
            const int oy0 = std::max(0, ph - dy), oy1 = std::min(H, H + ph - dy);
            const int ox0 = std::max(0, pw - dx), ox1 = std::min(W, W + pw - dx);
            for (int y = oy0; y < oy1; ++y) {
              const double* irow = ip + (y + dy - ph) * W + (dx - pw);
              double* orow = op + y * W;
              for (int x = ox0; x < ox1; ++x) orow[x] += wv * irow[x];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_input(const double* grad_out, int N, int Cin, int H, int W,
                           const double* weight, int Cout, int kh, int kw,
                           double* grad_in) {
  const int ph = kh / 2, pw = kw / 2;
  const int64_t hw = plane(H, W);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int ci = 0; ci < Cin; ++ci) {
      double* gp = grad_in + (static_cast<int64_t>(n) * Cin + ci) * hw;
      for (int co = 0; co < Cout; ++co) {
        const double* op = grad_out + (static_cast<int64_t>(n) * Cout + co) * hw;
        const double* wp = weight + ((static_cast<int64_t>(co) * Cin + ci) * kh) * kw;
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            const double wv = wp[dy * kw + dx];
            if (wv == 0.0) continue;
            // out[y, x] consumed in[y + dy - ph, x + dx - pw]; flip for input grads.
            const int iy0 = std::max(0, dy - ph), iy1 = std::min(H, H + dy - ph);
            const int ix0 = std::max(0, dx - pw), ix1 = std::min(W, W + dx - pw);
            for (int y = iy0; y < iy1; ++y) {
              const double* orow = op + (y - dy + ph) * W - (dx - pw);
              double* grow = gp + y * W;
              for (int x = ix0; x < ix1; ++x) grow[x] += wv * orow[x];
            }
          }
        }
      }
    }
  }
}

void conv2d_backward_params(const double* in, const double* grad_out,
                            int N, int Cin, int H, int W,
                            int Cout, int kh, int kw,
                            double* grad_weight, double* grad_bias) {
  const int ph = kh / 2, pw = kw / 2;
  const int64_t hw = plane(H, W);
#pragma omp parallel for schedule(static)
  for (int co = 0; co < Cout; ++co) {
    double bsum = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* op = grad_out + (static_cast<int64_t>(n) * Cout + co) * hw;
      for (int64_t i = 0; i < hw; ++i) bsum += op[i];
      for (int ci = 0; ci < Cin; ++ci) {
        const double* ip = in + (static_cast<int64_t>(n) * Cin + ci) * hw;
        double* wp = grad_weight + ((static_cast<int64_t>(co) * Cin + ci) * kh) * kw;
        for (int dy = 0; dy < kh; ++dy) {
          for (int dx = 0; dx < kw; ++dx) {
            const int oy0 = std::max(0, ph - dy), oy1 = std::min(H, H + ph - dy);
            const int ox0 = std::max(0, pw - dx), ox1 = std::min(W, W + pw - dx);
            double acc = 0.0;
            for (int y = oy0; y < oy1; ++y) {
              const double* irow = ip + (y + dy - ph) * W + (dx - pw);
              const double* orow = op + y * W;
              for (int x = ox0; x < ox1; ++x) acc += orow[x] * irow[x];
            }
            wp[dy * kw + dx] += acc;
          }
        }
      }
    }
    if (grad_bias) grad_bias[co] += bsum;
  }
}

void batchnorm_forward_train(const double* in, int N, int C, int H, int W,
                             const double* gamma, const double* beta,
                             double momentum, double eps,
                             double* out, double* save_mean, double* save_invstd,
                             double* running_mean, double* running_var) {
  const int64_t hw = plane(H, W);
  const int64_t m = static_cast<int64_t>(N) * hw;
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    double sum = 0.0, sq = 0.0;
    for (int n = 0; n < N; ++n) {
      const double* ip = in + (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        sum += ip[i];
        sq += ip[i] * ip[i];
      }
    }
    const double mean = sum / static_cast<double>(m);
    double var = sq / static_cast<double>(m) - mean * mean;
    if (var < 0.0) var = 0.0;
    const double invstd = 1.0 / std::sqrt(var + eps);
    save_mean[c] = mean;
    save_invstd[c] = invstd;
    running_mean[c] = (1.0 - momentum) * running_mean[c] + momentum * mean;
    running_var[c] = (1.0 - momentum) * running_var[c] + momentum * var;
    const double g = gamma[c], b = beta[c];
    for (int n = 0; n < N; ++n) {
      const double* ip = in + (static_cast<int64_t>(n) * C + c) * hw;
      double* op = out + (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) op[i] = g * (ip[i] - mean) * invstd + b;
    }
  }
}

void batchnorm_forward_eval(const double* in, int N, int C, int H, int W,
                            const double* gamma, const double* beta, double eps,
                            const double* running_mean, const double* running_var,
                            double* out) {
  const int64_t hw = plane(H, W);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const double mean = running_mean[c];
    const double invstd = 1.0 / std::sqrt(running_var[c] + eps);
    const double g = gamma[c], b = beta[c];
    for (int n = 0; n < N; ++n) {
      const double* ip = in + (static_cast<int64_t>(n) * C + c) * hw;
      double* op = out + (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) op[i] = g * (ip[i] - mean) * invstd + b;
    }
  }
}

void batchnorm_backward(const double* in, const double* grad_out,
                        int N, int C, int H, int W,
                        const double* gamma,
                        const double* save_mean, const double* save_invstd,
                        double* grad_in, double* grad_gamma, double* grad_beta) {
  const int64_t hw = plane(H, W);
  const double m = static_cast<double>(static_cast<int64_t>(N) * hw);
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const double mean = save_mean[c], invstd = save_invstd[c];
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int n = 0; n < N; ++n) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        const double dy = grad_out[base + i];
        sum_dy += dy;
        sum_dy_xhat += dy * (in[base + i] - mean) * invstd;
      }
    }
    grad_gamma[c] += sum_dy_xhat;
    grad_beta[c] += sum_dy;
    const double g = gamma[c];
    for (int n = 0; n < N; ++n) {
      const int64_t base = (static_cast<int64_t>(n) * C + c) * hw;
      for (int64_t i = 0; i < hw; ++i) {
        const double xhat = (in[base + i] - mean) * invstd;
        grad_in[base + i] +=
            g * invstd * (grad_out[base + i] - sum_dy / m - xhat * sum_dy_xhat / m);
      }
    }
  }
}

void relu_forward(const double* in, int64_t n, double* out) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = in[i] > 0.0 ? in[i] : 0.0;
}

void relu_backward(const double* out, const double* grad_out, int64_t n, double* grad_in) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) grad_in[i] += out[i] > 0.0 ? grad_out[i] : 0.0;
}

void avgpool3x3_forward(const double* in, int N, int C, int H, int W, double* out) {
  const int64_t hw = plane(H, W);
  const int64_t planes = static_cast<int64_t>(N) * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const double* ip = in + p * hw;
    double* op = out + p * hw;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= H) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= W) continue;
            acc += ip[yy * W + xx];
          }
        }
        op[y * W + x] = acc / 9.0;
      }
    }
  }
}

void avgpool3x3_backward(const double* grad_out, int N, int C, int H, int W,
                         double* grad_in) {
  const int64_t hw = plane(H, W);
  const int64_t planes = static_cast<int64_t>(N) * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const double* op = grad_out + p * hw;
    double* gp = grad_in + p * hw;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double acc = 0.0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= H) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= W) continue;
            acc += op[yy * W + xx];
          }
        }
        gp[y * W + x] += acc / 9.0;
      }
    }
  }
}

void maxpool3x3_forward(const double* in, int N, int C, int H, int W,
                        double* out, int32_t* argmax) {
  const int64_t hw = plane(H, W);
  const int64_t planes = static_cast<int64_t>(N) * C;
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const double* ip = in + p * hw;
    double* op = out + p * hw;
    int32_t* ap = argmax + p * hw;
    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        double best = -std::numeric_limits<double>::infinity();
        int32_t besti = -1;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = y + dy;
          if (yy < 0 || yy >= H) continue;
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx;
            if (xx < 0 || xx >= W) continue;
            const double v = ip[yy * W + xx];
            if (v > best) {
              best = v;
              besti = yy * W + xx;
            }
          }
        }
        op[y * W + x] = best;
        ap[y * W + x] = besti;
      }
    }
  }
}

void maxpool3x3_backward(const double* grad_out, const int32_t* argmax,
                         int N, int C, int H, int W, double* grad_in) {
  const int64_t hw = plane(H, W);
  const int64_t planes = static_cast<int64_t>(N) * C;
  // One thread per plane: multiple outputs can share an argmax cell.
#pragma omp parallel for schedule(static)
  for (int64_t p = 0; p < planes; ++p) {
    const double* op = grad_out + p * hw;
    const int32_t* ap = argmax + p * hw;
    double* gp = grad_in + p * hw;
    for (int64_t i = 0; i < hw; ++i) gp[ap[i]] += op[i];
  }
}

void linear_forward(const double* in, int M, int Fin,
                    const double* weight, int Fout, const double* bias,
                    double* out) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    const double* ip = in + static_cast<int64_t>(m) * Fin;
    double* op = out + static_cast<int64_t>(m) * Fout;
    for (int fo = 0; fo < Fout; ++fo) {
      const double* wp = weight + static_cast<int64_t>(fo) * Fin;
      double acc = bias ? bias[fo] : 0.0;
      for (int fi = 0; fi < Fin; ++fi) acc += wp[fi] * ip[fi];
      op[fo] = acc;
    }
  }
}

void linear_backward_input(const double* grad_out, int M, int Fin,
                           const double* weight, int Fout, double* grad_in) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    const double* op = grad_out + static_cast<int64_t>(m) * Fout;
    double* gp = grad_in + static_cast<int64_t>(m) * Fin;
    for (int fo = 0; fo < Fout; ++fo) {
      const double* wp = weight + static_cast<int64_t>(fo) * Fin;
      const double g = op[fo];
      for (int fi = 0; fi < Fin; ++fi) gp[fi] += g * wp[fi];
    }
  }
}

void linear_backward_params(const double* in, const double* grad_out,
                            int M, int Fin, int Fout,
                            double* grad_weight, double* grad_bias) {
#pragma omp parallel for schedule(static)
  for (int fo = 0; fo < Fout; ++fo) {
    double* wp = grad_weight + static_cast<int64_t>(fo) * Fin;
    double bsum = 0.0;
    for (int m = 0; m < M; ++m) {
      const double g = grad_out[static_cast<int64_t>(m) * Fout + fo];
      bsum += g;
      const double* ip = in + static_cast<int64_t>(m) * Fin;
      for (int fi = 0; fi < Fin; ++fi) wp[fi] += g * ip[fi];
    }
    if (grad_bias) grad_bias[fo] += bsum;
  }
}

void sigmoid_forward(const double* in, int64_t n, double* out) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) out[i] = stable_sigmoid(in[i]);
}

void sigmoid_backward(const double* out, const double* grad_out, int64_t n,
                      double* grad_in) {
#pragma omp parallel for schedule(static)
  for (int64_t i = 0; i < n; ++i) grad_in[i] += grad_out[i] * out[i] * (1.0 - out[i]);
}

void softmax_lastaxis_forward(const double* in, int M, int L, double* out) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    const double* ip = in + static_cast<int64_t>(m) * L;
    double* op = out + static_cast<int64_t>(m) * L;
    double mx = ip[0];
    for (int i = 1; i < L; ++i) mx = std::max(mx, ip[i]);
    double sum = 0.0;
    for (int i = 0; i < L; ++i) {
      op[i] = std::exp(ip[i] - mx);
      sum += op[i];
    }
    const double inv = 1.0 / sum;
    for (int i = 0; i < L; ++i) op[i] *= inv;
  }
}

void softmax_lastaxis_backward(const double* out, const double* grad_out,
                               int M, int L, double* grad_in) {
#pragma omp parallel for schedule(static)
  for (int m = 0; m < M; ++m) {
    const double* op = out + static_cast<int64_t>(m) * L;
    const double* gp = grad_out + static_cast<int64_t>(m) * L;
    double* ip = grad_in + static_cast<int64_t>(m) * L;
    double dot = 0.0;
    for (int i = 0; i < L; ++i) dot += op[i] * gp[i];
    for (int i = 0; i < L; ++i) ip[i] += op[i] * (gp[i] - dot);
  }
}

}  // namespace kernels
}  // namespace sedkit
