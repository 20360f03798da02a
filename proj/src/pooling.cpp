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
#include "sedkit/pooling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "sedkit/kernels.hpp"

namespace sedkit {

namespace {

void check_z(const Tensor& z) {
  if (z.ndim() != 4 || z.dim(0) < 1 || z.dim(1) < 1 || z.dim(2) < 1 || z.dim(3) < 1)
    throw InvalidInput("pooling: expected Z of shape {N,K,T,F}");
}

void fill_uniform(Tensor& t, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
}

void transpose_nkt_ntk(const double* in, int N, int K, int T, double* out) {
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k)
      for (int t = 0; t < T; ++t)
        out[(static_cast<int64_t>(n) * T + t) * K + k] =
            in[(static_cast<int64_t>(n) * K + k) * T + t];
}

void transpose_ntk_nkt(const double* in, int N, int T, int K, double* out) {
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int k = 0; k < K; ++k)
        out[(static_cast<int64_t>(n) * K + k) * T + t] =
            in[(static_cast<int64_t>(n) * T + t) * K + k];
}

// Dense map along F for every (n,k,t) row; honors per-class step-1 weights.
void step1_linear(const Tensor& z, const Tensor& w, const Tensor& b, bool per_class,
                  Tensor& out) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  if (!per_class) {
    kernels::linear_forward(z.ptr(), N * K * T, F, w.ptr(), F, b.ptr(), out.ptr());
    return;
  }
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const int64_t off = (static_cast<int64_t>(n) * K + k) * T * F;
      kernels::linear_forward(z.ptr() + off, T, F,
                              w.ptr() + static_cast<int64_t>(k) * F * F, F, b.ptr(),
                              out.ptr() + off);
    }
}

void step1_linear_backward(const Tensor& z, const Tensor& grad_lin, const Tensor& w,
                           bool per_class, Tensor& grad_z, Tensor* grad_w,
                           Tensor* grad_b) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  if (!per_class) {
    kernels::linear_backward_input(grad_lin.ptr(), N * K * T, F, w.ptr(), F, grad_z.ptr());
    if (grad_w)
      kernels::linear_backward_params(z.ptr(), grad_lin.ptr(), N * K * T, F, F,
                                      grad_w->ptr(), grad_b ? grad_b->ptr() : nullptr);
    return;
  }
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const int64_t off = (static_cast<int64_t>(n) * K + k) * T * F;
      kernels::linear_backward_input(grad_lin.ptr() + off, T, F,
                                     w.ptr() + static_cast<int64_t>(k) * F * F, F,
                                     grad_z.ptr() + off);
      if (grad_w)
        kernels::linear_backward_params(z.ptr() + off, grad_lin.ptr() + off, T, F, F,
                                        grad_w->ptr() + static_cast<int64_t>(k) * F * F,
                                        grad_b ? grad_b->ptr() : nullptr);
    }
}

}  // namespace

AttentionParams AttentionParams::init(int n_classes, int n_mels, bool per_class,
                                      uint64_t seed) {
  if (n_classes < 1 || n_mels < 1)
    throw InvalidInput("AttentionParams: K and F must be >= 1");
  AttentionParams p;
  p.per_class_step1 = per_class;
  p.n_classes = n_classes;
  p.n_mels = n_mels;
  const int g = per_class ? n_classes : 1;
  p.w_a1 = Tensor({g, n_mels, n_mels});
  p.w_c1 = Tensor({g, n_mels, n_mels});
  p.b_a1 = Tensor({n_mels});
  p.b_c1 = Tensor({n_mels});
  p.w_a2 = Tensor({n_classes, n_classes});
  p.w_c2 = Tensor({n_classes, n_classes});
  p.b_a2 = Tensor({n_classes});
  p.b_c2 = Tensor({n_classes});
  std::mt19937_64 rng(seed);
  fill_uniform(p.w_a1, 1.0 / std::sqrt(n_mels), rng);
  fill_uniform(p.w_c1, 1.0 / std::sqrt(n_mels), rng);
  fill_uniform(p.w_a2, 1.0 / std::sqrt(n_classes), rng);
  fill_uniform(p.w_c2, 1.0 / std::sqrt(n_classes), rng);
  return p;
}

AttentionParams AttentionParams::zeros_like(const AttentionParams& other) {
  AttentionParams p;
  p.per_class_step1 = other.per_class_step1;
  p.n_classes = other.n_classes;
  p.n_mels = other.n_mels;
  p.w_a1 = Tensor(other.w_a1.shape());
  p.b_a1 = Tensor(other.b_a1.shape());
  p.w_c1 = Tensor(other.w_c1.shape());
  p.b_c1 = Tensor(other.b_c1.shape());
  p.w_a2 = Tensor(other.w_a2.shape());
  p.b_a2 = Tensor(other.b_a2.shape());
  p.w_c2 = Tensor(other.w_c2.shape());
  p.b_c2 = Tensor(other.b_c2.shape());
  return p;
}

void AttentionParams::validate(int k, int f) const {
  const int g = per_class_step1 ? k : 1;
  auto expect = [](const Tensor& t, std::vector<int> shape, const char* name) {
    if (t.shape() != shape)
      throw InvalidInput(std::string("AttentionParams: bad shape for ") + name);
    if (!t.all_finite())
      throw InvalidInput(std::string("AttentionParams: non-finite values in ") + name);
  };
  expect(w_a1, {g, f, f}, "w_a1");
  expect(b_a1, {f}, "b_a1");
  expect(w_c1, {g, f, f}, "w_c1");
  expect(b_c1, {f}, "b_c1");
  expect(w_a2, {k, k}, "w_a2");
  expect(b_a2, {k}, "b_a2");
  expect(w_c2, {k, k}, "w_c2");
  expect(b_c2, {k}, "b_c2");
}

HeadKind head_from_name(const std::string& name) {
  if (name == "gmp") return HeadKind::kGmp;
  if (name == "gap") return HeadKind::kGap;
  if (name == "gwrp") return HeadKind::kGwrp;
  if (name == "attention") return HeadKind::kSingleStep;
  if (name == "2ap") return HeadKind::kTwoStep;
  throw ConfigError("unknown pooling head '" + name +
                    "' (expected gmp, gap, gwrp, attention or 2ap)");
}

std::string head_name(HeadKind kind) {
  switch (kind) {
    case HeadKind::kGmp: return "gmp";
    case HeadKind::kGap: return "gap";
    case HeadKind::kGwrp: return "gwrp";
    case HeadKind::kSingleStep: return "attention";
    case HeadKind::kTwoStep: return "2ap";
  }
  throw InvalidInput("head_name: bad enum");
}

bool head_uses_attention_params(HeadKind kind) {
  return kind == HeadKind::kSingleStep || kind == HeadKind::kTwoStep;
}

namespace {

double gwrp_r_for_class(const HeadConfig& cfg, int k) {
  if (!cfg.gwrp_r_per_class.empty()) return cfg.gwrp_r_per_class[k];
  return cfg.gwrp_r;
}

void simple_heads_forward(const Tensor& z, const HeadConfig& cfg, Tensor& probs,
                          PoolingCache& cache) {
  const int N = z.dim(0), K = z.dim(1);
  const int64_t tf = static_cast<int64_t>(z.dim(2)) * z.dim(3);
  cache.pre = Tensor({N, K});
  cache.argmax.assign(static_cast<size_t>(N) * K, -1);
  if (cfg.kind == HeadKind::kGwrp) {
    for (int k = 0; k < K; ++k) {
      const double r = gwrp_r_for_class(cfg, k);
      if (!(r >= 0.0 && r <= 1.0))
        throw InvalidInput("gwrp: decay r must lie in [0,1]");
    }
    cache.order.assign(static_cast<size_t>(N) * K * tf, 0);
  }

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double* zp = z.ptr() + (static_cast<int64_t>(n) * K + k) * tf;
      const double r = cfg.kind == HeadKind::kGwrp ? gwrp_r_for_class(cfg, k)
                       : cfg.kind == HeadKind::kGmp ? 0.0
                                                    : 1.0;
      double pre;
      if (r == 0.0) {
        // max; ties keep the first scan position
        double best = zp[0];
        int32_t besti = 0;
        for (int64_t i = 1; i < tf; ++i)
          if (zp[i] > best) {
            best = zp[i];
            besti = static_cast<int32_t>(i);
          }
        cache.argmax[static_cast<size_t>(n) * K + k] = besti;
        pre = best;
      } else if (r == 1.0) {
        double acc = 0.0;
        for (int64_t i = 0; i < tf; ++i) acc += zp[i];
        pre = acc / static_cast<double>(tf);
      } else {
        int32_t* ord = cache.order.data() + (static_cast<size_t>(n) * K + k) * tf;
        std::iota(ord, ord + tf, 0);
        // stable sort: descending by value, ties by original index
        std::stable_sort(ord, ord + tf,
                         [zp](int32_t a, int32_t b) { return zp[a] > zp[b]; });
        double w = 1.0, num = 0.0, den = 0.0;
        for (int64_t j = 0; j < tf; ++j) {
          num += w * zp[ord[j]];
          den += w;
          w *= r;
        }
        pre = num / den;
      }
      cache.pre.at2(n, k) = pre;
      probs.at2(n, k) = stable_sigmoid(pre);
    }
  }
}

void simple_heads_backward(const Tensor& z, const Tensor& grad_probs,
                           const HeadConfig& cfg, const PoolingCache& cache,
                           Tensor& grad_z) {
  const int N = z.dim(0), K = z.dim(1);
  const int64_t tf = static_cast<int64_t>(z.dim(2)) * z.dim(3);
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n) {
    for (int k = 0; k < K; ++k) {
      const double p = cache.probs.at2(n, k);
      const double coeff = grad_probs.at2(n, k) * p * (1.0 - p);
      double* gz = grad_z.ptr() + (static_cast<int64_t>(n) * K + k) * tf;
      const double r = cfg.kind == HeadKind::kGwrp ? gwrp_r_for_class(cfg, k)
                       : cfg.kind == HeadKind::kGmp ? 0.0
                                                    : 1.0;
      if (r == 0.0) {
        gz[cache.argmax[static_cast<size_t>(n) * K + k]] += coeff;
      } else if (r == 1.0) {
        const double u = coeff / static_cast<double>(tf);
        for (int64_t i = 0; i < tf; ++i) gz[i] += u;
      } else {
        const int32_t* ord = cache.order.data() + (static_cast<size_t>(n) * K + k) * tf;
        double w = 1.0, den = 0.0;
        for (int64_t j = 0; j < tf; ++j) {
          den += w;
          w *= r;
        }
        w = 1.0;
        for (int64_t j = 0; j < tf; ++j) {
          gz[ord[j]] += coeff * w / den;
          w *= r;
        }
      }
    }
  }
}

void two_step_forward(const Tensor& z, const AttentionParams& params, Tensor& probs,
                      PoolingCache& cache) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  const int m1 = N * K * T;

  cache.a1 = Tensor({N, K, T, F});
  cache.c1 = Tensor({N, K, T, F});
  cache.a1hat = Tensor({N, K, T, F});
  cache.p1 = Tensor({N, K, T});
  step1_linear(z, params.w_a1, params.b_a1, params.per_class_step1, cache.a1);
  kernels::sigmoid_forward(cache.a1.ptr(), cache.a1.size(), cache.a1.ptr());
  kernels::softmax_lastaxis_forward(cache.a1.ptr(), m1, F, cache.a1hat.ptr());
  step1_linear(z, params.w_c1, params.b_c1, params.per_class_step1, cache.c1);
  kernels::sigmoid_forward(cache.c1.ptr(), cache.c1.size(), cache.c1.ptr());
#pragma omp parallel for schedule(static)
  for (int m = 0; m < m1; ++m) {
    const double* cp = cache.c1.ptr() + static_cast<int64_t>(m) * F;
    const double* ap = cache.a1hat.ptr() + static_cast<int64_t>(m) * F;
    double acc = 0.0;
    for (int f = 0; f < F; ++f) acc += cp[f] * ap[f];
    cache.p1[m] = acc;
  }

  cache.p1t = Tensor({N, T, K});
  transpose_nkt_ntk(cache.p1.ptr(), N, K, T, cache.p1t.ptr());
  Tensor lin_t({N, T, K});
  cache.a2 = Tensor({N, K, T});
  cache.c2 = Tensor({N, K, T});
  cache.a2hat = Tensor({N, K, T});
  kernels::linear_forward(cache.p1t.ptr(), N * T, K, params.w_a2.ptr(), K,
                          params.b_a2.ptr(), lin_t.ptr());
  transpose_ntk_nkt(lin_t.ptr(), N, T, K, cache.a2.ptr());
  kernels::sigmoid_forward(cache.a2.ptr(), cache.a2.size(), cache.a2.ptr());
  kernels::softmax_lastaxis_forward(cache.a2.ptr(), N * K, T, cache.a2hat.ptr());
  kernels::linear_forward(cache.p1t.ptr(), N * T, K, params.w_c2.ptr(), K,
                          params.b_c2.ptr(), lin_t.ptr());
  transpose_ntk_nkt(lin_t.ptr(), N, T, K, cache.c2.ptr());
  kernels::sigmoid_forward(cache.c2.ptr(), cache.c2.size(), cache.c2.ptr());

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double* cp = cache.c2.ptr() + (static_cast<int64_t>(n) * K + k) * T;
      const double* ap = cache.a2hat.ptr() + (static_cast<int64_t>(n) * K + k) * T;
      double acc = 0.0;
      for (int t = 0; t < T; ++t) acc += cp[t] * ap[t];
      probs.at2(n, k) = acc;
    }
}

void two_step_backward(const Tensor& z, const Tensor& grad_probs,
                       const AttentionParams& params, const PoolingCache& cache,
                       Tensor& grad_z, AttentionParams* grads) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  const int m1 = N * K * T;

  // step 2
  Tensor dc2({N, K, T}), da2hat({N, K, T}), da2({N, K, T}), dla2({N, K, T});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double g = grad_probs.at2(n, k);
      const int64_t base = (static_cast<int64_t>(n) * K + k) * T;
      for (int t = 0; t < T; ++t) {
        dc2[base + t] = g * cache.a2hat[base + t];
        da2hat[base + t] = g * cache.c2[base + t];
      }
    }
  kernels::softmax_lastaxis_backward(cache.a2hat.ptr(), da2hat.ptr(), N * K, T, da2.ptr());
  kernels::sigmoid_backward(cache.a2.ptr(), da2.ptr(), da2.size(), dla2.ptr());
  Tensor dlc2({N, K, T});
  kernels::sigmoid_backward(cache.c2.ptr(), dc2.ptr(), dc2.size(), dlc2.ptr());

  Tensor dla2t({N, T, K}), dlc2t({N, T, K}), dp1t({N, T, K});
  transpose_nkt_ntk(dla2.ptr(), N, K, T, dla2t.ptr());
  transpose_nkt_ntk(dlc2.ptr(), N, K, T, dlc2t.ptr());
  kernels::linear_backward_input(dla2t.ptr(), N * T, K, params.w_a2.ptr(), K, dp1t.ptr());
  kernels::linear_backward_input(dlc2t.ptr(), N * T, K, params.w_c2.ptr(), K, dp1t.ptr());
  if (grads) {
    kernels::linear_backward_params(cache.p1t.ptr(), dla2t.ptr(), N * T, K, K,
                                    grads->w_a2.ptr(), grads->b_a2.ptr());
    kernels::linear_backward_params(cache.p1t.ptr(), dlc2t.ptr(), N * T, K, K,
                                    grads->w_c2.ptr(), grads->b_c2.ptr());
  }
  Tensor dp1({N, K, T});
  transpose_ntk_nkt(dp1t.ptr(), N, T, K, dp1.ptr());

  // step 1
  Tensor dc1({N, K, T, F}), da1hat({N, K, T, F});
#pragma omp parallel for schedule(static)
  for (int m = 0; m < m1; ++m) {
    const double g = dp1[m];
    const int64_t base = static_cast<int64_t>(m) * F;
    for (int f = 0; f < F; ++f) {
      dc1[base + f] = g * cache.a1hat[base + f];
      da1hat[base + f] = g * cache.c1[base + f];
    }
  }
  Tensor da1({N, K, T, F}), dla1({N, K, T, F}), dlc1({N, K, T, F});
  kernels::softmax_lastaxis_backward(cache.a1hat.ptr(), da1hat.ptr(), m1, F, da1.ptr());
  kernels::sigmoid_backward(cache.a1.ptr(), da1.ptr(), da1.size(), dla1.ptr());
  kernels::sigmoid_backward(cache.c1.ptr(), dc1.ptr(), dc1.size(), dlc1.ptr());
  step1_linear_backward(z, dla1, params.w_a1, params.per_class_step1, grad_z,
                        grads ? &grads->w_a1 : nullptr, grads ? &grads->b_a1 : nullptr);
  step1_linear_backward(z, dlc1, params.w_c1, params.per_class_step1, grad_z,
                        grads ? &grads->w_c1 : nullptr, grads ? &grads->b_c1 : nullptr);
}

void single_step_forward(const Tensor& z, const AttentionParams& params, Tensor& probs,
                         PoolingCache& cache) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  const int64_t tf = static_cast<int64_t>(T) * F;
  cache.a1 = Tensor({N, K, T, F});  // raw attention logits
  cache.c1 = Tensor({N, K, T, F});
  cache.a1hat = Tensor({N, K, T, F});
  step1_linear(z, params.w_a1, params.b_a1, params.per_class_step1, cache.a1);
  // softmax jointly over all T*F locations of a class
  kernels::softmax_lastaxis_forward(cache.a1.ptr(), N * K, static_cast<int>(tf),
                                    cache.a1hat.ptr());
  step1_linear(z, params.w_c1, params.b_c1, params.per_class_step1, cache.c1);
  kernels::sigmoid_forward(cache.c1.ptr(), cache.c1.size(), cache.c1.ptr());
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double* cp = cache.c1.ptr() + (static_cast<int64_t>(n) * K + k) * tf;
      const double* ap = cache.a1hat.ptr() + (static_cast<int64_t>(n) * K + k) * tf;
      double acc = 0.0;
      for (int64_t i = 0; i < tf; ++i) acc += cp[i] * ap[i];
      probs.at2(n, k) = acc;
    }
}

void single_step_backward(const Tensor& z, const Tensor& grad_probs,
                          const AttentionParams& params, const PoolingCache& cache,
                          Tensor& grad_z, AttentionParams* grads) {
  const int N = z.dim(0), K = z.dim(1), T = z.dim(2), F = z.dim(3);
  const int64_t tf = static_cast<int64_t>(T) * F;
  Tensor dc({N, K, T, F}), dahat({N, K, T, F});
#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < N; ++n)
    for (int k = 0; k < K; ++k) {
      const double g = grad_probs.at2(n, k);
      const int64_t base = (static_cast<int64_t>(n) * K + k) * tf;
      for (int64_t i = 0; i < tf; ++i) {
        dc[base + i] = g * cache.a1hat[base + i];
        dahat[base + i] = g * cache.c1[base + i];
      }
    }
  Tensor da({N, K, T, F}), dlc({N, K, T, F});
  kernels::softmax_lastaxis_backward(cache.a1hat.ptr(), dahat.ptr(), N * K,
                                     static_cast<int>(tf), da.ptr());
  kernels::sigmoid_backward(cache.c1.ptr(), dc.ptr(), dc.size(), dlc.ptr());
  step1_linear_backward(z, da, params.w_a1, params.per_class_step1, grad_z,
                        grads ? &grads->w_a1 : nullptr, grads ? &grads->b_a1 : nullptr);
  step1_linear_backward(z, dlc, params.w_c1, params.per_class_step1, grad_z,
                        grads ? &grads->w_c1 : nullptr, grads ? &grads->b_c1 : nullptr);
}

}  // namespace

void pooling_forward(const Tensor& z, const HeadConfig& cfg,
                     const AttentionParams* params, Tensor& probs,
                     PoolingCache& cache) {
  check_z(z);
  if (!z.all_finite()) throw InvalidInput("pooling: Z must be finite");
  const int N = z.dim(0), K = z.dim(1), F = z.dim(3);
  if (cfg.kind == HeadKind::kGwrp && !cfg.gwrp_r_per_class.empty() &&
      static_cast<int>(cfg.gwrp_r_per_class.size()) != K)
    throw InvalidInput("gwrp: per-class r override must have length K");
  probs = Tensor({N, K});
  if (head_uses_attention_params(cfg.kind)) {
    if (!params) throw InvalidInput("pooling: attention head requires parameters");
    params->validate(K, F);
    if (cfg.kind == HeadKind::kTwoStep)
      two_step_forward(z, *params, probs, cache);
    else
      single_step_forward(z, *params, probs, cache);
  } else {
    simple_heads_forward(z, cfg, probs, cache);
  }
  cache.probs = probs;
}

void pooling_backward(const Tensor& z, const Tensor& grad_probs,
                      const HeadConfig& cfg, const AttentionParams* params,
                      const PoolingCache& cache, Tensor& grad_z,
                      AttentionParams* param_grads) {
  check_z(z);
  if (!grad_z.same_shape(z)) throw InvalidInput("pooling_backward: grad_z shape mismatch");
  if (head_uses_attention_params(cfg.kind)) {
    if (!params) throw InvalidInput("pooling_backward: attention head requires parameters");
    if (cfg.kind == HeadKind::kTwoStep)
      two_step_backward(z, grad_probs, *params, cache, grad_z, param_grads);
    else
      single_step_backward(z, grad_probs, *params, cache, grad_z, param_grads);
  } else {
    simple_heads_backward(z, grad_probs, cfg, cache, grad_z);
  }
}

namespace {

Tensor as_batch(const Tensor& z) {
  if (z.ndim() != 3) throw InvalidInput("pooling: expected Z of shape {K,T,F}");
  Tensor zb({1, z.dim(0), z.dim(1), z.dim(2)});
  std::copy(z.vec().begin(), z.vec().end(), zb.vec().begin());
  return zb;
}

ClipPrediction run_simple(const Tensor& z, HeadConfig cfg) {
  const Tensor zb = as_batch(z);
  Tensor probs;
  PoolingCache cache;
  pooling_forward(zb, cfg, nullptr, probs, cache);
  return ClipPrediction{probs.vec()};
}

}  // namespace

ClipPrediction global_max_pool(const Tensor& z) {
  return run_simple(z, HeadConfig{HeadKind::kGmp, 0.0, {}});
}

ClipPrediction global_avg_pool(const Tensor& z) {
  return run_simple(z, HeadConfig{HeadKind::kGap, 0.0, {}});
}

ClipPrediction gwrp(const Tensor& z, double r) {
  if (!(r >= 0.0 && r <= 1.0)) throw InvalidInput("gwrp: decay r must lie in [0,1]");
  return run_simple(z, HeadConfig{HeadKind::kGwrp, r, {}});
}

std::pair<Tensor, Tensor> attention_step1(const Tensor& z, const AttentionParams& params) {
  const Tensor zb = as_batch(z);
  const int K = zb.dim(1), T = zb.dim(2), F = zb.dim(3);
  params.validate(K, F);
  Tensor probs({1, K});
  PoolingCache cache;
  two_step_forward(zb, params, probs, cache);
  Tensor out({K, T}), weights({K, T, F});
  std::copy(cache.p1.vec().begin(), cache.p1.vec().end(), out.vec().begin());
  std::copy(cache.a1hat.vec().begin(), cache.a1hat.vec().end(), weights.vec().begin());
  return {std::move(out), std::move(weights)};
}

std::pair<Tensor, Tensor> attention_step2(const Tensor& p1, const AttentionParams& params) {
  if (p1.ndim() != 2) throw InvalidInput("attention_step2: expected input of shape {K,T}");
  const int K = p1.dim(0), T = p1.dim(1);
  if (K != params.n_classes) throw InvalidInput("attention_step2: class count mismatch");

  Tensor p1t({T, K});
  for (int k = 0; k < K; ++k)
    for (int t = 0; t < T; ++t) p1t.at2(t, k) = p1.at2(k, t);
  Tensor lin_t({T, K}), a2({K, T}), a2hat({K, T}), c2({K, T});
  kernels::linear_forward(p1t.ptr(), T, K, params.w_a2.ptr(), K, params.b_a2.ptr(),
                          lin_t.ptr());
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) a2.at2(k, t) = lin_t.at2(t, k);
  kernels::sigmoid_forward(a2.ptr(), a2.size(), a2.ptr());
  kernels::softmax_lastaxis_forward(a2.ptr(), K, T, a2hat.ptr());
  kernels::linear_forward(p1t.ptr(), T, K, params.w_c2.ptr(), K, params.b_c2.ptr(),
                          lin_t.ptr());
  for (int t = 0; t < T; ++t)
    for (int k = 0; k < K; ++k) c2.at2(k, t) = lin_t.at2(t, k);
  kernels::sigmoid_forward(c2.ptr(), c2.size(), c2.ptr());

  Tensor out({K});
  for (int k = 0; k < K; ++k) {
    double acc = 0.0;
    for (int t = 0; t < T; ++t) acc += c2.at2(k, t) * a2hat.at2(k, t);
    out[k] = acc;
  }
  return {std::move(out), std::move(a2hat)};
}

std::pair<ClipPrediction, AttentionMaps> two_step_attention(const Tensor& z,
                                                            const AttentionParams& params) {
  const Tensor zb = as_batch(z);
  const int K = zb.dim(1), T = zb.dim(2), F = zb.dim(3);
  params.validate(K, F);
  Tensor probs;
  PoolingCache cache;
  HeadConfig cfg{HeadKind::kTwoStep, 0.0, {}};
  pooling_forward(zb, cfg, &params, probs, cache);

  AttentionMaps maps;
  maps.step1_weights = Tensor({K, T, F});
  std::copy(cache.a1hat.vec().begin(), cache.a1hat.vec().end(),
            maps.step1_weights.vec().begin());
  maps.step1_output = Tensor({K, T});
  std::copy(cache.p1.vec().begin(), cache.p1.vec().end(), maps.step1_output.vec().begin());
  maps.step2_weights = Tensor({K, T});
  std::copy(cache.a2hat.vec().begin(), cache.a2hat.vec().end(),
            maps.step2_weights.vec().begin());
  maps.step2_output = Tensor({K});
  std::copy(probs.vec().begin(), probs.vec().end(), maps.step2_output.vec().begin());
  return {ClipPrediction{probs.vec()}, std::move(maps)};
}

ClipPrediction single_step_attention(const Tensor& z, const AttentionParams& params) {
  const Tensor zb = as_batch(z);
  params.validate(zb.dim(1), zb.dim(3));
  Tensor probs;
  PoolingCache cache;
  HeadConfig cfg{HeadKind::kSingleStep, 0.0, {}};
  pooling_forward(zb, cfg, &params, probs, cache);
  return ClipPrediction{probs.vec()};
}

}  // namespace sedkit
