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
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sedkit/common.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

// MIL pooling operators: class T-F masks Z -> clip-level probabilities.
//
// Two-step attention squashes frequency first and time second:
//   A1 = sigmoid(Z Wa1^T + ba1)      (dense along F, shared across k,t)
//   A1h = softmax_F(A1)
//   C1 = sigmoid(Z Wc1^T + bc1)
//   P1[k,t] = sum_f C1 * A1h
//   A2 = sigmoid(Wa2 P1 + ba2)       (dense along K at each t)
//   A2h = softmax_T(A2)
//   C2 = sigmoid(Wc2 P1 + bc2)
//   P2[k] = sum_t C2 * A2h
// Both branches carry the sigmoid, so every output is a convex combination
// of values strictly inside (0,1) and cannot overflow past 1.

struct ClipPrediction {
  std::vector<double> probs;  // length K, each strictly in (0,1)
};

struct AttentionParams {
  bool per_class_step1 = false;  // give every class its own step-1 maps
  int n_classes = 0;
  int n_mels = 0;
  Tensor w_a1, b_a1;  // {G,F,F}, {F} with G = per_class_step1 ? K : 1
  Tensor w_c1, b_c1;
  Tensor w_a2, b_a2;  // {K,K}, {K}
  Tensor w_c2, b_c2;

  static AttentionParams init(int n_classes, int n_mels, bool per_class,
                              uint64_t seed);
  static AttentionParams zeros_like(const AttentionParams& other);
  void validate(int n_classes, int n_mels) const;
};

// Intermediates of the two-step operator for one clip, kept for plots.
struct AttentionMaps {
  Tensor step1_weights;  // {K,T,F}, sums to 1 over F
  Tensor step1_output;   // {K,T}
  Tensor step2_weights;  // {K,T}, sums to 1 over T
  Tensor step2_output;   // {K}
};

enum class HeadKind { kGmp, kGap, kGwrp, kSingleStep, kTwoStep };

HeadKind head_from_name(const std::string& name);  // "gmp" "gap" "gwrp" "attention" "2ap"
std::string head_name(HeadKind kind);
bool head_uses_attention_params(HeadKind kind);

struct HeadConfig {
  HeadKind kind = HeadKind::kTwoStep;
  double gwrp_r = 0.5;
  std::vector<double> gwrp_r_per_class;  // optional override, length K
};

// Scratch saved by the batched forward for the matching backward.
struct PoolingCache {
  std::vector<int32_t> argmax;  // gmp / gwrp r=0
  std::vector<int32_t> order;   // gwrp sort permutation per (n,k)
  Tensor pre;                   // pre-sigmoid reductions of the simple heads
  Tensor probs;                 // {N,K}
  Tensor a1, a1hat, c1, p1;     // step 1 (also single-step a / joint softmax / c)
  Tensor p1t;                   // {N,T,K}
  Tensor a2, a2hat, c2;         // step 2
};

// Batched forward: Z {N,K,T,F} -> probs {N,K}. params may be null for the
// parameter-free heads.
void pooling_forward(const Tensor& z, const HeadConfig& cfg,
                     const AttentionParams* params, Tensor& probs,
                     PoolingCache& cache);

// Accumulates grad_z (same shape as z) and, for attention heads, parameter
// gradients into param_grads (shapes from AttentionParams::zeros_like).
void pooling_backward(const Tensor& z, const Tensor& grad_probs,
                      const HeadConfig& cfg, const AttentionParams* params,
                      const PoolingCache& cache, Tensor& grad_z,
                      AttentionParams* param_grads);

// Single-clip operators with the contracts above; z is {K,T,F}.
ClipPrediction global_max_pool(const Tensor& z);
ClipPrediction global_avg_pool(const Tensor& z);
ClipPrediction gwrp(const Tensor& z, double r);
// -> (step1_output {K,T}, step1_weights {K,T,F})
std::pair<Tensor, Tensor> attention_step1(const Tensor& z, const AttentionParams& params);
// -> (step2_output {K}, step2_weights {K,T}); input is step1_output {K,T}.
std::pair<Tensor, Tensor> attention_step2(const Tensor& p1, const AttentionParams& params);
std::pair<ClipPrediction, AttentionMaps> two_step_attention(const Tensor& z,
                                                            const AttentionParams& params);
ClipPrediction single_step_attention(const Tensor& z, const AttentionParams& params);

}  // namespace sedkit
