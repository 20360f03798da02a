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

#include <cstdint>

// Low-level compute kernels. sedkit::kernels holds the OpenMP-parallel
// implementations used everywhere; sedkit::refk holds independently written
// serial versions kept for testing and benchmarking. Every parallel loop
// assigns each output element to exactly one thread, so results are
// bit-identical for any thread count.
//
// Layout conventions: activations are [N, C, H, W] row-major (batch,
// channels, time frames, mel bins); conv weights are [Cout, Cin, kh, kw];
// linear weights are [Fout, Fin] (out = in * W^T + b).

namespace sedkit {

// Numerically stable logistic squash. The output is pinned to
// [kSigmoidFloor, 1 - kSigmoidFloor] so downstream probability contracts
// stay strictly inside (0,1) even for saturating logits.
inline constexpr double kSigmoidFloor = 1e-12;
double stable_sigmoid(double x);

namespace kernels {

// Stride-1, zero-padded ("same") 2-D convolution.
void conv2d_forward(const double* in, int N, int Cin, int H, int W,
                    const double* weight, int Cout, int kh, int kw,
                    const double* bias, double* out);
void conv2d_backward_input(const double* grad_out, int N, int Cin, int H, int W,
                           const double* weight, int Cout, int kh, int kw,
                           double* grad_in);
void conv2d_backward_params(const double* in, const double* grad_out,
                            int N, int Cin, int H, int W,
                            int Cout, int kh, int kw,
                            double* grad_weight, double* grad_bias);

// Per-channel batch norm over (N, H, W). Training mode computes biased batch
// statistics, saves them for backward, and folds them into the running
// estimates with the given momentum (new = (1-m)*old + m*batch).
void batchnorm_forward_train(const double* in, int N, int C, int H, int W,
                             const double* gamma, const double* beta,
                             double momentum, double eps,
                             double* out, double* save_mean, double* save_invstd,
                             double* running_mean, double* running_var);
void batchnorm_forward_eval(const double* in, int N, int C, int H, int W,
                            const double* gamma, const double* beta, double eps,
                            const double* running_mean, const double* running_var,
                            double* out);
void batchnorm_backward(const double* in, const double* grad_out,
                        int N, int C, int H, int W,
                        const double* gamma,
                        const double* save_mean, const double* save_invstd,
                        double* grad_in, double* grad_gamma, double* grad_beta);

void relu_forward(const double* in, int64_t n, double* out);
void relu_backward(const double* out, const double* grad_out, int64_t n, double* grad_in);

// 3x3, stride 1, padding 1 average pooling; the divisor is always 9
// (zero padding counts), which keeps the operator linear.
void avgpool3x3_forward(const double* in, int N, int C, int H, int W, double* out);
void avgpool3x3_backward(const double* grad_out, int N, int C, int H, int W, double* grad_in);

// 3x3, stride 1, padding 1 max pooling; argmax indices recorded for backward.
void maxpool3x3_forward(const double* in, int N, int C, int H, int W,
                        double* out, int32_t* argmax);
void maxpool3x3_backward(const double* grad_out, const int32_t* argmax,
                         int N, int C, int H, int W, double* grad_in);

// out[m, :] = W * in[m, :] + b for M independent rows.
void linear_forward(const double* in, int M, int Fin,
                    const double* weight, int Fout, const double* bias,
                    double* out);
void linear_backward_input(const double* grad_out, int M, int Fin,
                           const double* weight, int Fout, double* grad_in);
void linear_backward_params(const double* in, const double* grad_out,
                            int M, int Fin, int Fout,
                            double* grad_weight, double* grad_bias);

void sigmoid_forward(const double* in, int64_t n, double* out);
// grad wrt the pre-activation, given the activation values.
void sigmoid_backward(const double* out, const double* grad_out, int64_t n, double* grad_in);

// Row-wise softmax over the last axis (M rows of length L), max-subtracted.
void softmax_lastaxis_forward(const double* in, int M, int L, double* out);
void softmax_lastaxis_backward(const double* out, const double* grad_out,
                               int M, int L, double* grad_in);

}  // namespace kernels

// Serial reference implementations with identical contracts. Written as
// straightforward loops, independently of the parallel versions.
namespace refk {

void conv2d_forward(const double* in, int N, int Cin, int H, int W,
                    const double* weight, int Cout, int kh, int kw,
                    const double* bias, double* out);
void conv2d_backward_input(const double* grad_out, int N, int Cin, int H, int W,
                           const double* weight, int Cout, int kh, int kw,
                           double* grad_in);
void conv2d_backward_params(const double* in, const double* grad_out,
                            int N, int Cin, int H, int W,
                            int Cout, int kh, int kw,
                            double* grad_weight, double* grad_bias);
void batchnorm_forward_train(const double* in, int N, int C, int H, int W,
                             const double* gamma, const double* beta,
                             double momentum, double eps,
                             double* out, double* save_mean, double* save_invstd,
                             double* running_mean, double* running_var);
void avgpool3x3_forward(const double* in, int N, int C, int H, int W, double* out);
void maxpool3x3_forward(const double* in, int N, int C, int H, int W,
                        double* out, int32_t* argmax);
void linear_forward(const double* in, int M, int Fin,
                    const double* weight, int Fout, const double* bias,
                    double* out);
void softmax_lastaxis_forward(const double* in, int M, int L, double* out);

}  // namespace refk

}  // namespace sedkit
