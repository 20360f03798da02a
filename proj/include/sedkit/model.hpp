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

#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "sedkit/features.hpp"
#include "sedkit/pooling.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

// Shared segmentation encoder + classification head + reconstruction decoder.
// Every stage is stride-1 with matched padding, so the T x F extent of the
// input survives to every intermediate tensor.
struct ModelConfig {
  std::vector<int> encoder_widths = {32, 64, 128, 256};
  std::vector<int> decoder_widths;  // empty -> reversed encoder widths minus the last
  int n_classes = 41;
  int n_mels = 64;
  std::string block_pool = "avg";  // "avg" | "max" inside conv blocks
  double bn_eps = 1e-5;
  double bn_momentum = 0.1;
  // The decoder's block stack ends in ReLU; a trailing linear 1x1 conv (on by
  // default) lets reconstructions reach the negative values a standardized
  // log-mel target contains.
  bool decoder_final_linear = true;
  bool attention_per_class = false;

  static ModelConfig full_scale();
  static ModelConfig desk_scale(int n_classes = 3, int n_mels = 32);
  std::vector<int> decoder_widths_or_default() const;
  void validate() const;
};

struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

struct BufferRef {
  std::string name;
  Tensor* value;
};

namespace layers {

struct Conv2d {
  int cin = 0, cout = 0, k = 3;
  Tensor w, b, gw, gb;
  Tensor in_cache;
  bool cached = false;

  void build(int cin_, int cout_, int k_, std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
};

struct BatchNorm2d {
  int c = 0;
  double eps = 1e-5, momentum = 0.1;
  Tensor gamma, beta, ggamma, gbeta;
  Tensor running_mean, running_var;
  Tensor save_mean, save_invstd, in_cache;
  bool cached = false;

  void build(int c_, double eps_, double momentum_);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
};

struct ReLU {
  Tensor out_cache;
  bool cached = false;
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
};

struct Pool3x3 {
  bool use_max = false;
  std::vector<int32_t> argmax;
  std::vector<int> in_shape;
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
};

// [Conv3x3 -> BN -> ReLU] x 2, optionally followed by 3x3 stride-1 pooling.
struct ConvBlock {
  Conv2d conv1, conv2;
  BatchNorm2d bn1, bn2;
  ReLU relu1, relu2;
  Pool3x3 pool;
  bool with_pool = true;

  void build(int cin, int cout, const ModelConfig& cfg, bool with_pool_,
             std::mt19937_64& rng);
  Tensor forward(const Tensor& x, bool train);
  Tensor backward(const Tensor& grad_out);
  void collect(const std::string& prefix, std::vector<ParamRef>& params,
               std::vector<BufferRef>& buffers);
};

}  // namespace layers

// Batched forward products; layer-internal caches (train mode) carry what
// backward needs.
struct ForwardBatch {
  Tensor shared_rep;      // {N,C,T,F}
  Tensor class_mask;      // {N,K,T,F}
  Tensor probs;           // {N,K}
  Tensor reconstruction;  // {N,T,F}; empty when the decoder is off
  PoolingCache pool_cache;
  bool trained_mode = false;
  bool with_decoder = false;
};

// Single-clip outputs in spec shape.
struct ForwardOutputs {
  Tensor shared_rep;  // {C,T,F}
  Tensor class_mask;  // {K,T,F}
  ClipPrediction prediction;
  std::optional<AttentionMaps> attention;  // two-step head only
  Tensor reconstruction;  // {T,F}; empty when the decoder is off
};

class Model {
 public:
  Model(const ModelConfig& cfg, const HeadConfig& head, uint64_t seed);

  // x is {N,T,F} standardized log-mel input.
  ForwardBatch forward(const Tensor& x, bool train, bool with_decoder);
  // grad_recon may be null when the decoder was off.
  Tensor backward(const ForwardBatch& fb, const Tensor& x, const Tensor& grad_probs,
                  const Tensor* grad_recon);
  // Decoder stack alone: {N,C,T,F} shared representation -> {N,1,T,F}.
  Tensor run_decoder(const Tensor& shared_rep, bool train);

  const ModelConfig& config() const { return cfg_; }
  const HeadConfig& head() const { return head_; }
  uint64_t init_seed() const { return seed_; }
  AttentionParams* attention_params() { return attn_ ? attn_.get() : nullptr; }
  const AttentionParams* attention_params() const { return attn_ ? attn_.get() : nullptr; }
  AttentionParams* attention_grads() { return attn_grads_ ? attn_grads_.get() : nullptr; }

  std::vector<ParamRef> params();
  std::vector<BufferRef> buffers();
  void zero_grads();
  int64_t parameter_count();

 private:
  ModelConfig cfg_;
  HeadConfig head_;
  uint64_t seed_;
  std::vector<layers::ConvBlock> encoder_;
  layers::Conv2d class_conv_;
  std::vector<layers::ConvBlock> decoder_;
  std::unique_ptr<layers::Conv2d> decoder_out_;  // trailing linear 1x1
  std::unique_ptr<AttentionParams> attn_;
  std::unique_ptr<AttentionParams> attn_grads_;
};

int64_t parameter_count(const ModelConfig& cfg, const HeadConfig& head);

// Single-clip operations (inference mode).
// x {T,F} -> (shared_rep {C,T,F}, class_mask {K,T,F})
std::pair<Tensor, Tensor> encode(Model& model, const Tensor& x);
// shared_rep {C,T,F} -> reconstruction {T,F}
Tensor decode(Model& model, const Tensor& shared_rep);
ForwardOutputs forward_clip(Model& model, const Tensor& x, bool with_decoder);

// Checkpoint: binary container with a JSON header (config echo, head, feature
// config, seed) followed by named f64 tensors (parameters, batch-norm running
// statistics, standardization statistics).
struct Checkpoint {
  ModelConfig model;
  HeadConfig head;
  FeatureConfig features;
  Standardization standardization;
  uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const FeatureConfig& features, const Standardization& std,
                     uint64_t seed);
std::pair<std::unique_ptr<Model>, Checkpoint> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace sedkit
