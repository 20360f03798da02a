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
#include "sedkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

#include <json.hpp>

#include "sedkit/kernels.hpp"

namespace sedkit {

using ordered_json = nlohmann::ordered_json;

ModelConfig ModelConfig::full_scale() {
  ModelConfig cfg;
  cfg.encoder_widths = {32, 64, 128, 256};
  cfg.n_classes = 41;
  cfg.n_mels = 64;
  return cfg;
}

ModelConfig ModelConfig::desk_scale(int n_classes, int n_mels) {
  ModelConfig cfg;
  cfg.encoder_widths = {8, 16, 32};
  cfg.n_classes = n_classes;
  cfg.n_mels = n_mels;
  return cfg;
}

std::vector<int> ModelConfig::decoder_widths_or_default() const {
  if (!decoder_widths.empty()) return decoder_widths;
  std::vector<int> w(encoder_widths.rbegin() + 1, encoder_widths.rend());
  return w;
}

void ModelConfig::validate() const {
  if (encoder_widths.empty()) throw ConfigError("model: encoder_widths must be non-empty");
  for (size_t i = 0; i < encoder_widths.size(); ++i) {
    if (encoder_widths[i] < 1) throw ConfigError("model: widths must be positive");
    if (i > 0 && encoder_widths[i] <= encoder_widths[i - 1])
      throw ConfigError("model: encoder_widths must be increasing");
  }
  for (int w : decoder_widths)
    if (w < 1) throw ConfigError("model: widths must be positive");
  if (n_classes < 1) throw ConfigError("model: n_classes must be >= 1");
  if (n_mels < 1) throw ConfigError("model: n_mels must be >= 1");
  if (block_pool != "avg" && block_pool != "max")
    throw ConfigError("model: block_pool must be 'avg' or 'max'");
  if (bn_eps <= 0.0) throw ConfigError("model: bn_eps must be positive");
  if (bn_momentum <= 0.0 || bn_momentum >= 1.0)
    throw ConfigError("model: bn_momentum must lie in (0,1)");
}

namespace layers {

namespace {
void check_input(const Tensor& x, int want_c) {
  if (x.ndim() != 4) throw InvalidInput("layer: expected {N,C,T,F} input");
  if (x.dim(1) != want_c)
    throw InvalidInput("layer: channel mismatch, got " + std::to_string(x.dim(1)) +
                       " want " + std::to_string(want_c));
}
}  // namespace

void Conv2d::build(int cin_, int cout_, int k_, std::mt19937_64& rng) {
  cin = cin_;
  cout = cout_;
  k = k_;
  w = Tensor({cout, cin, k, k});
  b = Tensor({cout});
  gw = Tensor(w.shape());
  gb = Tensor(b.shape());
  const double bound = 1.0 / std::sqrt(static_cast<double>(cin) * k * k);
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (int64_t i = 0; i < w.size(); ++i) w[i] = dist(rng);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
  check_input(x, cin);
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  Tensor out({N, cout, H, W});
  kernels::conv2d_forward(x.ptr(), N, cin, H, W, w.ptr(), cout, k, k, b.ptr(), out.ptr());
  if (train) {
    in_cache = x;
    cached = true;
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  if (!cached) throw Error("Conv2d: backward without cached forward");
  const int N = in_cache.dim(0), H = in_cache.dim(2), W = in_cache.dim(3);
  Tensor grad_in(in_cache.shape());
  kernels::conv2d_backward_input(grad_out.ptr(), N, cin, H, W, w.ptr(), cout, k, k,
                                 grad_in.ptr());
  kernels::conv2d_backward_params(in_cache.ptr(), grad_out.ptr(), N, cin, H, W, cout, k,
                                  k, gw.ptr(), gb.ptr());
  return grad_in;
}

void BatchNorm2d::build(int c_, double eps_, double momentum_) {
  c = c_;
  eps = eps_;
  momentum = momentum_;
  gamma = Tensor({c});
  gamma.fill(1.0);
  beta = Tensor({c});
  ggamma = Tensor({c});
  gbeta = Tensor({c});
  running_mean = Tensor({c});
  running_var = Tensor({c});
  running_var.fill(1.0);
  save_mean = Tensor({c});
  save_invstd = Tensor({c});
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
  check_input(x, c);
  const int N = x.dim(0), H = x.dim(2), W = x.dim(3);
  Tensor out(x.shape());
  if (train) {
    kernels::batchnorm_forward_train(x.ptr(), N, c, H, W, gamma.ptr(), beta.ptr(),
                                     momentum, eps, out.ptr(), save_mean.ptr(),
                                     save_invstd.ptr(), running_mean.ptr(),
                                     running_var.ptr());
    in_cache = x;
    cached = true;
  } else {
    kernels::batchnorm_forward_eval(x.ptr(), N, c, H, W, gamma.ptr(), beta.ptr(), eps,
                                    running_mean.ptr(), running_var.ptr(), out.ptr());
  }
  return out;
}

Tensor BatchNorm2d::backward(const Tensor& grad_out) {
  if (!cached) throw Error("BatchNorm2d: backward without cached forward");
  const int N = in_cache.dim(0), H = in_cache.dim(2), W = in_cache.dim(3);
  Tensor grad_in(in_cache.shape());
  kernels::batchnorm_backward(in_cache.ptr(), grad_out.ptr(), N, c, H, W, gamma.ptr(),
                              save_mean.ptr(), save_invstd.ptr(), grad_in.ptr(),
                              ggamma.ptr(), gbeta.ptr());
  return grad_in;
}

Tensor ReLU::forward(const Tensor& x, bool train) {
  Tensor out(x.shape());
  kernels::relu_forward(x.ptr(), x.size(), out.ptr());
  if (train) {
    out_cache = out;
    cached = true;
  }
  return out;
}

Tensor ReLU::backward(const Tensor& grad_out) {
  if (!cached) throw Error("ReLU: backward without cached forward");
  Tensor grad_in(out_cache.shape());
  kernels::relu_backward(out_cache.ptr(), grad_out.ptr(), out_cache.size(), grad_in.ptr());
  return grad_in;
}

Tensor Pool3x3::forward(const Tensor& x, bool train) {
  const int N = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  Tensor out(x.shape());
  if (use_max) {
    argmax.assign(x.size(), -1);
    kernels::maxpool3x3_forward(x.ptr(), N, C, H, W, out.ptr(), argmax.data());
  } else {
    kernels::avgpool3x3_forward(x.ptr(), N, C, H, W, out.ptr());
  }
  if (train) in_shape = x.shape();
  return out;
}

Tensor Pool3x3::backward(const Tensor& grad_out) {
  if (in_shape.empty()) throw Error("Pool3x3: backward without cached forward");
  const int N = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
  Tensor grad_in(in_shape);
  if (use_max)
    kernels::maxpool3x3_backward(grad_out.ptr(), argmax.data(), N, C, H, W, grad_in.ptr());
  else
    kernels::avgpool3x3_backward(grad_out.ptr(), N, C, H, W, grad_in.ptr());
  return grad_in;
}

void ConvBlock::build(int cin, int cout, const ModelConfig& cfg, bool with_pool_,
                      std::mt19937_64& rng) {
  with_pool = with_pool_;
  conv1.build(cin, cout, 3, rng);
  bn1.build(cout, cfg.bn_eps, cfg.bn_momentum);
  conv2.build(cout, cout, 3, rng);
  bn2.build(cout, cfg.bn_eps, cfg.bn_momentum);
  pool.use_max = cfg.block_pool == "max";
}

Tensor ConvBlock::forward(const Tensor& x, bool train) {
  Tensor h = relu1.forward(bn1.forward(conv1.forward(x, train), train), train);
  h = relu2.forward(bn2.forward(conv2.forward(h, train), train), train);
  if (with_pool) h = pool.forward(h, train);
  return h;
}

Tensor ConvBlock::backward(const Tensor& grad_out) {
  Tensor g = grad_out;
  if (with_pool) g = pool.backward(g);
  g = conv2.backward(bn2.backward(relu2.backward(g)));
  g = conv1.backward(bn1.backward(relu1.backward(g)));
  return g;
}

void ConvBlock::collect(const std::string& prefix, std::vector<ParamRef>& params,
                        std::vector<BufferRef>& buffers) {
  params.push_back({prefix + ".conv1.w", &conv1.w, &conv1.gw});
  params.push_back({prefix + ".conv1.b", &conv1.b, &conv1.gb});
  params.push_back({prefix + ".bn1.gamma", &bn1.gamma, &bn1.ggamma});
  params.push_back({prefix + ".bn1.beta", &bn1.beta, &bn1.gbeta});
  params.push_back({prefix + ".conv2.w", &conv2.w, &conv2.gw});
  params.push_back({prefix + ".conv2.b", &conv2.b, &conv2.gb});
  params.push_back({prefix + ".bn2.gamma", &bn2.gamma, &bn2.ggamma});
  params.push_back({prefix + ".bn2.beta", &bn2.beta, &bn2.gbeta});
  buffers.push_back({prefix + ".bn1.running_mean", &bn1.running_mean});
  buffers.push_back({prefix + ".bn1.running_var", &bn1.running_var});
  buffers.push_back({prefix + ".bn2.running_mean", &bn2.running_mean});
  buffers.push_back({prefix + ".bn2.running_var", &bn2.running_var});
}

}  // namespace layers

Model::Model(const ModelConfig& cfg, const HeadConfig& head, uint64_t seed)
    : cfg_(cfg), head_(head), seed_(seed) {
  cfg_.validate();
  std::mt19937_64 rng(derive_seed(seed, "model_init"));

  int prev = 1;
  for (int width : cfg_.encoder_widths) {
    encoder_.emplace_back();
    encoder_.back().build(prev, width, cfg_, true, rng);
    prev = width;
  }
  class_conv_.build(prev, cfg_.n_classes, 1, rng);

  for (int width : cfg_.decoder_widths_or_default()) {
    decoder_.emplace_back();
    decoder_.back().build(prev, width, cfg_, true, rng);
    prev = width;
  }
  decoder_.emplace_back();
  decoder_.back().build(prev, 1, cfg_, false, rng);
  if (cfg_.decoder_final_linear) {
    decoder_out_ = std::make_unique<layers::Conv2d>();
    decoder_out_->build(1, 1, 1, rng);
  }

  if (head_uses_attention_params(head_.kind)) {
    attn_ = std::make_unique<AttentionParams>(AttentionParams::init(
        cfg_.n_classes, cfg_.n_mels, cfg_.attention_per_class,
        derive_seed(seed, "attention_init")));
    attn_grads_ = std::make_unique<AttentionParams>(AttentionParams::zeros_like(*attn_));
  }
  if (head_.kind == HeadKind::kGwrp && !head_.gwrp_r_per_class.empty() &&
      static_cast<int>(head_.gwrp_r_per_class.size()) != cfg_.n_classes)
    throw ConfigError("model: gwrp per-class r must have length n_classes");
}

ForwardBatch Model::forward(const Tensor& x, bool train, bool with_decoder) {
  if (x.ndim() != 3) throw InvalidInput("model: expected input of shape {N,T,F}");
  if (x.dim(2) != cfg_.n_mels)
    throw InvalidInput("model: input mel-bin count does not match config");
  const int N = x.dim(0), T = x.dim(1), F = x.dim(2);

  Tensor h({N, 1, T, F});
  std::copy(x.vec().begin(), x.vec().end(), h.vec().begin());
  for (auto& block : encoder_) h = block.forward(h, train);

  ForwardBatch fb;
  fb.trained_mode = train;
  fb.with_decoder = with_decoder;
  fb.shared_rep = h;
  fb.class_mask = class_conv_.forward(h, train);
  pooling_forward(fb.class_mask, head_, attn_.get(), fb.probs, fb.pool_cache);

  if (with_decoder) {
    Tensor d = run_decoder(h, train);
    fb.reconstruction = Tensor({N, T, F});
    std::copy(d.vec().begin(), d.vec().end(), fb.reconstruction.vec().begin());
  }
  return fb;
}

Tensor Model::run_decoder(const Tensor& shared_rep, bool train) {
  if (shared_rep.ndim() != 4 || shared_rep.dim(1) != cfg_.encoder_widths.back())
    throw InvalidInput("decoder: expected {N,C,T,F} with the encoder's last width");
  Tensor d = shared_rep;
  for (auto& block : decoder_) d = block.forward(d, train);
  if (decoder_out_) d = decoder_out_->forward(d, train);
  return d;
}

Tensor Model::backward(const ForwardBatch& fb, const Tensor& x, const Tensor& grad_probs,
                       const Tensor* grad_recon) {
  if (!fb.trained_mode) throw Error("model: backward requires a train-mode forward");
  const int N = x.dim(0), T = x.dim(1), F = x.dim(2);

  Tensor grad_mask(fb.class_mask.shape());
  pooling_backward(fb.class_mask, grad_probs, head_, attn_.get(), fb.pool_cache,
                   grad_mask, attn_grads_.get());
  Tensor grad_shared = class_conv_.backward(grad_mask);

  if (grad_recon) {
    if (!fb.with_decoder) throw Error("model: reconstruction grad without decoder pass");
    Tensor g({N, 1, T, F});
    std::copy(grad_recon->vec().begin(), grad_recon->vec().end(), g.vec().begin());
    if (decoder_out_) g = decoder_out_->backward(g);
    for (auto it = decoder_.rbegin(); it != decoder_.rend(); ++it) g = it->backward(g);
    for (int64_t i = 0; i < grad_shared.size(); ++i) grad_shared[i] += g[i];
  }

  Tensor g = grad_shared;
  for (auto it = encoder_.rbegin(); it != encoder_.rend(); ++it) g = it->backward(g);
  Tensor grad_x({N, T, F});
  std::copy(g.vec().begin(), g.vec().end(), grad_x.vec().begin());
  return grad_x;
}

std::vector<ParamRef> Model::params() {
  std::vector<ParamRef> out;
  std::vector<BufferRef> ignore;
  for (size_t i = 0; i < encoder_.size(); ++i)
    encoder_[i].collect("encoder.block" + std::to_string(i), out, ignore);
  out.push_back({"class_conv.w", &class_conv_.w, &class_conv_.gw});
  out.push_back({"class_conv.b", &class_conv_.b, &class_conv_.gb});
  if (attn_) {
    out.push_back({"head.w_a1", &attn_->w_a1, &attn_grads_->w_a1});
    out.push_back({"head.b_a1", &attn_->b_a1, &attn_grads_->b_a1});
    out.push_back({"head.w_c1", &attn_->w_c1, &attn_grads_->w_c1});
    out.push_back({"head.b_c1", &attn_->b_c1, &attn_grads_->b_c1});
    if (head_.kind == HeadKind::kTwoStep) {
      out.push_back({"head.w_a2", &attn_->w_a2, &attn_grads_->w_a2});
      out.push_back({"head.b_a2", &attn_->b_a2, &attn_grads_->b_a2});
      out.push_back({"head.w_c2", &attn_->w_c2, &attn_grads_->w_c2});
      out.push_back({"head.b_c2", &attn_->b_c2, &attn_grads_->b_c2});
    }
  }
  for (size_t i = 0; i < decoder_.size(); ++i)
    decoder_[i].collect("decoder.block" + std::to_string(i), out, ignore);
  if (decoder_out_) {
    out.push_back({"decoder.out.w", &decoder_out_->w, &decoder_out_->gw});
    out.push_back({"decoder.out.b", &decoder_out_->b, &decoder_out_->gb});
  }
  return out;
}

std::vector<BufferRef> Model::buffers() {
  std::vector<BufferRef> out;
  std::vector<ParamRef> ignore;
  for (size_t i = 0; i < encoder_.size(); ++i)
    encoder_[i].collect("encoder.block" + std::to_string(i), ignore, out);
  for (size_t i = 0; i < decoder_.size(); ++i)
    decoder_[i].collect("decoder.block" + std::to_string(i), ignore, out);
  return out;
}

void Model::zero_grads() {
  for (auto& p : params()) p.grad->zero();
}

int64_t Model::parameter_count() {
  int64_t n = 0;
  for (auto& p : params()) n += p.value->size();
  return n;
}

int64_t parameter_count(const ModelConfig& cfg, const HeadConfig& head) {
  Model m(cfg, head, 0);
  return m.parameter_count();
}

std::pair<Tensor, Tensor> encode(Model& model, const Tensor& x) {
  if (x.ndim() != 2) throw InvalidInput("encode: expected input of shape {T,F}");
  Tensor xb({1, x.dim(0), x.dim(1)});
  std::copy(x.vec().begin(), x.vec().end(), xb.vec().begin());
  ForwardBatch fb = model.forward(xb, false, false);
  const int C = fb.shared_rep.dim(1), T = x.dim(0), F = x.dim(1);
  Tensor shared({C, T, F}), mask({model.config().n_classes, T, F});
  std::copy(fb.shared_rep.vec().begin(), fb.shared_rep.vec().end(), shared.vec().begin());
  std::copy(fb.class_mask.vec().begin(), fb.class_mask.vec().end(), mask.vec().begin());
  return {std::move(shared), std::move(mask)};
}

ForwardOutputs forward_clip(Model& model, const Tensor& x, bool with_decoder) {
  if (x.ndim() != 2) throw InvalidInput("forward_clip: expected input of shape {T,F}");
  Tensor xb({1, x.dim(0), x.dim(1)});
  std::copy(x.vec().begin(), x.vec().end(), xb.vec().begin());
  ForwardBatch fb = model.forward(xb, false, with_decoder);
  const int C = fb.shared_rep.dim(1), T = x.dim(0), F = x.dim(1);
  const int K = model.config().n_classes;

  ForwardOutputs out;
  out.shared_rep = Tensor({C, T, F});
  std::copy(fb.shared_rep.vec().begin(), fb.shared_rep.vec().end(),
            out.shared_rep.vec().begin());
  out.class_mask = Tensor({K, T, F});
  std::copy(fb.class_mask.vec().begin(), fb.class_mask.vec().end(),
            out.class_mask.vec().begin());
  out.prediction.probs = fb.probs.vec();
  if (model.head().kind == HeadKind::kTwoStep) {
    AttentionMaps maps;
    maps.step1_weights = Tensor({K, T, F});
    std::copy(fb.pool_cache.a1hat.vec().begin(), fb.pool_cache.a1hat.vec().end(),
              maps.step1_weights.vec().begin());
    maps.step1_output = Tensor({K, T});
    std::copy(fb.pool_cache.p1.vec().begin(), fb.pool_cache.p1.vec().end(),
              maps.step1_output.vec().begin());
    maps.step2_weights = Tensor({K, T});
    std::copy(fb.pool_cache.a2hat.vec().begin(), fb.pool_cache.a2hat.vec().end(),
              maps.step2_weights.vec().begin());
    maps.step2_output = Tensor({K});
    std::copy(fb.probs.vec().begin(), fb.probs.vec().end(),
              maps.step2_output.vec().begin());
    out.attention = std::move(maps);
  }
  if (with_decoder) {
    out.reconstruction = Tensor({T, F});
    std::copy(fb.reconstruction.vec().begin(), fb.reconstruction.vec().end(),
              out.reconstruction.vec().begin());
  }
  return out;
}

Tensor decode(Model& model, const Tensor& shared_rep) {
  if (shared_rep.ndim() != 3)
    throw InvalidInput("decode: expected a {C,T,F} shared representation");
  const int C = shared_rep.dim(0), T = shared_rep.dim(1), F = shared_rep.dim(2);
  Tensor sb({1, C, T, F});
  std::copy(shared_rep.vec().begin(), shared_rep.vec().end(), sb.vec().begin());
  Tensor d = model.run_decoder(sb, false);
  Tensor out({T, F});
  std::copy(d.vec().begin(), d.vec().end(), out.vec().begin());
  return out;
}

namespace {

ordered_json model_config_to_json(const ModelConfig& cfg) {
  return ordered_json{{"encoder_widths", cfg.encoder_widths},
                      {"decoder_widths", cfg.decoder_widths},
                      {"n_classes", cfg.n_classes},
                      {"n_mels", cfg.n_mels},
                      {"block_pool", cfg.block_pool},
                      {"bn_eps", cfg.bn_eps},
                      {"bn_momentum", cfg.bn_momentum},
                      {"decoder_final_linear", cfg.decoder_final_linear},
                      {"attention_per_class", cfg.attention_per_class}};
}

ModelConfig model_config_from_json(const ordered_json& j) {
  ModelConfig cfg;
  cfg.encoder_widths = j.at("encoder_widths").get<std::vector<int>>();
  cfg.decoder_widths = j.at("decoder_widths").get<std::vector<int>>();
  cfg.n_classes = j.at("n_classes").get<int>();
  cfg.n_mels = j.at("n_mels").get<int>();
  cfg.block_pool = j.at("block_pool").get<std::string>();
  cfg.bn_eps = j.at("bn_eps").get<double>();
  cfg.bn_momentum = j.at("bn_momentum").get<double>();
  cfg.decoder_final_linear = j.at("decoder_final_linear").get<bool>();
  cfg.attention_per_class = j.at("attention_per_class").get<bool>();
  return cfg;
}

constexpr char kCkptMagic[4] = {'S', 'E', 'D', 'C'};
constexpr uint32_t kCkptVersion = 1;

void write_tensor(std::ofstream& os, const std::string& name, const Tensor& t) {
  const uint32_t name_len = static_cast<uint32_t>(name.size());
  os.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
  os.write(name.data(), name_len);
  const uint32_t ndim = static_cast<uint32_t>(t.ndim());
  os.write(reinterpret_cast<const char*>(&ndim), sizeof(ndim));
  for (int i = 0; i < t.ndim(); ++i) {
    const uint32_t d = static_cast<uint32_t>(t.dim(i));
    os.write(reinterpret_cast<const char*>(&d), sizeof(d));
  }
  os.write(reinterpret_cast<const char*>(t.ptr()), t.size() * sizeof(double));
}

std::pair<std::string, Tensor> read_tensor(std::ifstream& is) {
  uint32_t name_len = 0;
  is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  uint32_t ndim = 0;
  is.read(reinterpret_cast<char*>(&ndim), sizeof(ndim));
  std::vector<int> shape(ndim);
  for (uint32_t i = 0; i < ndim; ++i) {
    uint32_t d = 0;
    is.read(reinterpret_cast<char*>(&d), sizeof(d));
    shape[i] = static_cast<int>(d);
  }
  Tensor t(shape);
  is.read(reinterpret_cast<char*>(t.ptr()), t.size() * sizeof(double));
  if (!is) throw IOError("checkpoint: truncated tensor record");
  return {std::move(name), std::move(t)};
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model& model,
                     const FeatureConfig& features, const Standardization& std_stats,
                     uint64_t seed) {
  ordered_json header;
  header["model"] = model_config_to_json(model.config());
  header["head"] = ordered_json{{"kind", head_name(model.head().kind)},
                                {"gwrp_r", model.head().gwrp_r},
                                {"gwrp_r_per_class", model.head().gwrp_r_per_class}};
  header["features"] = ordered_json{{"window_size", features.window_size},
                                    {"hop", features.hop},
                                    {"n_mels", features.n_mels},
                                    {"sample_rate", features.sample_rate},
                                    {"fmin", features.fmin},
                                    {"fmax", features.fmax},
                                    {"log_floor", features.log_floor}};
  header["seed"] = seed;
  const std::string header_str = header.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("checkpoint: cannot open " + path.string());
  os.write(kCkptMagic, 4);
  os.write(reinterpret_cast<const char*>(&kCkptVersion), sizeof(kCkptVersion));
  const uint64_t hlen = header_str.size();
  os.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
  os.write(header_str.data(), header_str.size());

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  for (auto& p : model.params()) tensors.emplace_back(p.name, p.value);
  for (auto& b : model.buffers()) tensors.emplace_back(b.name, b.value);
  Tensor mean({static_cast<int>(std_stats.mean.size())});
  Tensor stdev({static_cast<int>(std_stats.std.size())});
  std::copy(std_stats.mean.begin(), std_stats.mean.end(), mean.vec().begin());
  std::copy(std_stats.std.begin(), std_stats.std.end(), stdev.vec().begin());
  tensors.emplace_back("standardization.mean", &mean);
  tensors.emplace_back("standardization.std", &stdev);

  const uint32_t count = static_cast<uint32_t>(tensors.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (auto& [name, t] : tensors) write_tensor(os, name, *t);
  if (!os) throw IOError("checkpoint: write failed for " + path.string());
}

std::pair<std::unique_ptr<Model>, Checkpoint> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("checkpoint: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  uint32_t version = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw IOError("checkpoint: bad magic in " + path.string());
  if (version != kCkptVersion) throw ConfigError("checkpoint: unsupported version");
  uint64_t hlen = 0;
  is.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
  std::string header_str(hlen, '\0');
  is.read(header_str.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw IOError("checkpoint: truncated header in " + path.string());

  ordered_json header = ordered_json::parse(header_str);
  Checkpoint ckpt;
  ckpt.model = model_config_from_json(header.at("model"));
  ckpt.head.kind = head_from_name(header.at("head").at("kind").get<std::string>());
  ckpt.head.gwrp_r = header.at("head").at("gwrp_r").get<double>();
  ckpt.head.gwrp_r_per_class =
      header.at("head").at("gwrp_r_per_class").get<std::vector<double>>();
  const auto& jf = header.at("features");
  ckpt.features.window_size = jf.at("window_size").get<int>();
  ckpt.features.hop = jf.at("hop").get<int>();
  ckpt.features.n_mels = jf.at("n_mels").get<int>();
  ckpt.features.sample_rate = jf.at("sample_rate").get<int>();
  ckpt.features.fmin = jf.at("fmin").get<double>();
  ckpt.features.fmax = jf.at("fmax").get<double>();
  ckpt.features.log_floor = jf.at("log_floor").get<double>();
  ckpt.seed = header.at("seed").get<uint64_t>();

  auto model = std::make_unique<Model>(ckpt.model, ckpt.head, ckpt.seed);
  uint32_t count = 0;
  is.read(reinterpret_cast<char*>(&count), sizeof(count));

  std::map<std::string, Tensor> loaded;
  for (uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_tensor(is);
    loaded.emplace(std::move(name), std::move(t));
  }
  auto take = [&loaded, &path](const std::string& name) -> Tensor {
    auto it = loaded.find(name);
    if (it == loaded.end())
      throw IOError("checkpoint: missing tensor " + name + " in " + path.string());
    Tensor t = std::move(it->second);
    loaded.erase(it);
    return t;
  };
  for (auto& p : model->params()) {
    Tensor t = take(p.name);
    if (t.shape() != p.value->shape())
      throw ConfigError("checkpoint: shape mismatch for " + p.name);
    *p.value = std::move(t);
  }
  for (auto& b : model->buffers()) {
    Tensor t = take(b.name);
    if (t.shape() != b.value->shape())
      throw ConfigError("checkpoint: shape mismatch for " + b.name);
    *b.value = std::move(t);
  }
  Tensor mean = take("standardization.mean");
  Tensor stdev = take("standardization.std");
  ckpt.standardization.mean = mean.vec();
  ckpt.standardization.std = stdev.vec();
  return {std::move(model), std::move(ckpt)};
}

}  // namespace sedkit
