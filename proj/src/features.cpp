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
#include "sedkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <numbers>

#include <fftw3.h>

namespace sedkit {

void FeatureConfig::validate() const {
  if (window_size < 2) throw ConfigError("features: window_size must be >= 2");
  if (hop < 1 || hop > window_size)
    throw ConfigError("features: need 1 <= hop <= window_size");
  if (n_mels < 1) throw ConfigError("features: n_mels must be >= 1");
  if (sample_rate <= 0) throw ConfigError("features: sample_rate must be positive");
  const double fx = fmax_or_default();
  if (!(fmin >= 0.0 && fmin < fx && fx <= sample_rate / 2.0 + 1e-9))
    throw ConfigError("features: need 0 <= fmin < fmax <= sample_rate/2");
  if (log_floor <= 0.0) throw ConfigError("features: log_floor must be positive");
}

uint64_t FeatureConfig::hash() const {
  uint64_t h = fnv1a64("feature_config_v1");
  auto mix = [&h](double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    h = splitmix64(h ^ bits);
  };
  mix(window_size);
  mix(hop);
  mix(n_mels);
  mix(sample_rate);
  mix(fmin);
  mix(fmax_or_default());
  mix(log_floor);
  return h;
}

Tensor mel_filterbank(const FeatureConfig& cfg) {
  cfg.validate();
  const int n_bins = cfg.window_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin);
  const double mel_hi = hz_to_mel(cfg.fmax_or_default());

  // n_mels + 2 equally spaced mel points; filter m spans centers m-1 .. m+1.
  std::vector<double> centers_hz(cfg.n_mels + 2);
  for (int i = 0; i < cfg.n_mels + 2; ++i)
    centers_hz[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.n_mels + 1));

  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.window_size;
  Tensor fb({cfg.n_mels, n_bins});
  for (int m = 0; m < cfg.n_mels; ++m) {
    const double left = centers_hz[m], center = centers_hz[m + 1], right = centers_hz[m + 2];
    bool any = false;
    for (int b = 0; b < n_bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f > left && f < center) {
        w = (f - left) / (center - left);
      } else if (f >= center && f < right) {
        w = (right - f) / (right - center);
      }
      fb.at2(m, b) = w;
      any = any || w > 0.0;
    }
    if (!any)
      throw ConfigError(
          "mel_filterbank: n_mels too large for FFT resolution (empty filter / "
          "duplicate centers at bin grid)");
  }
  return fb;
}

namespace {

// FFTW planning is not thread safe; executing a plan on caller-owned arrays is.
std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

struct FftwPlan {
  fftw_plan plan = nullptr;
  int n = 0;
  FftwPlan(int size, double* in, fftw_complex* out) : n(size) {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(size, in, out, FFTW_ESTIMATE);
    if (!plan) throw Error("fftw: failed to create plan");
  }
  ~FftwPlan() {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  FftwPlan(const FftwPlan&) = delete;
  FftwPlan& operator=(const FftwPlan&) = delete;
};

}  // namespace

LogMelSpectrogram log_mel(const AudioClip& clip, const FeatureConfig& cfg) {
  cfg.validate();
  clip.validate();
  if (clip.sample_rate != cfg.sample_rate)
    throw InvalidInput("log_mel: clip sample rate does not match config");
  if (clip.length() < cfg.window_size)
    throw InvalidInput("log_mel: clip shorter than one analysis window");

  const int T = frame_count(clip.length(), cfg);
  const int n_bins = cfg.window_size / 2 + 1;
  const Tensor fb = mel_filterbank(cfg);

  std::vector<double> window(cfg.window_size);
  for (int i = 0; i < cfg.window_size; ++i)
    window[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / cfg.window_size);

  std::vector<double> frame(cfg.window_size);
  std::vector<fftw_complex> spectrum(n_bins);
  FftwPlan plan(cfg.window_size, frame.data(), spectrum.data());

  LogMelSpectrogram out;
  out.values = Tensor({T, cfg.n_mels});
  std::vector<double> power(n_bins);
  for (int t = 0; t < T; ++t) {
    const double* src = clip.samples.data() + static_cast<int64_t>(t) * cfg.hop;
    for (int i = 0; i < cfg.window_size; ++i) frame[i] = src[i] * window[i];
    fftw_execute_dft_r2c(plan.plan, frame.data(), spectrum.data());
    for (int b = 0; b < n_bins; ++b)
      power[b] = spectrum[b][0] * spectrum[b][0] + spectrum[b][1] * spectrum[b][1];
    for (int m = 0; m < cfg.n_mels; ++m) {
      double acc = 0.0;
      const double* fbrow = fb.ptr() + static_cast<int64_t>(m) * n_bins;
      for (int b = 0; b < n_bins; ++b) acc += fbrow[b] * power[b];
      out.values.at2(t, m) = std::log(std::max(acc, cfg.log_floor));
    }
  }
  return out;
}

void Standardization::apply(Tensor& values) const {
  const int T = values.dim(0), F = values.dim(1);
  if (static_cast<size_t>(F) != mean.size() || static_cast<size_t>(F) != std.size())
    throw InvalidInput("standardization: mel-bin count mismatch");
  for (int t = 0; t < T; ++t)
    for (int f = 0; f < F; ++f) values.at2(t, f) = (values.at2(t, f) - mean[f]) / std[f];
}

Standardization compute_standardization(const std::vector<LogMelSpectrogram>& specs) {
  if (specs.empty()) throw InvalidInput("compute_standardization: no spectrograms");
  const int F = specs.front().n_mels();
  Standardization s;
  s.mean.assign(F, 0.0);
  s.std.assign(F, 0.0);
  int64_t count = 0;
  for (const auto& spec : specs) {
    if (spec.n_mels() != F)
      throw InvalidInput("compute_standardization: inconsistent mel-bin counts");
    const int T = spec.n_frames();
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) s.mean[f] += spec.values.at2(t, f);
    count += T;
  }
  for (int f = 0; f < F; ++f) s.mean[f] /= static_cast<double>(count);
  for (const auto& spec : specs) {
    const int T = spec.n_frames();
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) {
        const double d = spec.values.at2(t, f) - s.mean[f];
        s.std[f] += d * d;
      }
  }
  for (int f = 0; f < F; ++f)
    s.std[f] = std::max(std::sqrt(s.std[f] / static_cast<double>(count)), 1e-6);
  return s;
}

namespace {
constexpr char kCacheMagic[4] = {'S', 'E', 'D', 'F'};
constexpr uint32_t kCacheVersion = 1;

template <typename T>
void write_pod(std::ofstream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
bool read_pod(std::ifstream& is, T& v) {
  is.read(reinterpret_cast<char*>(&v), sizeof(v));
  return static_cast<bool>(is);
}
}  // namespace

void save_feature_cache(const std::filesystem::path& path, const Tensor& values,
                        uint64_t config_hash) {
  if (values.ndim() != 2) throw InvalidInput("feature cache: expected a 2-D tensor");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("feature cache: cannot open " + path.string());
  os.write(kCacheMagic, 4);
  write_pod(os, kCacheVersion);
  write_pod(os, config_hash);
  write_pod(os, static_cast<uint32_t>(values.dim(0)));
  write_pod(os, static_cast<uint32_t>(values.dim(1)));
  std::vector<float> buf(values.size());
  for (int64_t i = 0; i < values.size(); ++i) buf[i] = static_cast<float>(values[i]);
  os.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
  if (!os) throw IOError("feature cache: write failed for " + path.string());
}

Tensor load_feature_cache(const std::filesystem::path& path, uint64_t expect_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("feature cache: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  uint32_t version = 0, rows = 0, cols = 0;
  uint64_t hash = 0;
  if (!is || std::memcmp(magic, kCacheMagic, 4) != 0 || !read_pod(is, version) ||
      version != kCacheVersion || !read_pod(is, hash) || !read_pod(is, rows) ||
      !read_pod(is, cols))
    throw IOError("feature cache: bad header in " + path.string());
  if (hash != expect_hash)
    throw ConfigError("feature cache: config hash mismatch in " + path.string());
  Tensor out({static_cast<int>(rows), static_cast<int>(cols)});
  std::vector<float> buf(out.size());
  is.read(reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
  if (!is) throw IOError("feature cache: truncated data in " + path.string());
  for (int64_t i = 0; i < out.size(); ++i) out[i] = buf[i];
  return out;
}

bool feature_cache_exists(const std::filesystem::path& path, uint64_t expect_hash) {
  std::ifstream is(path, std::ios::binary);
  if (!is) return false;
  char magic[4];
  is.read(magic, 4);
  uint32_t version = 0;
  uint64_t hash = 0;
  if (!is || std::memcmp(magic, kCacheMagic, 4) != 0 || !read_pod(is, version) ||
      version != kCacheVersion || !read_pod(is, hash))
    return false;
  return hash == expect_hash;
}

}  // namespace sedkit
