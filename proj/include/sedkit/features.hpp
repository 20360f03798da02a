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
#include <vector>

#include "sedkit/audio.hpp"
#include "sedkit/common.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct FeatureConfig {
  int window_size = 2048;
  int hop = 1024;
  int n_mels = 64;
  int sample_rate = 32000;
  double fmin = 0.0;
  double fmax = -1.0;  // <= 0 means sample_rate / 2
  double log_floor = 1e-10;

  double fmax_or_default() const { return fmax > 0.0 ? fmax : sample_rate / 2.0; }
  void validate() const;
  uint64_t hash() const;
};

// T x F log-power matrix; frame t covers samples [t*hop, t*hop + window).
struct LogMelSpectrogram {
  Tensor values;  // shape {T, F}
  int n_frames() const { return values.dim(0); }
  int n_mels() const { return values.dim(1); }
};

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

inline int frame_count(int64_t length, const FeatureConfig& cfg) {
  if (length < cfg.window_size) return 0;
  return static_cast<int>((length - cfg.window_size) / cfg.hop) + 1;
}

// Triangular mel filters, peak 1, evaluated at the FFT bin frequencies.
// Shape {n_mels, window_size/2 + 1}.
Tensor mel_filterbank(const FeatureConfig& cfg);

// Hann-windowed power STFT (valid frames only, no padding) -> mel -> log with
// floor; values = log(max(mel . |STFT|^2, log_floor)).
LogMelSpectrogram log_mel(const AudioClip& clip, const FeatureConfig& cfg);

// Per-mel-bin standardization statistics, computed on training data and
// stored with checkpoints.
struct Standardization {
  std::vector<double> mean;  // length F
  std::vector<double> std;   // length F, floored at 1e-6

  void apply(Tensor& values) const;
};

Standardization compute_standardization(const std::vector<LogMelSpectrogram>& specs);

// Binary feature cache, one file per clip: magic "SEDF", u32 version,
// u64 config hash, u32 rows, u32 cols, then rows*cols little-endian f32.
void save_feature_cache(const std::filesystem::path& path, const Tensor& values,
                        uint64_t config_hash);
Tensor load_feature_cache(const std::filesystem::path& path, uint64_t expect_hash);
bool feature_cache_exists(const std::filesystem::path& path, uint64_t expect_hash);

}  // namespace sedkit
