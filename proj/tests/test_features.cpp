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
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "sedkit/features.hpp"

using namespace sedkit;

namespace {

AudioClip tone(double freq, double seconds, int sr, double amp = 0.5) {
  AudioClip c;
  c.sample_rate = sr;
  const int64_t n = static_cast<int64_t>(seconds * sr);
  c.samples.resize(n);
  for (int64_t i = 0; i < n; ++i)
    c.samples[i] = amp * std::sin(2.0 * std::numbers::pi * freq * i / sr);
  return c;
}

}  // namespace

TEST_CASE("mel filterbank defaults: 64 x 1025, single-peak rows, increasing centers") {
  FeatureConfig cfg;  // paper defaults
  const Tensor fb = mel_filterbank(cfg);
  REQUIRE(fb.shape() == std::vector<int>{64, 1025});

  int prev_peak = -1;
  for (int m = 0; m < 64; ++m) {
    // single local maximum: weights rise then fall over the support
    int peak = 0;
    double best = -1.0;
    for (int b = 0; b < 1025; ++b)
      if (fb.at2(m, b) > best) {
        best = fb.at2(m, b);
        peak = b;
      }
    CHECK(best > 0.0);
    for (int b = 1; b <= peak; ++b) CHECK(fb.at2(m, b) >= fb.at2(m, b - 1) - 1e-15);
    for (int b = peak + 1; b < 1025; ++b) CHECK(fb.at2(m, b) <= fb.at2(m, b - 1) + 1e-15);
    CHECK(peak > prev_peak);
    prev_peak = peak;
  }

  SUBCASE("bins between the first and last centers are covered") {
    const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax_or_default());
    const double c_first = mel_to_hz(mel_lo + (mel_hi - mel_lo) * 1.0 / 65.0);
    const double c_last = mel_to_hz(mel_lo + (mel_hi - mel_lo) * 64.0 / 65.0);
    const double bin_hz = 32000.0 / 2048.0;
    for (int b = 0; b < 1025; ++b) {
      const double f = b * bin_hz;
      if (f <= c_first || f >= c_last) continue;
      double col = 0.0;
      for (int m = 0; m < 64; ++m) col += fb.at2(m, b);
      CHECK(col > 0.0);
    }
  }
}

TEST_CASE("too many mel bands for the FFT resolution is a config error") {
  FeatureConfig cfg;
  cfg.window_size = 64;
  cfg.hop = 32;
  cfg.n_mels = 64;
  cfg.sample_rate = 8000;
  CHECK_THROWS_AS(mel_filterbank(cfg), ConfigError);
}

TEST_CASE("frame count formula") {
  FeatureConfig cfg;
  cfg.window_size = 256;
  cfg.hop = 128;
  cfg.n_mels = 16;
  cfg.sample_rate = 8000;
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int64_t L = 256 + static_cast<int64_t>(rng() % 5000);
    AudioClip clip = tone(440.0, static_cast<double>(L) / 8000.0, 8000);
    clip.samples.resize(L, 0.0);
    const LogMelSpectrogram spec = log_mel(clip, cfg);
    CHECK(spec.n_frames() == static_cast<int>((L - 256) / 128 + 1));
    CHECK(spec.n_mels() == 16);
    CHECK(spec.values.all_finite());
  }
  SUBCASE("shorter than a window is rejected") {
    AudioClip tiny = tone(440.0, 0.01, 8000);  // 80 samples < 256
    CHECK_THROWS_AS(log_mel(tiny, cfg), InvalidInput);
  }
}

TEST_CASE("10 s at 32 kHz with defaults yields 311 x 64") {
  FeatureConfig cfg;
  AudioClip clip = tone(1000.0, 10.0, 32000);
  REQUIRE(clip.length() == 320000);
  const LogMelSpectrogram spec = log_mel(clip, cfg);
  CHECK(spec.n_frames() == 311);
  CHECK(spec.n_mels() == 64);
}

TEST_CASE("all-zero clip hits the log floor everywhere") {
  FeatureConfig cfg;
  cfg.window_size = 256;
  cfg.hop = 128;
  cfg.n_mels = 8;
  cfg.sample_rate = 8000;
  AudioClip clip;
  clip.sample_rate = 8000;
  clip.samples.assign(1024, 0.0);
  const LogMelSpectrogram spec = log_mel(clip, cfg);
  for (int64_t i = 0; i < spec.values.size(); ++i)
    CHECK(spec.values[i] == doctest::Approx(std::log(1e-10)).epsilon(1e-12));
}

TEST_CASE("pure tone at a mel filter center activates that bin") {
  FeatureConfig cfg;
  cfg.window_size = 1024;
  cfg.hop = 512;
  cfg.n_mels = 32;
  cfg.sample_rate = 16000;
  const double mel_lo = hz_to_mel(cfg.fmin), mel_hi = hz_to_mel(cfg.fmax_or_default());
  for (int b : {8, 16, 24}) {
    // center frequency of filter b (the b+1-th of n_mels+2 grid points)
    const double center =
        mel_to_hz(mel_lo + (mel_hi - mel_lo) * (b + 1) / (cfg.n_mels + 1));
    const LogMelSpectrogram spec = log_mel(tone(center, 1.0, 16000), cfg);
    std::vector<double> avg(cfg.n_mels, 0.0);
    for (int t = 0; t < spec.n_frames(); ++t)
      for (int f = 0; f < cfg.n_mels; ++f) avg[f] += spec.values.at2(t, f);
    const int got = static_cast<int>(
        std::max_element(avg.begin(), avg.end()) - avg.begin());
    CHECK(got == b);
  }
}

TEST_CASE("energy monotonicity: scaling up never lowers log-mel values") {
  FeatureConfig cfg;
  cfg.window_size = 256;
  cfg.hop = 128;
  cfg.n_mels = 12;
  cfg.sample_rate = 8000;
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> dist(-0.2, 0.2);
  AudioClip clip;
  clip.sample_rate = 8000;
  for (int i = 0; i < 2048; ++i) clip.samples.push_back(dist(rng));
  AudioClip louder = clip;
  for (auto& v : louder.samples) v *= 3.0;
  const auto a = log_mel(clip, cfg), b = log_mel(louder, cfg);
  for (int64_t i = 0; i < a.values.size(); ++i)
    CHECK(b.values[i] >= a.values[i] - 1e-12);
}

TEST_CASE("standardization gives zero mean, unit variance per bin") {
  FeatureConfig cfg;
  cfg.window_size = 256;
  cfg.hop = 128;
  cfg.n_mels = 10;
  cfg.sample_rate = 8000;
  std::vector<LogMelSpectrogram> specs;
  for (int i = 0; i < 4; ++i)
    specs.push_back(log_mel(tone(300.0 + 200.0 * i, 0.5, 8000), cfg));
  const Standardization stats = compute_standardization(specs);
  double worst_mean = 0.0, worst_var = 0.0;
  std::vector<double> mean(10, 0.0), var(10, 0.0);
  int64_t count = 0;
  for (auto& s : specs) {
    stats.apply(s.values);
    count += s.n_frames();
  }
  for (auto& s : specs)
    for (int t = 0; t < s.n_frames(); ++t)
      for (int f = 0; f < 10; ++f) mean[f] += s.values.at2(t, f);
  for (int f = 0; f < 10; ++f) mean[f] /= static_cast<double>(count);
  for (auto& s : specs)
    for (int t = 0; t < s.n_frames(); ++t)
      for (int f = 0; f < 10; ++f) {
        const double d = s.values.at2(t, f) - mean[f];
        var[f] += d * d;
      }
  for (int f = 0; f < 10; ++f) {
    worst_mean = std::max(worst_mean, std::abs(mean[f]));
    worst_var = std::max(worst_var, std::abs(var[f] / count - 1.0));
  }
  CHECK(worst_mean < 1e-9);
  CHECK(worst_var < 1e-9);
}

TEST_CASE("feature cache round trip and hash guard") {
  FeatureConfig cfg;
  cfg.window_size = 256;
  cfg.hop = 128;
  cfg.n_mels = 6;
  cfg.sample_rate = 8000;
  const LogMelSpectrogram spec = log_mel(tone(500.0, 0.3, 8000), cfg);
  const auto dir = std::filesystem::temp_directory_path() / "sedkit_test_cache";
  std::filesystem::create_directories(dir);
  const auto path = dir / "clip.sedf";
  save_feature_cache(path, spec.values, cfg.hash());
  CHECK(feature_cache_exists(path, cfg.hash()));
  const Tensor back = load_feature_cache(path, cfg.hash());
  REQUIRE(back.shape() == spec.values.shape());
  for (int64_t i = 0; i < back.size(); ++i)
    CHECK(back[i] == doctest::Approx(spec.values[i]).epsilon(1e-6));

  FeatureConfig other = cfg;
  other.n_mels = 7;
  CHECK(!feature_cache_exists(path, other.hash()));
  CHECK_THROWS_AS(load_feature_cache(path, other.hash()), ConfigError);
}

TEST_CASE("config invariants are enforced") {
  FeatureConfig cfg;
  cfg.hop = 4096;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FeatureConfig{};
  cfg.fmin = 20000.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = FeatureConfig{};
  cfg.log_floor = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
