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
#include <fstream>

#include "sedkit/datamix.hpp"

using namespace sedkit;
namespace fs = std::filesystem;

namespace {

AudioClip constant_clip(double amplitude, int64_t n, int sr = 32000) {
  AudioClip c;
  c.sample_rate = sr;
  c.samples.assign(n, amplitude);
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("sedkit_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

double measured_snr_db(const AudioClip& mixed, const AudioClip& background,
                       const EventPlacement& p, double norm_scale) {
  double p_res = 0.0, p_bg = 0.0;
  for (int64_t i = p.start_sample; i < p.end_sample(); ++i) {
    const double res = mixed.samples[i] / norm_scale - background.samples[i];
    p_res += res * res;
    p_bg += background.samples[i] * background.samples[i];
  }
  return 10.0 * std::log10(p_res / p_bg);
}

}  // namespace

TEST_CASE("compute_gain formula") {
  const auto bg = constant_clip(0.3, 1000);
  SUBCASE("equal power, 0 dB") {
    CHECK(compute_gain(constant_clip(0.3, 500), bg, 0.0) == doctest::Approx(1.0));
  }
  SUBCASE("equal power, 20 dB") {
    CHECK(compute_gain(constant_clip(0.3, 500), bg, 20.0) == doctest::Approx(10.0));
  }
  SUBCASE("event at four times the background power, 0 dB") {
    CHECK(compute_gain(constant_clip(0.6, 500), bg, 0.0) == doctest::Approx(0.5));
  }
  SUBCASE("silent inputs are rejected") {
    CHECK_THROWS_AS(compute_gain(constant_clip(0.0, 500), bg, 0.0), InvalidInput);
    CHECK_THROWS_AS(compute_gain(constant_clip(0.3, 500), constant_clip(0.0, 100), 0.0),
                    InvalidInput);
  }
}

TEST_CASE("mix_clip with no events returns the background unchanged") {
  BackgroundSpec spec;
  spec.seed = 99;
  const AudioClip bg = generate_background(spec, 8000, 16000);
  auto [mixed, rec] = mix_clip(bg, {}, 10.0, 7, 3);
  CHECK(mixed.samples == bg.samples);
  CHECK(rec.weak_label == std::vector<int>{0, 0, 0});
  CHECK(rec.placements.empty());
  CHECK(rec.norm_scale == 1.0);
}

TEST_CASE("placements never overlap and labels match (1000 seeds)") {
  const int sr = 4000;
  BackgroundSpec bspec;
  bspec.seed = 5;
  const AudioClip bg = generate_background(bspec, 4000, sr);  // 1 s
  const auto classes = default_event_classes(3);
  std::vector<std::pair<int, AudioClip>> events;
  for (int k = 0; k < 3; ++k)
    events.emplace_back(k, generate_event(classes[k], 800, sr, 1000 + k));  // 0.2 s each

  for (uint64_t seed = 0; seed < 1000; ++seed) {
    auto [mixed, rec] = mix_clip(bg, events, 0.0, seed, 3);
    REQUIRE(rec.placements.size() == 3);
    for (size_t i = 0; i < 3; ++i)
      for (size_t j = i + 1; j < 3; ++j) {
        const auto& a = rec.placements[i];
        const auto& b = rec.placements[j];
        const bool disjoint =
            a.end_sample() <= b.start_sample || b.end_sample() <= a.start_sample;
        REQUIRE(disjoint);
      }
    REQUIRE(rec.weak_label == std::vector<int>{1, 1, 1});
    for (double v : mixed.samples) REQUIRE(std::abs(v) <= 1.0);
  }
}

TEST_CASE("single-event SNR round trip (float path)") {
  const int sr = 32000;
  const auto classes = default_event_classes(3);
  for (double snr : {0.0, 10.0, 20.0}) {
    BackgroundSpec bspec;
    bspec.seed = 17 + static_cast<uint64_t>(snr);
    const AudioClip bg = generate_background(bspec, 2 * sr, sr);
    const AudioClip ev = generate_event(classes[0], sr / 2, sr, 23);
    auto [mixed, rec] = mix_clip(bg, {{0, ev}}, snr, 31, 3);
    const double got = measured_snr_db(mixed, bg, rec.placements[0], rec.norm_scale);
    CHECK(std::abs(got - snr) < 1e-9);
  }
}

TEST_CASE("peak normalization engages only when the mix would clip") {
  const int sr = 8000;
  BackgroundSpec bspec;
  bspec.seed = 3;
  const AudioClip bg = generate_background(bspec, 8000, sr);
  const AudioClip ev = generate_event(default_event_classes(1)[0], 2000, sr, 4);
  auto [mixed, rec] = mix_clip(bg, {{0, ev}}, 45.0, 9, 1);  // very hot event
  CHECK(rec.norm_scale < 1.0);
  double peak = 0.0;
  for (double v : mixed.samples) peak = std::max(peak, std::abs(v));
  CHECK(peak <= 1.0 + 1e-12);
  // SNR is invariant to the whole-clip rescale
  const double got = measured_snr_db(mixed, bg, rec.placements[0], rec.norm_scale);
  CHECK(std::abs(got - 45.0) < 1e-9);
}

TEST_CASE("placement failure raises after bounded attempts") {
  const int sr = 4000;
  BackgroundSpec bspec;
  bspec.seed = 77;
  const AudioClip bg = generate_background(bspec, 1000, sr);
  const auto classes = default_event_classes(2);
  // two events of 600 samples cannot both fit in 1000 without overlap
  std::vector<std::pair<int, AudioClip>> events = {
      {0, generate_event(classes[0], 600, sr, 1)},
      {1, generate_event(classes[1], 600, sr, 2)}};
  CHECK_THROWS_AS(mix_clip(bg, events, 0.0, 5, 2), InvalidInput);
  // total fits but overlap-free placement is impossible: 450 + 450 = 900 <= 1000
  events = {{0, generate_event(classes[0], 450, sr, 1)},
            {1, generate_event(classes[1], 450, sr, 2)}};
  bool overlap_failure_seen = false;
  for (uint64_t seed = 0; seed < 50 && !overlap_failure_seen; ++seed) {
    try {
      mix_clip(bg, events, 0.0, seed, 2);
    } catch (const PlacementError&) {
      overlap_failure_seen = true;
    }
  }
  // 450+450 in 1000 leaves a sliver; rejection usually succeeds, so don't
  // assert failure here — the hard-impossible case is covered above.
  (void)overlap_failure_seen;
}

TEST_CASE("make_folds balances sizes and is deterministic") {
  auto manifest_with = [](int n) {
    DatasetManifest m;
    m.n_classes = 2;
    m.snr_levels = {20.0};
    for (int i = 0; i < n; ++i) {
      MixRecord r;
      r.clip_id = "c" + std::to_string(i);
      r.snr_db = 20.0;
      r.weak_label = {0, 0};
      m.records.push_back(std::move(r));
    }
    return m;
  };
  SUBCASE("10 records over 3 folds -> {4,3,3}") {
    auto m = make_folds(manifest_with(10), 3, 42);
    std::vector<int> sizes(3, 0);
    for (const auto& r : m.records) ++sizes[r.fold];
    std::sort(sizes.begin(), sizes.end(), std::greater<int>());
    CHECK(sizes == std::vector<int>{4, 3, 3});
  }
  SUBCASE("8000 records over 4 folds -> 2000 each") {
    auto m = make_folds(manifest_with(8000), 4, 42);
    std::vector<int> sizes(4, 0);
    for (const auto& r : m.records) ++sizes[r.fold];
    CHECK(sizes == std::vector<int>{2000, 2000, 2000, 2000});
  }
  SUBCASE("same seed, same assignment") {
    auto a = make_folds(manifest_with(100), 4, 7);
    auto b = make_folds(manifest_with(100), 4, 7);
    for (size_t i = 0; i < a.records.size(); ++i)
      CHECK(a.records[i].fold == b.records[i].fold);
  }
  SUBCASE("out-of-range fold counts are rejected") {
    CHECK_THROWS_AS(make_folds(manifest_with(10), 1, 0), ConfigError);
    CHECK_THROWS_AS(make_folds(manifest_with(10), 11, 0), ConfigError);
  }
}

TEST_CASE("toy corpus generation") {
  CorpusConfig cfg;
  cfg.n_classes = 3;
  cfg.clips_per_snr = 8;
  cfg.snr_db = {20.0};
  cfg.n_folds = 4;
  cfg.seed = 7;
  cfg.sample_rate = 8000;
  cfg.clip_seconds = 1.0;
  cfg.event_seconds = 0.25;

  SUBCASE("deterministic manifests, balanced folds") {
    const fs::path d1 = fresh_dir("corpus1"), d2 = fresh_dir("corpus2");
    const DatasetManifest m1 = generate_toy_corpus(cfg, d1);
    const DatasetManifest m2 = generate_toy_corpus(cfg, d2);
    CHECK(slurp(d1 / "manifest.json") == slurp(d2 / "manifest.json"));
    std::vector<int> sizes(4, 0);
    for (const auto& r : m1.records) ++sizes[r.fold];
    for (int s : sizes) CHECK(s == 2);
    // WAV bytes identical too
    CHECK(slurp(d1 / m1.records[0].audio_path) == slurp(d2 / m1.records[0].audio_path));
  }
  SUBCASE("measured SNR via the emitted WAV and regenerated background") {
    const fs::path d = fresh_dir("corpus3");
    const DatasetManifest m = generate_toy_corpus(cfg, d);
    for (const auto& rec : m.records) {
      const AudioClip mixed = read_wav(d / rec.audio_path);
      const AudioClip bg = generate_background(
          rec.background, static_cast<int64_t>(cfg.clip_seconds * cfg.sample_rate),
          cfg.sample_rate);
      for (const auto& p : rec.placements) {
        const double got = measured_snr_db(mixed, bg, p, rec.norm_scale);
        CHECK(std::abs(got - rec.snr_db) <= 0.25);
      }
    }
  }
  SUBCASE("manifest round trip") {
    const fs::path d = fresh_dir("corpus4");
    const DatasetManifest m = generate_toy_corpus(cfg, d);
    const DatasetManifest loaded = load_manifest(d / "manifest.json");
    CHECK(loaded.records.size() == m.records.size());
    CHECK(loaded.n_classes == m.n_classes);
    for (size_t i = 0; i < m.records.size(); ++i) {
      CHECK(loaded.records[i].clip_id == m.records[i].clip_id);
      CHECK(loaded.records[i].fold == m.records[i].fold);
      CHECK(loaded.records[i].weak_label == m.records[i].weak_label);
      CHECK(loaded.records[i].norm_scale == m.records[i].norm_scale);
    }
  }
  SUBCASE("invalid configs are rejected") {
    CorpusConfig bad = cfg;
    bad.n_classes = 1;
    CHECK_THROWS_AS(generate_toy_corpus(bad, fresh_dir("c5")), ConfigError);
    bad = cfg;
    bad.clips_per_snr = 0;
    CHECK_THROWS_AS(generate_toy_corpus(bad, fresh_dir("c6")), ConfigError);
  }
}

TEST_CASE("wav io round trip") {
  AudioClip c;
  c.sample_rate = 16000;
  for (int i = 0; i < 1600; ++i)
    c.samples.push_back(0.7 * std::sin(2.0 * 3.14159 * 440.0 * i / 16000.0));
  const fs::path p = fresh_dir("wav") / "t.wav";
  write_wav(p, c);
  const AudioClip back = read_wav(p);
  CHECK(back.sample_rate == 16000);
  REQUIRE(back.length() == c.length());
  for (int64_t i = 0; i < c.length(); ++i)
    CHECK(back.samples[i] == doctest::Approx(c.samples[i]).epsilon(1e-3));
}
