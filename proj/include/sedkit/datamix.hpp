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
#include <string>
#include <utility>
#include <vector>

#include "sedkit/audio.hpp"
#include "sedkit/common.hpp"

namespace sedkit {

struct EventPlacement {
  int class_index = 0;
  int64_t start_sample = 0;
  int64_t duration_samples = 0;
  // Amplitude scale as present in the emitted audio, i.e. after any
  // whole-clip peak normalization.
  double gain = 1.0;
  uint64_t event_seed = 0;

  int64_t end_sample() const { return start_sample + duration_samples; }
};

// Parametric description of one synthetic event class, enough to regenerate
// its waveform deterministically.
struct EventClassSpec {
  int class_index = 0;
  std::string kind;  // "tone" | "chirp" | "am_noise"
  double f0_hz = 0.0;
  double f1_hz = 0.0;  // chirp end frequency
  double mod_hz = 0.0;  // am_noise modulation rate
};

struct BackgroundSpec {
  std::string kind = "colored_noise";
  uint64_t seed = 0;
  double lowpass_alpha = 0.9;
  double rms = 0.1;
};

struct MixRecord {
  std::string clip_id;
  double snr_db = 0.0;
  std::vector<EventPlacement> placements;
  std::vector<int> weak_label;  // length K, max over instances
  int fold = -1;
  uint64_t seed = 0;
  double norm_scale = 1.0;  // 1 unless peak normalization kicked in
  std::string audio_path;   // relative to the manifest file
  BackgroundSpec background;
};

struct DatasetManifest {
  int schema_version = 1;
  int n_classes = 0;
  int n_folds = 0;
  std::vector<double> snr_levels;
  int sample_rate = 32000;
  double clip_seconds = 10.0;
  std::vector<EventClassSpec> event_classes;
  std::vector<MixRecord> records;

  void validate() const;
  std::vector<int> fold_record_indices(int fold) const;
};

struct CorpusConfig {
  int n_classes = 3;
  int clips_per_snr = 120;
  std::vector<double> snr_db = {20.0};
  int n_folds = 4;
  uint64_t seed = 7;
  int sample_rate = 32000;
  double clip_seconds = 4.0;
  double event_seconds = 0.8;
  int min_events = 1;
  int max_events = 3;
  double background_rms = 0.1;
  double background_lowpass_alpha = 0.9;

  void validate() const;
};

// g = sqrt((P_bg / P_ev) * 10^(snr_db/10)); scaling the event by g makes its
// power over the covered background segment sit snr_db above that segment.
double compute_gain(const AudioClip& event, const AudioClip& background_segment,
                    double snr_db);

// Places 0..n events at seed-driven uniformly random non-overlapping offsets,
// scales each against the background segment it covers, sums, and peak
// normalizes if the mix would clip. Placement gains are recorded
// post-normalization together with norm_scale.
std::pair<AudioClip, MixRecord> mix_clip(
    const AudioClip& background, const std::vector<std::pair<int, AudioClip>>& events,
    double snr_db, uint64_t seed, int n_classes);

AudioClip generate_event(const EventClassSpec& spec, int64_t duration_samples,
                         int sample_rate, uint64_t seed);
AudioClip generate_background(const BackgroundSpec& spec, int64_t length,
                              int sample_rate);
std::vector<EventClassSpec> default_event_classes(int n_classes);

// Emits WAV files under out_dir/audio and a manifest.json next to them.
DatasetManifest generate_toy_corpus(const CorpusConfig& cfg,
                                    const std::filesystem::path& out_dir);

// Partitions records into folds of sizes differing by at most one,
// stratified by SNR level; deterministic under seed.
DatasetManifest make_folds(DatasetManifest manifest, int n_folds, uint64_t seed);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);
DatasetManifest load_manifest(const std::filesystem::path& path);

}  // namespace sedkit
