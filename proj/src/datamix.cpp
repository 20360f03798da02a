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
#include "sedkit/datamix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <json.hpp>

namespace sedkit {

using ordered_json = nlohmann::ordered_json;

void CorpusConfig::validate() const {
  if (n_classes < 2) throw ConfigError("corpus: n_classes must be >= 2");
  if (clips_per_snr < 1) throw ConfigError("corpus: clips_per_snr must be >= 1");
  if (snr_db.empty()) throw ConfigError("corpus: at least one SNR level required");
  if (n_folds < 2) throw ConfigError("corpus: n_folds must be >= 2");
  if (sample_rate <= 0) throw ConfigError("corpus: sample_rate must be positive");
  if (clip_seconds <= 0) throw ConfigError("corpus: clip_seconds must be positive");
  if (event_seconds <= 0 || event_seconds > clip_seconds)
    throw ConfigError("corpus: event_seconds must be in (0, clip_seconds]");
  if (min_events < 0 || max_events < min_events)
    throw ConfigError("corpus: need 0 <= min_events <= max_events");
  if (max_events > n_classes)
    throw ConfigError("corpus: max_events cannot exceed n_classes");
  if (static_cast<double>(max_events) * event_seconds > clip_seconds)
    throw ConfigError("corpus: total event duration cannot exceed clip duration");
}

void DatasetManifest::validate() const {
  if (n_classes < 1) throw ConfigError("manifest: n_classes must be >= 1");
  std::set<std::string> ids;
  std::vector<int64_t> fold_counts(std::max(n_folds, 1), 0);
  for (const auto& rec : records) {
    if (!ids.insert(rec.clip_id).second)
      throw ConfigError("manifest: duplicate clip_id " + rec.clip_id);
    if (rec.fold < 0 || rec.fold >= n_folds)
      throw ConfigError("manifest: record " + rec.clip_id + " has no valid fold");
    ++fold_counts[rec.fold];
    if (static_cast<int>(rec.weak_label.size()) != n_classes)
      throw ConfigError("manifest: weak_label length mismatch in " + rec.clip_id);
    std::vector<int> expect(n_classes, 0);
    for (const auto& p : rec.placements) {
      if (p.class_index < 0 || p.class_index >= n_classes)
        throw ConfigError("manifest: class index out of range in " + rec.clip_id);
      expect[p.class_index] = 1;
    }
    if (expect != rec.weak_label)
      throw ConfigError("manifest: weak_label inconsistent with placements in " +
                        rec.clip_id);
  }
  for (int f = 0; f < n_folds; ++f)
    if (fold_counts[f] == 0)
      throw ConfigError("manifest: fold " + std::to_string(f) + " is empty");
}

std::vector<int> DatasetManifest::fold_record_indices(int fold) const {
  std::vector<int> out;
  for (size_t i = 0; i < records.size(); ++i)
    if (records[i].fold == fold) out.push_back(static_cast<int>(i));
  return out;
}

double compute_gain(const AudioClip& event, const AudioClip& background_segment,
                    double snr_db) {
  event.validate();
  background_segment.validate();
  const double p_ev = mean_power(event);
  const double p_bg = mean_power(background_segment);
  if (p_ev <= 0.0) throw InvalidInput("compute_gain: silent event, SNR undefined");
  if (p_bg <= 0.0)
    throw InvalidInput("compute_gain: silent background segment, SNR undefined");
  return std::sqrt((p_bg / p_ev) * std::pow(10.0, snr_db / 10.0));
}

namespace {
constexpr int kMaxPlacementAttempts = 1000;

bool overlaps(int64_t a0, int64_t a1, int64_t b0, int64_t b1) {
  return a0 < b1 && b0 < a1;
}
}  // namespace

std::pair<AudioClip, MixRecord> mix_clip(
    const AudioClip& background, const std::vector<std::pair<int, AudioClip>>& events,
    double snr_db, uint64_t seed, int n_classes) {
  background.validate();
  if (n_classes < 1) throw InvalidInput("mix_clip: n_classes must be >= 1");
  const int64_t bg_len = background.length();
  int64_t total = 0;
  for (const auto& [cls, ev] : events) {
    ev.validate();
    if (cls < 0 || cls >= n_classes) throw InvalidInput("mix_clip: class index out of range");
    if (ev.sample_rate != background.sample_rate)
      throw InvalidInput("mix_clip: sample rate mismatch");
    if (ev.length() > bg_len) throw InvalidInput("mix_clip: event longer than background");
    total += ev.length();
  }
  if (total > bg_len)
    throw InvalidInput("mix_clip: total event duration exceeds background duration");

  std::mt19937_64 rng(seed);
  std::vector<EventPlacement> placements;
  placements.reserve(events.size());
  for (const auto& [cls, ev] : events) {
    const int64_t len = ev.length();
    std::uniform_int_distribution<int64_t> offset_dist(0, bg_len - len);
    bool placed = false;
    for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
      const int64_t start = offset_dist(rng);
      bool clash = false;
      for (const auto& p : placements)
        if (overlaps(start, start + len, p.start_sample, p.end_sample())) {
          clash = true;
          break;
        }
      if (!clash) {
        placements.push_back({cls, start, len, 1.0, 0});
        placed = true;
      }
    }
    if (!placed)
      throw PlacementError("mix_clip: could not place event without overlap after " +
                           std::to_string(kMaxPlacementAttempts) + " attempts");
  }

  AudioClip out = background;
  for (size_t i = 0; i < events.size(); ++i) {
    const AudioClip& ev = events[i].second;
    EventPlacement& p = placements[i];
    AudioClip segment{{background.samples.begin() + p.start_sample,
                       background.samples.begin() + p.end_sample()},
                      background.sample_rate};
    const double g = compute_gain(ev, segment, snr_db);
    p.gain = g;
    for (int64_t s = 0; s < p.duration_samples; ++s)
      out.samples[p.start_sample + s] += g * ev.samples[s];
  }

  double peak = 0.0;
  for (double v : out.samples) peak = std::max(peak, std::abs(v));
  double norm_scale = 1.0;
  if (peak > 1.0) {
    norm_scale = 1.0 / peak;
    for (double& v : out.samples) v *= norm_scale;
    for (auto& p : placements) p.gain *= norm_scale;
  }

  MixRecord rec;
  rec.snr_db = snr_db;
  rec.seed = seed;
  rec.norm_scale = norm_scale;
  rec.placements = placements;
  rec.weak_label.assign(n_classes, 0);
  for (const auto& p : placements) rec.weak_label[p.class_index] = 1;
  return {std::move(out), std::move(rec)};
}

namespace {

// Short linear fade at both ends so events don't click.
void apply_edge_ramps(std::vector<double>& x, int sample_rate) {
  const int64_t ramp = std::min<int64_t>(static_cast<int64_t>(0.005 * sample_rate),
                                         static_cast<int64_t>(x.size()) / 4);
  for (int64_t i = 0; i < ramp; ++i) {
    const double w = static_cast<double>(i + 1) / static_cast<double>(ramp + 1);
    x[i] *= w;
    x[x.size() - 1 - i] *= w;
  }
}

}  // namespace

AudioClip generate_event(const EventClassSpec& spec, int64_t duration_samples,
                         int sample_rate, uint64_t seed) {
  if (duration_samples <= 0) throw InvalidInput("generate_event: duration must be > 0");
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(duration_samples);
  std::mt19937_64 rng(seed);
  const double dur = static_cast<double>(duration_samples) / sample_rate;

  if (spec.kind == "tone") {
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    const double phase = phase_dist(rng);
    for (int64_t i = 0; i < duration_samples; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      clip.samples[i] = 0.5 * std::sin(2.0 * std::numbers::pi * spec.f0_hz * t + phase);
    }
  } else if (spec.kind == "chirp") {
    std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
    const double phase = phase_dist(rng);
    const double slope = (spec.f1_hz - spec.f0_hz) / (2.0 * dur);
    for (int64_t i = 0; i < duration_samples; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      clip.samples[i] =
          0.5 * std::sin(2.0 * std::numbers::pi * (spec.f0_hz + slope * t) * t + phase);
    }
  } else if (spec.kind == "am_noise") {
    std::normal_distribution<double> noise(0.0, 1.0);
    for (int64_t i = 0; i < duration_samples; ++i) {
      const double t = static_cast<double>(i) / sample_rate;
      const double env = 0.55 + 0.45 * std::sin(2.0 * std::numbers::pi * spec.mod_hz * t);
      clip.samples[i] = 0.3 * env * noise(rng);
    }
  } else {
    throw ConfigError("generate_event: unknown event kind '" + spec.kind + "'");
  }
  apply_edge_ramps(clip.samples, sample_rate);
  return clip;
}

AudioClip generate_background(const BackgroundSpec& spec, int64_t length,
                              int sample_rate) {
  if (spec.kind != "colored_noise")
    throw ConfigError("generate_background: unknown background kind '" + spec.kind + "'");
  if (length <= 0) throw InvalidInput("generate_background: length must be > 0");
  AudioClip clip;
  clip.sample_rate = sample_rate;
  clip.samples.resize(length);
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  const double a = spec.lowpass_alpha;
  double y = 0.0, acc = 0.0;
  for (int64_t i = 0; i < length; ++i) {
    y = a * y + (1.0 - a) * noise(rng);
    clip.samples[i] = y;
    acc += y * y;
  }
  const double rms = std::sqrt(acc / static_cast<double>(length));
  const double scale = rms > 0.0 ? spec.rms / rms : 0.0;
  for (double& v : clip.samples) v *= scale;
  return clip;
}

std::vector<EventClassSpec> default_event_classes(int n_classes) {
  std::vector<EventClassSpec> specs(n_classes);
  static const char* kinds[] = {"tone", "chirp", "am_noise"};
  for (int k = 0; k < n_classes; ++k) {
    EventClassSpec& s = specs[k];
    s.class_index = k;
    s.kind = kinds[k % 3];
    const double band = std::pow(1.6, k / 3);  // spread repeats across frequency
    if (s.kind == "tone") {
      s.f0_hz = 2000.0 * band;
    } else if (s.kind == "chirp") {
      s.f0_hz = 3000.0 * band;
      s.f1_hz = 6000.0 * band;
    } else {
      s.mod_hz = 6.0 + 2.0 * (k / 3);
    }
  }
  return specs;
}

DatasetManifest generate_toy_corpus(const CorpusConfig& cfg,
                                    const std::filesystem::path& out_dir) {
  cfg.validate();
  std::filesystem::create_directories(out_dir / "audio");

  DatasetManifest manifest;
  manifest.n_classes = cfg.n_classes;
  manifest.snr_levels = cfg.snr_db;
  manifest.sample_rate = cfg.sample_rate;
  manifest.clip_seconds = cfg.clip_seconds;
  manifest.event_classes = default_event_classes(cfg.n_classes);

  const int n_snr = static_cast<int>(cfg.snr_db.size());
  const int total = n_snr * cfg.clips_per_snr;
  manifest.records.resize(total);
  const int64_t bg_len = static_cast<int64_t>(std::llround(cfg.clip_seconds * cfg.sample_rate));

#pragma omp parallel for schedule(dynamic)
  for (int idx = 0; idx < total; ++idx) {
    const int si = idx / cfg.clips_per_snr;
    const int ci = idx % cfg.clips_per_snr;
    const double snr = cfg.snr_db[si];
    const uint64_t clip_seed = derive_seed(cfg.seed, "clip", static_cast<uint64_t>(idx));
    std::mt19937_64 rng(splitmix64(clip_seed));

    // Event count and classes; sampling without replacement keeps class
    // frequencies roughly balanced.
    std::uniform_int_distribution<int> count_dist(cfg.min_events, cfg.max_events);
    const int n_events = count_dist(rng);
    std::vector<int> classes(cfg.n_classes);
    for (int k = 0; k < cfg.n_classes; ++k) classes[k] = k;
    std::shuffle(classes.begin(), classes.end(), rng);

    std::vector<std::pair<int, AudioClip>> events;
    std::vector<uint64_t> event_seeds;
    std::uniform_real_distribution<double> jitter(0.8, 1.2);
    for (int e = 0; e < n_events; ++e) {
      const int cls = classes[e];
      const uint64_t ev_seed = derive_seed(clip_seed, "event", static_cast<uint64_t>(e));
      const int64_t dur = std::max<int64_t>(
          static_cast<int64_t>(0.2 * cfg.sample_rate),
          static_cast<int64_t>(std::llround(cfg.event_seconds * jitter(rng) * cfg.sample_rate)));
      events.emplace_back(cls, generate_event(manifest.event_classes[cls], dur,
                                              cfg.sample_rate, ev_seed));
      event_seeds.push_back(ev_seed);
    }

    BackgroundSpec bg_spec;
    bg_spec.seed = derive_seed(clip_seed, "background");
    bg_spec.lowpass_alpha = cfg.background_lowpass_alpha;
    bg_spec.rms = cfg.background_rms;
    const AudioClip background = generate_background(bg_spec, bg_len, cfg.sample_rate);

    auto [mixed, rec] = mix_clip(background, events, snr,
                                 derive_seed(clip_seed, "placement"), cfg.n_classes);
    for (size_t e = 0; e < rec.placements.size(); ++e)
      rec.placements[e].event_seed = event_seeds[e];

    char id[64];
    std::snprintf(id, sizeof(id), "clip_s%02d_%05d", si, ci);
    rec.clip_id = id;
    rec.seed = clip_seed;
    rec.background = bg_spec;
    rec.audio_path = std::string("audio/") + id + ".wav";
    write_wav(out_dir / rec.audio_path, mixed);
    manifest.records[idx] = std::move(rec);
  }

  manifest = make_folds(std::move(manifest), cfg.n_folds, derive_seed(cfg.seed, "folds"));
  manifest.validate();
  save_manifest(manifest, out_dir / "manifest.json");
  return manifest;
}

DatasetManifest make_folds(DatasetManifest manifest, int n_folds, uint64_t seed) {
  if (n_folds < 2) throw ConfigError("make_folds: n_folds must be >= 2");
  if (static_cast<size_t>(n_folds) > manifest.records.size())
    throw ConfigError("make_folds: n_folds exceeds record count");

  // Group by SNR level so every fold sees every condition, then hand out
  // folds round-robin with a counter carried across groups; overall fold
  // sizes differ by at most one.
  std::map<double, std::vector<int>> groups;
  for (size_t i = 0; i < manifest.records.size(); ++i)
    groups[manifest.records[i].snr_db].push_back(static_cast<int>(i));

  std::mt19937_64 rng(seed);
  int64_t counter = 0;
  for (auto& [snr, indices] : groups) {
    std::shuffle(indices.begin(), indices.end(), rng);
    for (int idx : indices) {
      manifest.records[idx].fold = static_cast<int>(counter % n_folds);
      ++counter;
    }
  }
  manifest.n_folds = n_folds;
  return manifest;
}

namespace {

ordered_json placement_to_json(const EventPlacement& p) {
  return ordered_json{{"class_index", p.class_index},
                      {"start_sample", p.start_sample},
                      {"duration_samples", p.duration_samples},
                      {"gain", p.gain},
                      {"event_seed", p.event_seed}};
}

EventPlacement placement_from_json(const ordered_json& j) {
  EventPlacement p;
  p.class_index = j.at("class_index").get<int>();
  p.start_sample = j.at("start_sample").get<int64_t>();
  p.duration_samples = j.at("duration_samples").get<int64_t>();
  p.gain = j.at("gain").get<double>();
  p.event_seed = j.at("event_seed").get<uint64_t>();
  return p;
}

}  // namespace

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  ordered_json j;
  j["schema_version"] = manifest.schema_version;
  j["n_classes"] = manifest.n_classes;
  j["n_folds"] = manifest.n_folds;
  j["snr_levels"] = manifest.snr_levels;
  j["sample_rate"] = manifest.sample_rate;
  j["clip_seconds"] = manifest.clip_seconds;
  j["event_classes"] = ordered_json::array();
  for (const auto& s : manifest.event_classes)
    j["event_classes"].push_back(ordered_json{{"class_index", s.class_index},
                                              {"kind", s.kind},
                                              {"f0_hz", s.f0_hz},
                                              {"f1_hz", s.f1_hz},
                                              {"mod_hz", s.mod_hz}});
  j["records"] = ordered_json::array();
  for (const auto& rec : manifest.records) {
    ordered_json r{{"clip_id", rec.clip_id},
                   {"snr_db", rec.snr_db},
                   {"fold", rec.fold},
                   {"seed", rec.seed},
                   {"norm_scale", rec.norm_scale},
                   {"audio_path", rec.audio_path},
                   {"background",
                    ordered_json{{"kind", rec.background.kind},
                                 {"seed", rec.background.seed},
                                 {"lowpass_alpha", rec.background.lowpass_alpha},
                                 {"rms", rec.background.rms}}},
                   {"weak_label", rec.weak_label}};
    r["placements"] = ordered_json::array();
    for (const auto& p : rec.placements) r["placements"].push_back(placement_to_json(p));
    j["records"].push_back(std::move(r));
  }
  std::ofstream os(path);
  if (!os) throw IOError("save_manifest: cannot open " + path.string());
  os << j.dump(2) << "\n";
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOError("load_manifest: cannot open " + path.string());
  ordered_json j;
  try {
    is >> j;
  } catch (const std::exception& e) {
    throw IOError("load_manifest: parse error in " + path.string() + ": " + e.what());
  }
  DatasetManifest manifest;
  manifest.schema_version = j.at("schema_version").get<int>();
  if (manifest.schema_version != 1)
    throw ConfigError("load_manifest: unsupported schema_version");
  manifest.n_classes = j.at("n_classes").get<int>();
  manifest.n_folds = j.at("n_folds").get<int>();
  manifest.snr_levels = j.at("snr_levels").get<std::vector<double>>();
  manifest.sample_rate = j.at("sample_rate").get<int>();
  manifest.clip_seconds = j.at("clip_seconds").get<double>();
  for (const auto& s : j.at("event_classes")) {
    EventClassSpec spec;
    spec.class_index = s.at("class_index").get<int>();
    spec.kind = s.at("kind").get<std::string>();
    spec.f0_hz = s.at("f0_hz").get<double>();
    spec.f1_hz = s.at("f1_hz").get<double>();
    spec.mod_hz = s.at("mod_hz").get<double>();
    manifest.event_classes.push_back(std::move(spec));
  }
  for (const auto& r : j.at("records")) {
    MixRecord rec;
    rec.clip_id = r.at("clip_id").get<std::string>();
    rec.snr_db = r.at("snr_db").get<double>();
    rec.fold = r.at("fold").get<int>();
    rec.seed = r.at("seed").get<uint64_t>();
    rec.norm_scale = r.at("norm_scale").get<double>();
    rec.audio_path = r.at("audio_path").get<std::string>();
    const auto& b = r.at("background");
    rec.background.kind = b.at("kind").get<std::string>();
    rec.background.seed = b.at("seed").get<uint64_t>();
    rec.background.lowpass_alpha = b.at("lowpass_alpha").get<double>();
    rec.background.rms = b.at("rms").get<double>();
    rec.weak_label = r.at("weak_label").get<std::vector<int>>();
    for (const auto& p : r.at("placements"))
      rec.placements.push_back(placement_from_json(p));
    manifest.records.push_back(std::move(rec));
  }
  manifest.validate();
  return manifest;
}

}  // namespace sedkit
