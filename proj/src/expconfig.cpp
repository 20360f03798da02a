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
#include "sedkit/expconfig.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

namespace sedkit {

using json = nlohmann::json;

namespace {

void check_keys(const json& section, const std::set<std::string>& allowed,
                const std::string& where) {
  if (!section.is_object())
    throw ConfigError("config: section '" + where + "' must be an object");
  for (const auto& [key, value] : section.items()) {
    (void)value;
    if (!allowed.count(key))
      throw ConfigError("config: unknown key '" + key + "' in section '" + where + "'");
  }
}

template <typename T>
void get_if(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError("config: bad value type for '" + std::string(key) + "' in '" +
                      where + "'");
  }
}

void parse_datamix(const json& j, CorpusConfig& cfg) {
  check_keys(j, {"n_classes", "clips_per_snr", "snr_db", "n_folds", "clip_seconds",
                 "sample_rate", "event_seconds", "min_events", "max_events",
                 "background"},
             "datamix");
  get_if(j, "n_classes", cfg.n_classes, "datamix");
  get_if(j, "clips_per_snr", cfg.clips_per_snr, "datamix");
  get_if(j, "snr_db", cfg.snr_db, "datamix");
  get_if(j, "n_folds", cfg.n_folds, "datamix");
  get_if(j, "clip_seconds", cfg.clip_seconds, "datamix");
  get_if(j, "sample_rate", cfg.sample_rate, "datamix");
  get_if(j, "event_seconds", cfg.event_seconds, "datamix");
  get_if(j, "min_events", cfg.min_events, "datamix");
  get_if(j, "max_events", cfg.max_events, "datamix");
  if (!j.contains("background"))
    throw ConfigError("config: datamix requires a 'background' spec (rms, lowpass_alpha)");
  const json& bg = j.at("background");
  check_keys(bg, {"rms", "lowpass_alpha"}, "datamix.background");
  get_if(bg, "rms", cfg.background_rms, "datamix.background");
  get_if(bg, "lowpass_alpha", cfg.background_lowpass_alpha, "datamix.background");
  cfg.validate();
}

void parse_features(const json& j, FeatureConfig& cfg) {
  check_keys(j, {"window_size", "hop", "n_mels", "sample_rate", "fmin", "fmax",
                 "log_floor"},
             "features");
  get_if(j, "window_size", cfg.window_size, "features");
  get_if(j, "hop", cfg.hop, "features");
  get_if(j, "n_mels", cfg.n_mels, "features");
  get_if(j, "sample_rate", cfg.sample_rate, "features");
  get_if(j, "fmin", cfg.fmin, "features");
  get_if(j, "fmax", cfg.fmax, "features");
  get_if(j, "log_floor", cfg.log_floor, "features");
  cfg.validate();
}

void parse_model(const json& j, ModelConfig& cfg) {
  check_keys(j, {"preset", "encoder_widths", "decoder_widths", "n_classes", "n_mels",
                 "block_pool", "bn_eps", "bn_momentum", "decoder_final_linear",
                 "attention_per_class"},
             "model");
  if (j.contains("preset")) {
    const std::string preset = j.at("preset").get<std::string>();
    if (preset == "full")
      cfg = ModelConfig::full_scale();
    else if (preset == "desk")
      cfg = ModelConfig::desk_scale();
    else
      throw ConfigError("config: unknown model preset '" + preset + "'");
  }
  get_if(j, "encoder_widths", cfg.encoder_widths, "model");
  get_if(j, "decoder_widths", cfg.decoder_widths, "model");
  get_if(j, "n_classes", cfg.n_classes, "model");
  get_if(j, "n_mels", cfg.n_mels, "model");
  get_if(j, "block_pool", cfg.block_pool, "model");
  get_if(j, "bn_eps", cfg.bn_eps, "model");
  get_if(j, "bn_momentum", cfg.bn_momentum, "model");
  get_if(j, "decoder_final_linear", cfg.decoder_final_linear, "model");
  get_if(j, "attention_per_class", cfg.attention_per_class, "model");
  cfg.validate();
}

void parse_training(const json& j, TrainConfig& train, LossConfig& loss) {
  check_keys(j, {"batch_size", "learning_rate", "max_epochs", "head", "fold", "gwrp_r",
                 "alpha", "lr_decay", "early_stop_patience", "threshold", "verbose"},
             "training");
  get_if(j, "batch_size", train.batch_size, "training");
  get_if(j, "learning_rate", train.learning_rate, "training");
  get_if(j, "max_epochs", train.max_epochs, "training");
  get_if(j, "head", train.head, "training");
  get_if(j, "fold", train.fold, "training");
  get_if(j, "gwrp_r", train.gwrp_r, "training");
  get_if(j, "lr_decay", train.lr_decay, "training");
  get_if(j, "early_stop_patience", train.early_stop_patience, "training");
  get_if(j, "threshold", train.threshold, "training");
  get_if(j, "verbose", train.verbose, "training");
  get_if(j, "alpha", loss.alpha, "training");
  train.validate();
  loss.validate();
}

}  // namespace

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config: cannot open " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config: JSON parse error in " + path.string() + ": " + e.what());
  }
  check_keys(j, {"master_seed", "out_dir", "manifest", "datamix", "features", "model",
                 "training", "metrics", "ablation"},
             "(top level)");

  ExperimentConfig cfg;
  get_if(j, "master_seed", cfg.master_seed, "(top level)");
  std::string s;
  get_if(j, "out_dir", s, "(top level)");
  if (!s.empty()) cfg.out_dir = s;
  s.clear();
  get_if(j, "manifest", s, "(top level)");
  if (!s.empty()) cfg.manifest_path = s;

  if (j.contains("datamix")) {
    cfg.has_datamix = true;
    cfg.datamix.seed = cfg.master_seed;
    parse_datamix(j.at("datamix"), cfg.datamix);
  }
  if (j.contains("features")) parse_features(j.at("features"), cfg.features);
  if (j.contains("model")) parse_model(j.at("model"), cfg.model);
  cfg.train.seed = cfg.master_seed;
  if (j.contains("training")) parse_training(j.at("training"), cfg.train, cfg.loss);
  if (j.contains("metrics")) {
    check_keys(j.at("metrics"), {"threshold"}, "metrics");
    get_if(j.at("metrics"), "threshold", cfg.metrics_threshold, "metrics");
    if (!(cfg.metrics_threshold > 0.0 && cfg.metrics_threshold < 1.0))
      throw ConfigError("config: metrics.threshold must lie in (0,1)");
    cfg.train.threshold = cfg.metrics_threshold;
  }
  if (j.contains("ablation")) {
    check_keys(j.at("ablation"), {"alphas", "heads", "folds"}, "ablation");
    get_if(j.at("ablation"), "alphas", cfg.ablation_alphas, "ablation");
    get_if(j.at("ablation"), "heads", cfg.ablation_heads, "ablation");
    get_if(j.at("ablation"), "folds", cfg.ablation_folds, "ablation");
    for (const auto& h : cfg.ablation_heads) head_from_name(h);
    for (double a : cfg.ablation_alphas)
      if (a < 0.0) throw ConfigError("config: ablation alphas must be >= 0");
  }
  return cfg;
}

uint64_t ExperimentConfig::hash() const {
  uint64_t h = fnv1a64("experiment_config_v1");
  h = splitmix64(h ^ master_seed);
  h = splitmix64(h ^ fnv1a64(out_dir.string(), h));
  h = splitmix64(h ^ fnv1a64(manifest_path.string(), h));
  h = splitmix64(h ^ features.hash());
  h = splitmix64(h ^ fnv1a64(train.head, h));
  h = splitmix64(h ^ static_cast<uint64_t>(train.fold));
  return h;
}

}  // namespace sedkit
