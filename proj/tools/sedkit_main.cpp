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

// Experiment runner: mix / extract / train / evaluate / ablate / visualize.
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "sedkit/expconfig.hpp"
#include "sedkit/training.hpp"
#include "sedkit/visualize.hpp"

namespace fs = std::filesystem;
using namespace sedkit;

namespace {

fs::path cache_dir_from_env() {
  const char* env = std::getenv("SEDKIT_CACHE_DIR");
  return env && *env ? fs::path(env) : fs::path{};
}

void write_stamp(const fs::path& out_dir, const ExperimentConfig& cfg,
                 const std::string& command) {
  fs::create_directories(out_dir);
  nlohmann::ordered_json stamp{{"command", command},
                               {"config_hash", cfg.hash()},
                               {"master_seed", cfg.master_seed}};
  std::ofstream os(out_dir / "config_stamp.json");
  os << stamp.dump(2) << "\n";
}

struct ManifestOnDisk {
  DatasetManifest manifest;
  fs::path dir;
};

ManifestOnDisk load_corpus(const ExperimentConfig& cfg, const std::string& override_path) {
  fs::path path = override_path.empty() ? cfg.manifest_path : fs::path(override_path);
  if (path.empty())
    throw ConfigError("no corpus manifest: set 'manifest' in the config or pass --manifest");
  if (!fs::exists(path))
    throw ConfigError("corpus manifest not found: " + path.string());
  return {load_manifest(path), path.parent_path()};
}

int cmd_mix(const ExperimentConfig& cfg, const std::string& out_flag,
            std::optional<uint64_t> seed_flag) {
  if (!cfg.has_datamix)
    throw ConfigError("mix: the config has no 'datamix' section");
  CorpusConfig corpus = cfg.datamix;
  if (seed_flag) corpus.seed = *seed_flag;
  const fs::path out = out_flag.empty() ? cfg.out_dir / "corpus" : fs::path(out_flag);
  const DatasetManifest manifest = generate_toy_corpus(corpus, out);
  write_stamp(out, cfg, "mix");
  std::printf("mixed %zu clips (%d classes, %d folds) -> %s\n", manifest.records.size(),
              manifest.n_classes, manifest.n_folds, (out / "manifest.json").c_str());
  return 0;
}

int cmd_extract(const ExperimentConfig& cfg, const std::string& manifest_flag,
                const std::string& out_flag) {
  auto [manifest, dir] = load_corpus(cfg, manifest_flag);
  fs::path cache = !out_flag.empty() ? fs::path(out_flag) : cache_dir_from_env();
  if (cache.empty()) cache = cfg.out_dir / "feature_cache";
  DatasetFeatures data = load_dataset_features(manifest, dir, cfg.features, cache);
  write_stamp(cache, cfg, "extract");
  std::printf("extracted %zu feature matrices (%d x %d) -> %s\n", data.features.size(),
              data.n_frames, data.n_mels, cache.c_str());
  return 0;
}

int cmd_train(ExperimentConfig cfg, const std::string& manifest_flag,
              const std::string& out_flag, std::optional<uint64_t> seed,
              std::optional<int> fold, const std::string& head,
              std::optional<double> alpha) {
  if (seed) cfg.train.seed = *seed;
  if (fold) cfg.train.fold = *fold;
  if (!head.empty()) cfg.train.head = head;
  if (alpha) cfg.loss.alpha = *alpha;

  TrainSetup setup;
  auto [manifest, dir] = load_corpus(cfg, manifest_flag);
  setup.manifest = std::move(manifest);
  setup.manifest_dir = dir;
  setup.features = cfg.features;
  setup.model = cfg.model;
  setup.train = cfg.train;
  setup.loss = cfg.loss;
  setup.out_dir = out_flag.empty()
                      ? cfg.out_dir / ("train_" + cfg.train.head + "_f" +
                                       std::to_string(cfg.train.fold))
                      : fs::path(out_flag);
  setup.cache_dir = cache_dir_from_env();

  const TrainResult result = train_fold(setup);
  write_stamp(setup.out_dir, cfg, "train");
  std::printf("best epoch %d  micro-P %.4f  macro-P %.4f  AUC %.4f\ncheckpoint: %s\n",
              result.history.best_epoch, result.best_metrics.micro_precision,
              result.best_metrics.macro_precision, result.best_metrics.auc,
              result.checkpoint_path.c_str());
  return 0;
}

int cmd_evaluate(const ExperimentConfig& cfg, const std::string& manifest_flag,
                 const std::string& checkpoint, std::optional<int> fold,
                 const std::string& out_flag) {
  if (checkpoint.empty()) throw ConfigError("evaluate: --checkpoint is required");
  auto [manifest, dir] = load_corpus(cfg, manifest_flag);
  const int f = fold.value_or(cfg.train.fold);
  const fs::path out = out_flag.empty()
                           ? cfg.out_dir / ("eval_f" + std::to_string(f))
                           : fs::path(out_flag);
  const MetricsReport report =
      evaluate_checkpoint(checkpoint, manifest, dir, f, out, cache_dir_from_env());
  write_stamp(out, cfg, "evaluate");
  std::printf("fold %d  micro-P %.4f  macro-P %.4f  AUC %.4f  (threshold %.2f)\n", f,
              report.micro_precision, report.macro_precision, report.auc,
              report.threshold);
  return 0;
}

int cmd_ablate(const ExperimentConfig& cfg, const std::string& manifest_flag,
               const std::string& out_flag) {
  TrainSetup base;
  auto [manifest, dir] = load_corpus(cfg, manifest_flag);
  base.manifest = std::move(manifest);
  base.manifest_dir = dir;
  base.features = cfg.features;
  base.model = cfg.model;
  base.train = cfg.train;
  base.loss = cfg.loss;
  base.out_dir = out_flag.empty() ? cfg.out_dir / "ablation" : fs::path(out_flag);
  base.cache_dir = cache_dir_from_env();

  const AblationReport report =
      run_ablation(base, cfg.ablation_alphas, cfg.ablation_heads, cfg.ablation_folds);
  write_stamp(base.out_dir, cfg, "ablate");
  std::printf("%s", ablation_table_csv(report).c_str());
  int failed = 0;
  for (const auto& cell : report.cells)
    if (cell.failed) {
      ++failed;
      std::fprintf(stderr, "cell %s alpha=%g fold=%d failed: %s\n", cell.head.c_str(),
                   cell.alpha, cell.fold, cell.error.c_str());
    }
  std::printf("report: %s\n", (base.out_dir / "ablation_table.csv").c_str());
  return failed == 0 ? 0 : 3;
}

int cmd_visualize(const ExperimentConfig& cfg, const std::string& manifest_flag,
                  const std::string& checkpoint, const std::string& clip_id,
                  const std::string& out_flag, const std::string& from_dump) {
  const fs::path out = out_flag.empty() ? cfg.out_dir / ("viz_" + clip_id)
                                        : fs::path(out_flag);
  if (!from_dump.empty()) {
    const auto panels = render_from_dump(from_dump, out);
    std::printf("re-rendered %zu panels -> %s\n", panels.size(), out.c_str());
    return 0;
  }
  if (checkpoint.empty()) throw ConfigError("visualize: --checkpoint is required");
  if (clip_id.empty()) throw ConfigError("visualize: --clip is required");
  auto [manifest, dir] = load_corpus(cfg, manifest_flag);
  const VisualizeResult result = visualize_clip(checkpoint, manifest, dir, clip_id, out);
  write_stamp(out, cfg, "visualize");
  std::printf("wrote %zu panels + %s\n", result.panels.size(), result.dump.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sedkit: weakly-labelled sound event detection toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_flag, manifest_flag, head_flag, checkpoint, clip_id,
      from_dump;
  std::optional<uint64_t> seed_flag;
  std::optional<int> fold_flag;
  std::optional<double> alpha_flag;

  auto add_common = [&](CLI::App* sub, bool needs_config) {
    auto* opt = sub->add_option("--config", config_path, "experiment config (JSON)");
    if (needs_config) opt->required();
    sub->add_option("--out", out_flag, "output directory");
    sub->add_option("--seed", seed_flag, "override the master seed");
  };

  CLI::App* mix = app.add_subcommand("mix", "synthesize an SNR-controlled toy corpus");
  add_common(mix, true);

  CLI::App* extract = app.add_subcommand("extract", "precompute the feature cache");
  add_common(extract, true);
  extract->add_option("--manifest", manifest_flag, "corpus manifest path");

  CLI::App* train = app.add_subcommand("train", "train one cross-validation fold");
  add_common(train, true);
  train->add_option("--manifest", manifest_flag, "corpus manifest path");
  train->add_option("--fold", fold_flag, "validation fold");
  train->add_option("--head", head_flag, "pooling head (gmp|gap|gwrp|attention|2ap)");
  train->add_option("--alpha", alpha_flag, "auxiliary loss weight");

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a checkpoint on a fold");
  add_common(evaluate, true);
  evaluate->add_option("--manifest", manifest_flag, "corpus manifest path");
  evaluate->add_option("--checkpoint", checkpoint, "checkpoint file");
  evaluate->add_option("--fold", fold_flag, "fold to evaluate");

  CLI::App* ablate = app.add_subcommand("ablate", "sweep alpha (and heads) over folds");
  add_common(ablate, true);
  ablate->add_option("--manifest", manifest_flag, "corpus manifest path");

  CLI::App* visualize =
      app.add_subcommand("visualize", "8-panel attention walkthrough for one clip");
  add_common(visualize, false);
  visualize->add_option("--manifest", manifest_flag, "corpus manifest path");
  visualize->add_option("--checkpoint", checkpoint, "two-step attention checkpoint");
  visualize->add_option("--clip", clip_id, "clip id from the manifest");
  visualize->add_option("--from-dump", from_dump, "re-render panels from an array dump");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = ExperimentConfig::load(config_path);
    if (seed_flag) cfg.master_seed = *seed_flag;

    if (mix->parsed()) return cmd_mix(cfg, out_flag, seed_flag);
    if (extract->parsed()) return cmd_extract(cfg, manifest_flag, out_flag);
    if (train->parsed())
      return cmd_train(cfg, manifest_flag, out_flag, seed_flag, fold_flag, head_flag,
                       alpha_flag);
    if (evaluate->parsed())
      return cmd_evaluate(cfg, manifest_flag, checkpoint, fold_flag, out_flag);
    if (ablate->parsed()) return cmd_ablate(cfg, manifest_flag, out_flag);
    if (visualize->parsed())
      return cmd_visualize(cfg, manifest_flag, checkpoint, clip_id, out_flag, from_dump);
    std::fprintf(stderr, "no subcommand\n");
    return 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  }
}
