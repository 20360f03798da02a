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
#include <map>
#include <string>
#include <vector>

#include "sedkit/datamix.hpp"
#include "sedkit/metrics.hpp"
#include "sedkit/model.hpp"

namespace sedkit {

// Total objective: L = L1(BCE on clip probabilities) + alpha * L2(MSE on the
// reconstructed T-F representation). L1 reaches encoder + classifier, L2
// reaches encoder + decoder; alpha = 0 detaches the decoder entirely.
struct LossConfig {
  double alpha = 0.0;
  void validate() const {
    if (alpha < 0.0) throw ConfigError("loss: alpha must be >= 0");
  }
};

struct TrainConfig {
  int batch_size = 8;       // paper-scale default is 24
  double learning_rate = 1e-3;
  int max_epochs = 30;
  uint64_t seed = 0;
  std::string head = "2ap";
  int fold = 0;
  double gwrp_r = 0.5;
  double lr_decay = 1.0;          // per-epoch multiplier; 1 disables
  int early_stop_patience = 0;    // epochs without val improvement; 0 disables
  double threshold = 0.5;         // precision threshold
  bool verbose = false;

  void validate() const;
  HeadConfig head_config() const { return {head_from_name(head), gwrp_r, {}}; }
};

// Mean over batch and classes of clamped binary cross entropy.
double bce_loss(const Tensor& probs, const Tensor& labels);
void bce_loss_backward(const Tensor& probs, const Tensor& labels, double scale,
                       Tensor& grad_probs);
double mse_loss(const Tensor& a, const Tensor& b);
void mse_loss_backward(const Tensor& a, const Tensor& b, double scale, Tensor& grad_a);

struct MtlLoss {
  double total = 0.0, l1 = 0.0, l2 = 0.0;
};
MtlLoss mtl_loss(const Tensor& probs, const Tensor& labels, const Tensor& recon,
                 const Tensor& target, const LossConfig& cfg);

class Adam {
 public:
  Adam(std::vector<ParamRef> params, double lr, double beta1 = 0.9,
       double beta2 = 0.999, double eps = 1e-8);
  void step();
  void set_lr(double lr) { lr_ = lr; }
  double lr() const { return lr_; }

 private:
  std::vector<ParamRef> params_;
  std::vector<Tensor> m_, v_;
  double lr_, beta1_, beta2_, eps_;
  int64_t t_ = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_l1 = 0.0, train_l2 = 0.0, train_total = 0.0;
  double val_l1 = 0.0, val_l2 = 0.0;
  double val_micro_p = 0.0, val_macro_p = 0.0, val_auc = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  int best_epoch = -1;  // 1-based epoch with the best validation micro-P
};

// Raw (unstandardized) log-mel features per manifest record, all the same
// T x F. cache_dir may be empty to skip the on-disk cache.
struct DatasetFeatures {
  std::vector<Tensor> features;
  Tensor labels;  // {N,K}
  int n_frames = 0, n_mels = 0;
};
DatasetFeatures load_dataset_features(const DatasetManifest& manifest,
                                      const std::filesystem::path& manifest_dir,
                                      const FeatureConfig& features,
                                      const std::filesystem::path& cache_dir = {});

struct TrainSetup {
  DatasetManifest manifest;
  std::filesystem::path manifest_dir;
  FeatureConfig features;
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  std::filesystem::path out_dir;
  std::filesystem::path cache_dir;  // empty -> no cache
};

struct TrainResult {
  TrainHistory history;
  MetricsReport best_metrics;
  std::filesystem::path checkpoint_path;
  uint64_t model_seed = 0;
};

// Trains on every fold except train.fold, validates on train.fold, persists
// the best-validation checkpoint (micro precision), full history CSV and a
// run manifest JSON under out_dir.
TrainResult train_fold(const TrainSetup& setup);

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path);

// Inference over one fold with a trained checkpoint; writes report JSON and
// per-class CSV when out_dir is non-empty.
MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint_path,
                                  const DatasetManifest& manifest,
                                  const std::filesystem::path& manifest_dir, int fold,
                                  const std::filesystem::path& out_dir = {},
                                  const std::filesystem::path& cache_dir = {},
                                  std::map<double, MetricsReport>* per_snr = nullptr);

struct AblationCell {
  std::string head;
  double alpha = 0.0;
  int fold = 0;
  uint64_t seed = 0;
  bool failed = false;
  std::string error;
  double best_micro_p = 0.0, best_macro_p = 0.0, best_auc = 0.0;
  double final_val_recon_mse = 0.0;
  std::map<double, MetricsReport> per_snr;
  std::filesystem::path checkpoint_path;
};

struct AblationReport {
  std::vector<std::string> heads;
  std::vector<double> alphas;
  std::vector<int> folds;
  std::vector<double> snr_levels;
  std::vector<AblationCell> cells;
};

// Trains every (head, alpha, fold) cell; failed cells are recorded, not
// fatal. Emits cells.json and a per-(head,alpha) cross-fold mean table CSV.
AblationReport run_ablation(const TrainSetup& base, const std::vector<double>& alphas,
                            const std::vector<std::string>& heads,
                            const std::vector<int>& folds);

void save_ablation_report(const AblationReport& report,
                          const std::filesystem::path& out_dir);
AblationReport load_ablation_report(const std::filesystem::path& out_dir);
// Rebuilds the table from persisted cells; deterministic aggregation.
std::string ablation_table_csv(const AblationReport& report);

}  // namespace sedkit
