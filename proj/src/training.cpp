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
#include "sedkit/training.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>

#include <json.hpp>

namespace sedkit {

using ordered_json = nlohmann::ordered_json;

namespace {
constexpr double kBceClampLo = 1e-7;
constexpr double kBceClampHi = 1.0 - 1e-7;
}  // namespace

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (learning_rate <= 0.0) throw ConfigError("train: learning_rate must be positive");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be >= 1");
  if (fold < 0) throw ConfigError("train: fold must be >= 0");
  head_from_name(head);
  if (!(gwrp_r >= 0.0 && gwrp_r <= 1.0)) throw ConfigError("train: gwrp_r must lie in [0,1]");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0))
    throw ConfigError("train: lr_decay must lie in (0,1]");
  if (early_stop_patience < 0) throw ConfigError("train: early_stop_patience must be >= 0");
  if (!(threshold > 0.0 && threshold < 1.0))
    throw ConfigError("train: threshold must lie in (0,1)");
}

double bce_loss(const Tensor& probs, const Tensor& labels) {
  if (!probs.same_shape(labels)) throw InvalidInput("bce_loss: shape mismatch");
  if (probs.size() == 0) throw InvalidInput("bce_loss: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < probs.size(); ++i) {
    const double p = std::clamp(probs[i], kBceClampLo, kBceClampHi);
    const double y = labels[i];
    acc += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
  }
  return acc / static_cast<double>(probs.size());
}

void bce_loss_backward(const Tensor& probs, const Tensor& labels, double scale,
                       Tensor& grad_probs) {
  if (!probs.same_shape(labels) || !probs.same_shape(grad_probs))
    throw InvalidInput("bce_loss_backward: shape mismatch");
  const double n = static_cast<double>(probs.size());
  for (int64_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= kBceClampLo || probs[i] >= kBceClampHi) continue;  // clamp region
    const double p = probs[i], y = labels[i];
    grad_probs[i] += scale * (p - y) / (p * (1.0 - p)) / n;
  }
}

double mse_loss(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw InvalidInput("mse_loss: shape mismatch");
  if (a.size() == 0) throw InvalidInput("mse_loss: empty input");
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.size());
}

void mse_loss_backward(const Tensor& a, const Tensor& b, double scale, Tensor& grad_a) {
  if (!a.same_shape(b) || !a.same_shape(grad_a))
    throw InvalidInput("mse_loss_backward: shape mismatch");
  const double n = static_cast<double>(a.size());
  for (int64_t i = 0; i < a.size(); ++i) grad_a[i] += scale * 2.0 * (a[i] - b[i]) / n;
}

MtlLoss mtl_loss(const Tensor& probs, const Tensor& labels, const Tensor& recon,
                 const Tensor& target, const LossConfig& cfg) {
  cfg.validate();
  MtlLoss out;
  out.l1 = bce_loss(probs, labels);
  out.l2 = cfg.alpha > 0.0 ? mse_loss(recon, target) : 0.0;
  out.total = out.l1 + cfg.alpha * out.l2;
  return out;
}

Adam::Adam(std::vector<ParamRef> params, double lr, double beta1, double beta2,
           double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (auto& p : params_) {
    m_.emplace_back(p.value->shape());
    v_.emplace_back(p.value->shape());
  }
}

void Adam::step() {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (size_t j = 0; j < params_.size(); ++j) {
    Tensor& value = *params_[j].value;
    const Tensor& grad = *params_[j].grad;
    Tensor& m = m_[j];
    Tensor& v = v_[j];
    for (int64_t i = 0; i < value.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * grad[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      value[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

DatasetFeatures load_dataset_features(const DatasetManifest& manifest,
                                      const std::filesystem::path& manifest_dir,
                                      const FeatureConfig& features,
                                      const std::filesystem::path& cache_dir) {
  features.validate();
  if (manifest.records.empty()) throw ConfigError("load_dataset_features: empty manifest");
  const int n = static_cast<int>(manifest.records.size());
  const uint64_t cfg_hash = features.hash();
  if (!cache_dir.empty()) std::filesystem::create_directories(cache_dir);

  DatasetFeatures out;
  out.features.resize(n);
  std::exception_ptr first_error;
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    if (first_error) continue;
    try {
      const MixRecord& rec = manifest.records[i];
      std::filesystem::path cache_path;
      if (!cache_dir.empty()) {
        cache_path = cache_dir / (rec.clip_id + ".sedf");
        if (feature_cache_exists(cache_path, cfg_hash)) {
          out.features[i] = load_feature_cache(cache_path, cfg_hash);
          continue;
        }
      }
      const AudioClip clip = read_wav(manifest_dir / rec.audio_path);
      LogMelSpectrogram spec = log_mel(clip, features);
      if (!cache_path.empty()) save_feature_cache(cache_path, spec.values, cfg_hash);
      out.features[i] = std::move(spec.values);
    } catch (...) {
#pragma omp critical
      if (!first_error) first_error = std::current_exception();
    }
  }
  if (first_error) std::rethrow_exception(first_error);

  out.n_frames = out.features.front().dim(0);
  out.n_mels = out.features.front().dim(1);
  for (const auto& f : out.features)
    if (f.dim(0) != out.n_frames || f.dim(1) != out.n_mels)
      throw InvalidInput("load_dataset_features: inconsistent feature shapes");
  out.labels = Tensor({n, manifest.n_classes});
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < manifest.n_classes; ++k)
      out.labels.at2(i, k) = manifest.records[i].weak_label[k];
  return out;
}

namespace {

void fill_batch(const std::vector<Tensor>& feats, const Tensor& labels,
                const std::vector<int>& indices, size_t begin, size_t count,
                Tensor& xb, Tensor& yb) {
  const int T = feats.front().dim(0), F = feats.front().dim(1);
  const int K = labels.dim(1);
  xb = Tensor({static_cast<int>(count), T, F});
  yb = Tensor({static_cast<int>(count), K});
  for (size_t b = 0; b < count; ++b) {
    const int idx = indices[begin + b];
    std::copy(feats[idx].vec().begin(), feats[idx].vec().end(),
              xb.vec().begin() + static_cast<int64_t>(b) * T * F);
    for (int k = 0; k < K; ++k) yb.at2(static_cast<int>(b), k) = labels.at2(idx, k);
  }
}

struct ValOutcome {
  double l1 = 0.0, l2 = 0.0;
  Tensor scores, labels;
};

ValOutcome run_validation(Model& model, const std::vector<Tensor>& std_feats,
                          const Tensor& labels, const std::vector<int>& val_idx,
                          int batch_size) {
  const int K = labels.dim(1);
  ValOutcome out;
  out.scores = Tensor({static_cast<int>(val_idx.size()), K});
  out.labels = Tensor({static_cast<int>(val_idx.size()), K});
  double l1_sum = 0.0, l2_sum = 0.0;
  int64_t seen = 0;
  for (size_t pos = 0; pos < val_idx.size(); pos += batch_size) {
    const size_t count = std::min<size_t>(batch_size, val_idx.size() - pos);
    Tensor xb, yb;
    fill_batch(std_feats, labels, val_idx, pos, count, xb, yb);
    ForwardBatch fb = model.forward(xb, false, true);
    l1_sum += bce_loss(fb.probs, yb) * static_cast<double>(count);
    l2_sum += mse_loss(fb.reconstruction, xb) * static_cast<double>(count);
    for (size_t b = 0; b < count; ++b)
      for (int k = 0; k < K; ++k) {
        out.scores.at2(static_cast<int>(pos + b), k) = fb.probs.at2(static_cast<int>(b), k);
        out.labels.at2(static_cast<int>(pos + b), k) = yb.at2(static_cast<int>(b), k);
      }
    seen += count;
  }
  out.l1 = l1_sum / static_cast<double>(seen);
  out.l2 = l2_sum / static_cast<double>(seen);
  return out;
}

ordered_json feature_config_to_json(const FeatureConfig& f) {
  return ordered_json{{"window_size", f.window_size}, {"hop", f.hop},
                      {"n_mels", f.n_mels},           {"sample_rate", f.sample_rate},
                      {"fmin", f.fmin},               {"fmax", f.fmax},
                      {"log_floor", f.log_floor}};
}

}  // namespace

TrainResult train_fold(const TrainSetup& setup) {
  setup.train.validate();
  setup.loss.validate();
  setup.model.validate();
  setup.features.validate();
  setup.manifest.validate();
  if (setup.train.fold >= setup.manifest.n_folds)
    throw ConfigError("train: fold " + std::to_string(setup.train.fold) +
                      " out of range for " + std::to_string(setup.manifest.n_folds) +
                      " folds");
  if (setup.model.n_classes != setup.manifest.n_classes)
    throw ConfigError("train: model n_classes does not match the corpus");
  if (setup.model.n_mels != setup.features.n_mels)
    throw ConfigError("train: model n_mels does not match the feature config");
  std::filesystem::create_directories(setup.out_dir);

  std::vector<int> train_idx, val_idx;
  for (size_t i = 0; i < setup.manifest.records.size(); ++i) {
    if (setup.manifest.records[i].fold == setup.train.fold)
      val_idx.push_back(static_cast<int>(i));
    else
      train_idx.push_back(static_cast<int>(i));
  }
  if (train_idx.empty()) throw ConfigError("train: training split is empty");
  if (val_idx.empty()) throw ConfigError("train: validation split is empty");

  DatasetFeatures data =
      load_dataset_features(setup.manifest, setup.manifest_dir, setup.features,
                            setup.cache_dir);

  // Standardization fitted on the training folds only.
  std::vector<LogMelSpectrogram> train_specs;
  train_specs.reserve(train_idx.size());
  for (int idx : train_idx) train_specs.push_back(LogMelSpectrogram{data.features[idx]});
  const Standardization std_stats = compute_standardization(train_specs);
  train_specs.clear();
  std::vector<Tensor> std_feats = data.features;
  for (auto& f : std_feats) std_stats.apply(f);

  const uint64_t model_seed = derive_seed(setup.train.seed, "model");
  Model model(setup.model, setup.train.head_config(), model_seed);

  const bool with_decoder = setup.loss.alpha > 0.0;
  std::vector<ParamRef> trainable;
  for (auto& p : model.params()) {
    if (!with_decoder && p.name.rfind("decoder.", 0) == 0) continue;
    trainable.push_back(p);
  }
  Adam opt(trainable, setup.train.learning_rate);

  TrainResult result;
  result.model_seed = model_seed;
  double best_micro = -1.0;
  std::vector<Tensor> best_params, best_buffers;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= setup.train.max_epochs; ++epoch) {
    std::vector<int> order = train_idx;
    std::mt19937_64 shuffle_rng(derive_seed(setup.train.seed, "shuffle", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double l1_sum = 0.0, l2_sum = 0.0, total_sum = 0.0;
    int64_t seen = 0;
    for (size_t pos = 0; pos < order.size(); pos += setup.train.batch_size) {
      const size_t count = std::min<size_t>(setup.train.batch_size, order.size() - pos);
      Tensor xb, yb;
      fill_batch(std_feats, data.labels, order, pos, count, xb, yb);

      ForwardBatch fb = model.forward(xb, true, with_decoder);
      const double l1 = bce_loss(fb.probs, yb);
      const double l2 = with_decoder ? mse_loss(fb.reconstruction, xb) : 0.0;
      const double total = l1 + setup.loss.alpha * l2;
      if (!std::isfinite(total))
        throw TrainingError("train: non-finite loss at epoch " + std::to_string(epoch));

      model.zero_grads();
      Tensor grad_probs(fb.probs.shape());
      bce_loss_backward(fb.probs, yb, 1.0, grad_probs);
      Tensor grad_recon;
      if (with_decoder) {
        grad_recon = Tensor(fb.reconstruction.shape());
        mse_loss_backward(fb.reconstruction, xb, setup.loss.alpha, grad_recon);
      }
      model.backward(fb, xb, grad_probs, with_decoder ? &grad_recon : nullptr);
      opt.step();

      l1_sum += l1 * static_cast<double>(count);
      l2_sum += l2 * static_cast<double>(count);
      total_sum += total * static_cast<double>(count);
      seen += count;
    }

    const ValOutcome val =
        run_validation(model, std_feats, data.labels, val_idx, setup.train.batch_size);
    EvalBatch val_batch{val.scores, val.labels};
    const MetricsReport metrics = compute_metrics(val_batch, setup.train.threshold);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_l1 = l1_sum / static_cast<double>(seen);
    rec.train_l2 = l2_sum / static_cast<double>(seen);
    rec.train_total = total_sum / static_cast<double>(seen);
    rec.val_l1 = val.l1;
    rec.val_l2 = val.l2;
    rec.val_micro_p = metrics.micro_precision;
    rec.val_macro_p = metrics.macro_precision;
    rec.val_auc = metrics.auc;
    result.history.epochs.push_back(rec);
    if (setup.train.verbose) {
      std::printf(
          "epoch %3d  train L1 %.4f L2 %.4f  val L1 %.4f L2 %.4f  micro-P %.4f "
          "macro-P %.4f AUC %.4f\n",
          epoch, rec.train_l1, rec.train_l2, rec.val_l1, rec.val_l2, rec.val_micro_p,
          rec.val_macro_p, rec.val_auc);
      std::fflush(stdout);
    }

    if (metrics.micro_precision > best_micro) {
      best_micro = metrics.micro_precision;
      result.history.best_epoch = epoch;
      result.best_metrics = metrics;
      best_params.clear();
      best_buffers.clear();
      for (auto& p : model.params()) best_params.push_back(*p.value);
      for (auto& b : model.buffers()) best_buffers.push_back(*b.value);
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (setup.train.early_stop_patience > 0 &&
          epochs_since_best >= setup.train.early_stop_patience)
        break;
    }
    if (setup.train.lr_decay < 1.0) opt.set_lr(opt.lr() * setup.train.lr_decay);
  }

  {
    auto params = model.params();
    for (size_t i = 0; i < params.size(); ++i) *params[i].value = best_params[i];
    auto buffers = model.buffers();
    for (size_t i = 0; i < buffers.size(); ++i) *buffers[i].value = best_buffers[i];
  }
  result.checkpoint_path = setup.out_dir / ("checkpoint_" + setup.train.head + ".sedc");
  save_checkpoint(result.checkpoint_path, model, setup.features, std_stats, model_seed);
  save_history_csv(result.history, setup.out_dir / "history.csv");

  ordered_json run;
  run["train"] = ordered_json{{"batch_size", setup.train.batch_size},
                              {"learning_rate", setup.train.learning_rate},
                              {"max_epochs", setup.train.max_epochs},
                              {"seed", setup.train.seed},
                              {"head", setup.train.head},
                              {"fold", setup.train.fold},
                              {"gwrp_r", setup.train.gwrp_r},
                              {"lr_decay", setup.train.lr_decay},
                              {"early_stop_patience", setup.train.early_stop_patience},
                              {"threshold", setup.train.threshold}};
  run["loss"] = ordered_json{{"alpha", setup.loss.alpha}};
  run["model"] = ordered_json{{"encoder_widths", setup.model.encoder_widths},
                              {"decoder_widths", setup.model.decoder_widths_or_default()},
                              {"n_classes", setup.model.n_classes},
                              {"n_mels", setup.model.n_mels},
                              {"block_pool", setup.model.block_pool},
                              {"decoder_final_linear", setup.model.decoder_final_linear},
                              {"attention_per_class", setup.model.attention_per_class}};
  run["features"] = feature_config_to_json(setup.features);
  run["model_seed"] = model_seed;
  run["init_scheme"] = "fan-in scaled uniform conv/linear, zero bias, identity batch-norm";
  run["loss_reduction"] = "mean over batch and classes";
  run["optimizer"] = ordered_json{{"kind", "adam"}, {"beta1", 0.9}, {"beta2", 0.999},
                                  {"eps", 1e-8}};
  run["environment"] = ordered_json{{"omp_max_threads", omp_get_max_threads()}};
  run["results"] =
      ordered_json{{"best_epoch", result.history.best_epoch},
                   {"best_val_micro_precision", result.best_metrics.micro_precision},
                   {"best_val_macro_precision", result.best_metrics.macro_precision},
                   {"best_val_auc", result.best_metrics.auc},
                   {"epochs_run", result.history.epochs.size()}};
  std::ofstream os(setup.out_dir / "run_manifest.json");
  if (!os) throw IOError("train: cannot write run manifest");
  os << run.dump(2) << "\n";
  return result;
}

void save_history_csv(const TrainHistory& history, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw IOError("save_history_csv: cannot open " + path.string());
  os << "epoch,train_l1,train_l2,train_total,val_l1,val_l2,val_micro_p,val_macro_p,"
        "val_auc\n";
  char line[256];
  for (const auto& r : history.epochs) {
    std::snprintf(line, sizeof(line), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f\n",
                  r.epoch, r.train_l1, r.train_l2, r.train_total, r.val_l1, r.val_l2,
                  r.val_micro_p, r.val_macro_p, r.val_auc);
    os << line;
  }
}

MetricsReport evaluate_checkpoint(const std::filesystem::path& checkpoint_path,
                                  const DatasetManifest& manifest,
                                  const std::filesystem::path& manifest_dir, int fold,
                                  const std::filesystem::path& out_dir,
                                  const std::filesystem::path& cache_dir,
                                  std::map<double, MetricsReport>* per_snr) {
  auto [model, ckpt] = load_checkpoint(checkpoint_path);
  manifest.validate();
  if (fold < 0 || fold >= manifest.n_folds)
    throw ConfigError("evaluate: fold out of range");
  if (ckpt.model.n_classes != manifest.n_classes)
    throw ConfigError("evaluate: checkpoint classes do not match the corpus");
  if (ckpt.features.sample_rate != manifest.sample_rate)
    throw ConfigError("evaluate: checkpoint sample rate does not match the corpus");

  DatasetFeatures data =
      load_dataset_features(manifest, manifest_dir, ckpt.features, cache_dir);
  std::vector<Tensor> std_feats = data.features;
  for (auto& f : std_feats) ckpt.standardization.apply(f);

  const std::vector<int> val_idx = manifest.fold_record_indices(fold);
  const ValOutcome val = run_validation(*model, std_feats, data.labels, val_idx, 8);
  EvalBatch batch{val.scores, val.labels};
  const double threshold = 0.5;
  MetricsReport report = compute_metrics(batch, threshold);

  if (per_snr) {
    per_snr->clear();
    const int K = manifest.n_classes;
    for (double snr : manifest.snr_levels) {
      std::vector<int> rows;
      for (size_t i = 0; i < val_idx.size(); ++i)
        if (manifest.records[val_idx[i]].snr_db == snr) rows.push_back(static_cast<int>(i));
      if (rows.empty()) continue;
      EvalBatch sub;
      sub.scores = Tensor({static_cast<int>(rows.size()), K});
      sub.labels = Tensor({static_cast<int>(rows.size()), K});
      for (size_t i = 0; i < rows.size(); ++i)
        for (int k = 0; k < K; ++k) {
          sub.scores.at2(static_cast<int>(i), k) = val.scores.at2(rows[i], k);
          sub.labels.at2(static_cast<int>(i), k) = val.labels.at2(rows[i], k);
        }
      (*per_snr)[snr] = compute_metrics(sub, threshold);
    }
  }

  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    save_metrics_report(report, out_dir / "metrics.json");
    std::vector<std::string> names;
    for (const auto& s : manifest.event_classes)
      names.push_back(s.kind + "_" + std::to_string(s.class_index));
    save_per_class_csv(report, names, out_dir / "per_class.csv");
  }
  return report;
}

namespace {

ordered_json metrics_brief(const MetricsReport& m) {
  return ordered_json{{"micro_precision", m.micro_precision},
                      {"macro_precision", m.macro_precision},
                      {"auc", m.auc},
                      {"threshold", m.threshold}};
}

}  // namespace

AblationReport run_ablation(const TrainSetup& base, const std::vector<double>& alphas,
                            const std::vector<std::string>& heads,
                            const std::vector<int>& folds) {
  if (alphas.empty() || heads.empty() || folds.empty())
    throw ConfigError("ablation: alphas, heads and folds must be non-empty");
  AblationReport report;
  report.heads = heads;
  report.alphas = alphas;
  report.folds = folds;
  report.snr_levels = base.manifest.snr_levels;

  int cell_index = 0;
  for (const auto& head : heads) {
    for (double alpha : alphas) {
      for (int fold : folds) {
        AblationCell cell;
        cell.head = head;
        cell.alpha = alpha;
        cell.fold = fold;
        cell.seed = derive_seed(base.train.seed, "ablation_cell",
                                static_cast<uint64_t>(cell_index));
        char tag[96];
        std::snprintf(tag, sizeof(tag), "cell_%s_a%g_f%d", head.c_str(), alpha, fold);
        try {
          TrainSetup setup = base;
          setup.train.head = head;
          setup.train.fold = fold;
          setup.train.seed = cell.seed;
          setup.loss.alpha = alpha;
          setup.out_dir = base.out_dir / tag;
          TrainResult res = train_fold(setup);
          cell.best_micro_p = res.best_metrics.micro_precision;
          cell.best_macro_p = res.best_metrics.macro_precision;
          cell.best_auc = res.best_metrics.auc;
          cell.final_val_recon_mse = res.history.epochs.back().val_l2;
          cell.checkpoint_path = res.checkpoint_path;
          evaluate_checkpoint(res.checkpoint_path, base.manifest, base.manifest_dir,
                              fold, {}, base.cache_dir, &cell.per_snr);
        } catch (const std::exception& e) {
          cell.failed = true;
          cell.error = e.what();
        }
        report.cells.push_back(std::move(cell));
        ++cell_index;
      }
    }
  }
  save_ablation_report(report, base.out_dir);
  return report;
}

std::string ablation_table_csv(const AblationReport& report) {
  std::string out = "head,alpha";
  char buf[128];
  for (double snr : report.snr_levels) {
    std::snprintf(buf, sizeof(buf), ",micro_p@%gdB,macro_p@%gdB,auc@%gdB", snr, snr, snr);
    out += buf;
  }
  out += "\n";
  for (const auto& head : report.heads) {
    for (double alpha : report.alphas) {
      std::snprintf(buf, sizeof(buf), "%s,%g", head.c_str(), alpha);
      out += buf;
      for (double snr : report.snr_levels) {
        double micro = 0.0, macro = 0.0, auc = 0.0;
        int count = 0;
        for (const auto& cell : report.cells) {
          if (cell.failed || cell.head != head || cell.alpha != alpha) continue;
          auto it = cell.per_snr.find(snr);
          if (it == cell.per_snr.end()) continue;
          micro += it->second.micro_precision;
          macro += it->second.macro_precision;
          auc += it->second.auc;
          ++count;
        }
        if (count > 0) {
          std::snprintf(buf, sizeof(buf), ",%.4f,%.4f,%.4f", micro / count, macro / count,
                        auc / count);
          out += buf;
        } else {
          out += ",NA,NA,NA";
        }
      }
      out += "\n";
    }
  }
  return out;
}

void save_ablation_report(const AblationReport& report,
                          const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  ordered_json j;
  j["heads"] = report.heads;
  j["alphas"] = report.alphas;
  j["folds"] = report.folds;
  j["snr_levels"] = report.snr_levels;
  j["cells"] = ordered_json::array();
  for (const auto& cell : report.cells) {
    ordered_json c{{"head", cell.head},
                   {"alpha", cell.alpha},
                   {"fold", cell.fold},
                   {"seed", cell.seed},
                   {"failed", cell.failed},
                   {"error", cell.error},
                   {"best_micro_p", cell.best_micro_p},
                   {"best_macro_p", cell.best_macro_p},
                   {"best_auc", cell.best_auc},
                   {"final_val_recon_mse", cell.final_val_recon_mse},
                   {"checkpoint", cell.checkpoint_path.string()}};
    c["per_snr"] = ordered_json::object();
    for (const auto& [snr, m] : cell.per_snr) {
      char key[32];
      std::snprintf(key, sizeof(key), "%g", snr);
      c["per_snr"][key] = metrics_brief(m);
    }
    j["cells"].push_back(std::move(c));
  }
  std::ofstream os(out_dir / "cells.json");
  if (!os) throw IOError("ablation: cannot write cells.json");
  os << j.dump(2) << "\n";

  std::ofstream table(out_dir / "ablation_table.csv");
  if (!table) throw IOError("ablation: cannot write ablation_table.csv");
  table << ablation_table_csv(report);
}

AblationReport load_ablation_report(const std::filesystem::path& out_dir) {
  std::ifstream is(out_dir / "cells.json");
  if (!is) throw IOError("ablation: cannot open cells.json under " + out_dir.string());
  ordered_json j;
  is >> j;
  AblationReport report;
  report.heads = j.at("heads").get<std::vector<std::string>>();
  report.alphas = j.at("alphas").get<std::vector<double>>();
  report.folds = j.at("folds").get<std::vector<int>>();
  report.snr_levels = j.at("snr_levels").get<std::vector<double>>();
  for (const auto& c : j.at("cells")) {
    AblationCell cell;
    cell.head = c.at("head").get<std::string>();
    cell.alpha = c.at("alpha").get<double>();
    cell.fold = c.at("fold").get<int>();
    cell.seed = c.at("seed").get<uint64_t>();
    cell.failed = c.at("failed").get<bool>();
    cell.error = c.at("error").get<std::string>();
    cell.best_micro_p = c.at("best_micro_p").get<double>();
    cell.best_macro_p = c.at("best_macro_p").get<double>();
    cell.best_auc = c.at("best_auc").get<double>();
    cell.final_val_recon_mse = c.at("final_val_recon_mse").get<double>();
    cell.checkpoint_path = c.at("checkpoint").get<std::string>();
    for (const auto& [key, m] : c.at("per_snr").items()) {
      MetricsReport r;
      r.micro_precision = m.at("micro_precision").get<double>();
      r.macro_precision = m.at("macro_precision").get<double>();
      r.auc = m.at("auc").get<double>();
      r.threshold = m.at("threshold").get<double>();
      cell.per_snr[std::stod(key)] = std::move(r);
    }
    report.cells.push_back(std::move(cell));
  }
  return report;
}

}  // namespace sedkit
