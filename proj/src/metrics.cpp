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
#include "sedkit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

namespace sedkit {

void EvalBatch::validate() const {
  if (scores.ndim() != 2 || labels.ndim() != 2 || !scores.same_shape(labels))
    throw InvalidInput("EvalBatch: scores and labels must both be {N,K}");
  if (!scores.all_finite()) throw InvalidInput("EvalBatch: scores must be finite");
  for (int64_t i = 0; i < labels.size(); ++i)
    if (labels[i] != 0.0 && labels[i] != 1.0)
      throw InvalidInput("EvalBatch: labels must be binary");
}

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty())
    throw InvalidInput("roc_auc: scores/labels size mismatch");
  int64_t n_pos = 0, n_neg = 0;
  for (int y : labels) (y != 0 ? n_pos : n_neg) += 1;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetric("roc_auc: needs at least one positive and one negative");

  // Rank-sum form with midranks for ties; equals pairwise counting with
  // ties at 1/2.
  const size_t n = scores.size();
  std::vector<size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(),
            [&scores](size_t a, size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[idx[j + 1]] == scores[idx[i]]) ++j;
    const double midrank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t t = i; t <= j; ++t)
      if (labels[idx[t]] != 0) rank_sum_pos += midrank;
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

namespace {

struct Counts {
  int64_t tp = 0, fp = 0;
};

Counts class_counts(const EvalBatch& batch, int k, double threshold) {
  Counts c;
  const int n = batch.scores.dim(0);
  for (int i = 0; i < n; ++i) {
    const bool pred = batch.scores.at2(i, k) >= threshold;
    if (!pred) continue;
    if (batch.labels.at2(i, k) != 0.0)
      ++c.tp;
    else
      ++c.fp;
  }
  return c;
}

}  // namespace

double micro_precision(const EvalBatch& batch, double threshold) {
  batch.validate();
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidInput("micro_precision: threshold must lie in (0,1)");
  int64_t tp = 0, fp = 0;
  for (int k = 0; k < batch.scores.dim(1); ++k) {
    const Counts c = class_counts(batch, k, threshold);
    tp += c.tp;
    fp += c.fp;
  }
  if (tp + fp == 0) return 0.0;
  return static_cast<double>(tp) / static_cast<double>(tp + fp);
}

std::pair<double, std::vector<double>> macro_precision(const EvalBatch& batch,
                                                       double threshold) {
  batch.validate();
  if (!(threshold > 0.0 && threshold < 1.0))
    throw InvalidInput("macro_precision: threshold must lie in (0,1)");
  const int K = batch.scores.dim(1);
  std::vector<double> per_class(K, 0.0);
  double sum = 0.0;
  for (int k = 0; k < K; ++k) {
    const Counts c = class_counts(batch, k, threshold);
    per_class[k] = (c.tp + c.fp) == 0
                       ? 0.0
                       : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
    sum += per_class[k];
  }
  return {sum / K, per_class};
}

MetricsReport compute_metrics(const EvalBatch& batch, double threshold) {
  batch.validate();
  const int N = batch.scores.dim(0), K = batch.scores.dim(1);
  MetricsReport report;
  report.threshold = threshold;
  report.micro_precision = micro_precision(batch, threshold);
  auto [macro, per_class] = macro_precision(batch, threshold);
  report.macro_precision = macro;
  report.per_class_precision = std::move(per_class);

  report.per_class_auc.assign(K, std::numeric_limits<double>::quiet_NaN());
  report.auc_evaluable.assign(K, false);
  report.precision_defined.assign(K, true);
  double auc_sum = 0.0;
  int auc_count = 0;
  for (int k = 0; k < K; ++k) {
    const Counts c = class_counts(batch, k, threshold);
    if (c.tp + c.fp == 0) {
      report.precision_defined[k] = false;
      report.flags.push_back("precision_undefined_class_" + std::to_string(k));
    }
    std::vector<double> scores(N);
    std::vector<int> labels(N);
    for (int i = 0; i < N; ++i) {
      scores[i] = batch.scores.at2(i, k);
      labels[i] = batch.labels.at2(i, k) != 0.0 ? 1 : 0;
    }
    try {
      report.per_class_auc[k] = roc_auc(scores, labels);
      report.auc_evaluable[k] = true;
      auc_sum += report.per_class_auc[k];
      ++auc_count;
    } catch (const UndefinedMetric&) {
      report.flags.push_back("auc_skipped_class_" + std::to_string(k));
    }
  }
  report.auc = auc_count > 0 ? auc_sum / auc_count : 0.0;
  if (auc_count == 0) report.flags.push_back("auc_undefined_all_classes");
  return report;
}

void save_metrics_report(const MetricsReport& report,
                         const std::filesystem::path& json_path) {
  nlohmann::ordered_json j;
  j["micro_precision"] = report.micro_precision;
  j["macro_precision"] = report.macro_precision;
  j["auc"] = report.auc;
  j["threshold"] = report.threshold;
  j["per_class_precision"] = report.per_class_precision;
  j["per_class_auc"] = nlohmann::ordered_json::array();
  for (size_t k = 0; k < report.per_class_auc.size(); ++k) {
    if (report.auc_evaluable[k])
      j["per_class_auc"].push_back(report.per_class_auc[k]);
    else
      j["per_class_auc"].push_back(nullptr);
  }
  j["precision_defined"] = report.precision_defined;
  j["flags"] = report.flags;
  std::ofstream os(json_path);
  if (!os) throw IOError("save_metrics_report: cannot open " + json_path.string());
  os << j.dump(2) << "\n";
}

void save_per_class_csv(const MetricsReport& report,
                        const std::vector<std::string>& class_names,
                        const std::filesystem::path& csv_path) {
  std::ofstream os(csv_path);
  if (!os) throw IOError("save_per_class_csv: cannot open " + csv_path.string());
  os << "class_index,class_name,precision,auc,auc_evaluable\n";
  for (size_t k = 0; k < report.per_class_precision.size(); ++k) {
    os << k << ',' << (k < class_names.size() ? class_names[k] : "") << ','
       << report.per_class_precision[k] << ',';
    if (report.auc_evaluable[k])
      os << report.per_class_auc[k];
    else
      os << "NA";
    os << ',' << (report.auc_evaluable[k] ? 1 : 0) << "\n";
  }
}

}  // namespace sedkit
