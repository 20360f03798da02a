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
#include <vector>

#include "sedkit/common.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

class UndefinedMetric : public Error {
 public:
  using Error::Error;
};

// N clips x K classes of scores in [0,1] and binary labels.
struct EvalBatch {
  Tensor scores;  // {N,K}
  Tensor labels;  // {N,K}, entries 0 or 1
  void validate() const;
};

struct MetricsReport {
  double micro_precision = 0.0;
  double macro_precision = 0.0;
  double auc = 0.0;  // unweighted mean over evaluable classes
  std::vector<double> per_class_precision;
  std::vector<double> per_class_auc;       // NaN where not evaluable
  std::vector<bool> auc_evaluable;         // class has both labels present
  std::vector<bool> precision_defined;     // class produced >= 1 positive prediction
  double threshold = 0.5;
  std::vector<std::string> flags;
};

// Mann-Whitney statistic: fraction of (positive, negative) pairs ranked
// correctly, ties counted 1/2. Throws UndefinedMetric without both label
// values present.
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

// TP/(TP+FP) pooled over every (clip, class) cell; 0 when nothing is
// predicted positive (reported via the defined flag).
double micro_precision(const EvalBatch& batch, double threshold);
std::pair<double, std::vector<double>> macro_precision(const EvalBatch& batch,
                                                       double threshold);

MetricsReport compute_metrics(const EvalBatch& batch, double threshold);

void save_metrics_report(const MetricsReport& report, const std::filesystem::path& json_path);
// Per-class rows: class index, precision, auc, evaluable flag.
void save_per_class_csv(const MetricsReport& report, const std::vector<std::string>& class_names,
                        const std::filesystem::path& csv_path);

}  // namespace sedkit
