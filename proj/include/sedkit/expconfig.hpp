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

#include "sedkit/datamix.hpp"
#include "sedkit/model.hpp"
#include "sedkit/training.hpp"

namespace sedkit {

// One JSON document with sections; unknown keys are rejected up front so a
// typo cannot silently fall back to a default.
struct ExperimentConfig {
  uint64_t master_seed = 7;
  std::filesystem::path out_dir = "runs";
  std::filesystem::path manifest_path;  // corpus to train/evaluate on
  bool has_datamix = false;             // section present in the document
  CorpusConfig datamix;
  FeatureConfig features;
  ModelConfig model;
  TrainConfig train;
  LossConfig loss;
  double metrics_threshold = 0.5;
  std::vector<double> ablation_alphas = {0.0, 0.001, 0.01};
  std::vector<std::string> ablation_heads = {"2ap"};
  std::vector<int> ablation_folds = {0};

  static ExperimentConfig load(const std::filesystem::path& path);
  uint64_t hash() const;  // stamped onto run outputs
};

}  // namespace sedkit
