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

namespace sedkit {

// Eight-panel walkthrough of one clip through the two-step attention model:
//   1 standardized log-mel input          2 decoder reconstruction
//   3-5 step-1 attention weights of the three most probable classes
//   6 step-1 output (classes x time)      7 step-2 attention weights
//   8 step-2 output bar chart
// Raw weights, no thresholding; color scales fixed per panel type so the
// same arrays always produce the same pixels.
struct VisualizeResult {
  std::vector<std::filesystem::path> panels;  // in panel order
  std::filesystem::path dump;                 // all arrays, binary
  std::vector<int> top_classes;               // panel 3-5 class indices
};

VisualizeResult visualize_clip(const std::filesystem::path& checkpoint_path,
                               const DatasetManifest& manifest,
                               const std::filesystem::path& manifest_dir,
                               const std::string& clip_id,
                               const std::filesystem::path& out_dir);

// Re-render panels from a previously written dump; byte-identical PNGs.
std::vector<std::filesystem::path> render_from_dump(const std::filesystem::path& dump_path,
                                                    const std::filesystem::path& out_dir);

}  // namespace sedkit
