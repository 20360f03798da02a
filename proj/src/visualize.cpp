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
#include "sedkit/visualize.hpp"

#include <algorithm>
#include <numeric>

#include "sedkit/imageio.hpp"
#include "sedkit/model.hpp"
#include "sedkit/training.hpp"

namespace sedkit {

namespace {

// Fixed scales per panel type.
constexpr double kSpecMin = -3.0, kSpecMax = 3.0;  // standardized log-mel units
constexpr double kWeightMin = 0.0, kWeightMax = 1.0;

bool starts_with(const std::string& s, const std::string& prefix) {
  return s.rfind(prefix, 0) == 0;
}

Image render_named(const NamedArray& a) {
  const std::string& n = a.name;
  if (starts_with(n, "p1_") || starts_with(n, "p2_"))
    return render_spectrogram_panel(a.values, kSpecMin, kSpecMax);
  if (starts_with(n, "p3_") || starts_with(n, "p4_") || starts_with(n, "p5_")) {
    // step-1 weights arrive as {T,F} slices
    return render_spectrogram_panel(a.values, kWeightMin, kWeightMax);
  }
  if (starts_with(n, "p6_") || starts_with(n, "p7_"))
    return render_matrix_panel(a.values, kWeightMin, kWeightMax);
  if (starts_with(n, "p8_"))
    return render_bar_panel(a.values.vec(), kWeightMin, kWeightMax);
  throw InvalidInput("visualize: unrecognized panel array '" + n + "'");
}

}  // namespace

std::vector<std::filesystem::path> render_from_dump(const std::filesystem::path& dump_path,
                                                    const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  std::vector<std::filesystem::path> out;
  for (const auto& a : load_array_dump(dump_path)) {
    const Image img = render_named(a);
    const std::filesystem::path p = out_dir / (a.name + ".png");
    write_png(p, img);
    out.push_back(p);
  }
  return out;
}

VisualizeResult visualize_clip(const std::filesystem::path& checkpoint_path,
                               const DatasetManifest& manifest,
                               const std::filesystem::path& manifest_dir,
                               const std::string& clip_id,
                               const std::filesystem::path& out_dir) {
  auto [model, ckpt] = load_checkpoint(checkpoint_path);
  if (ckpt.head.kind != HeadKind::kTwoStep)
    throw UnsupportedOperation(
        "visualize: requires a checkpoint trained with the two-step attention head "
        "(got '" + head_name(ckpt.head.kind) + "')");

  const MixRecord* record = nullptr;
  for (const auto& rec : manifest.records)
    if (rec.clip_id == clip_id) {
      record = &rec;
      break;
    }
  if (!record) throw ConfigError("visualize: clip '" + clip_id + "' not in the corpus");

  const AudioClip clip = read_wav(manifest_dir / record->audio_path);
  LogMelSpectrogram spec = log_mel(clip, ckpt.features);
  ckpt.standardization.apply(spec.values);

  ForwardOutputs out = forward_clip(*model, spec.values, true);
  if (!out.attention) throw Error("visualize: attention maps missing");
  const AttentionMaps& maps = *out.attention;
  const int K = static_cast<int>(out.prediction.probs.size());
  const int T = spec.values.dim(0), F = spec.values.dim(1);

  // Panels 3-5 show the argmax-3 classes of the final prediction, descending.
  std::vector<int> order(K);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return out.prediction.probs[a] > out.prediction.probs[b];
  });
  const int n_top = std::min(3, K);
  std::vector<int> top(order.begin(), order.begin() + n_top);

  std::vector<NamedArray> arrays;
  arrays.push_back({"p1_input_logmel_std", spec.values});
  arrays.push_back({"p2_reconstruction", out.reconstruction});
  for (int i = 0; i < n_top; ++i) {
    const int k = top[i];
    Tensor slice({T, F});
    for (int t = 0; t < T; ++t)
      for (int f = 0; f < F; ++f) slice.at2(t, f) = maps.step1_weights.at3(k, t, f);
    arrays.push_back(
        {"p" + std::to_string(3 + i) + "_step1_weights_class" + std::to_string(k),
         std::move(slice)});
  }
  arrays.push_back({"p6_step1_output", maps.step1_output});
  arrays.push_back({"p7_step2_weights", maps.step2_weights});
  Tensor p2_row({1, K});
  for (int k = 0; k < K; ++k) p2_row.at2(0, k) = maps.step2_output[k];
  arrays.push_back({"p8_step2_output", std::move(p2_row)});

  std::filesystem::create_directories(out_dir);
  VisualizeResult result;
  result.dump = out_dir / (clip_id + "_arrays.seda");
  save_array_dump(result.dump, arrays);
  result.panels = render_from_dump(result.dump, out_dir);
  result.top_classes = top;
  return result;
}

}  // namespace sedkit
