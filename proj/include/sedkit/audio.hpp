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
#include <vector>

#include "sedkit/common.hpp"

namespace sedkit {

// Mono waveform, nominal amplitude range [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 32000;

  int64_t length() const { return static_cast<int64_t>(samples.size()); }
  double seconds() const { return static_cast<double>(samples.size()) / sample_rate; }

  void validate() const {
    if (samples.empty()) throw InvalidInput("AudioClip: samples must be non-empty");
    if (sample_rate <= 0) throw InvalidInput("AudioClip: sample_rate must be positive");
  }
};

// Mean squared amplitude over [begin, begin+len).
double mean_power(const AudioClip& clip, int64_t begin = 0, int64_t len = -1);

// 16-bit PCM mono WAV. Writing clamps to [-1, 1] and scales by 32767;
// reading divides by 32768.
void write_wav(const std::filesystem::path& path, const AudioClip& clip);
AudioClip read_wav(const std::filesystem::path& path);

}  // namespace sedkit
