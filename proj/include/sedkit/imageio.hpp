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

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sedkit/common.hpp"
#include "sedkit/tensor.hpp"

namespace sedkit {

struct Image {
  int width = 0, height = 0;
  std::vector<uint8_t> rgb;  // row-major, 3 bytes per pixel

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<size_t>(w) * h * 3, 255) {}
  void set(int x, int y, uint8_t r, uint8_t g, uint8_t b) {
    const size_t i = (static_cast<size_t>(y) * width + x) * 3;
    rgb[i] = r;
    rgb[i + 1] = g;
    rgb[i + 2] = b;
  }
};

// 8-bit RGB PNG, zlib-compressed, filter 0 scanlines.
void write_png(const std::filesystem::path& path, const Image& image);

void viridis(double t, uint8_t& r, uint8_t& g, uint8_t& b);

// T x F spectrogram panel: time on x, mel bins on y with bin 0 at the bottom.
Image render_spectrogram_panel(const Tensor& values, double vmin, double vmax);
// R x C matrix panel: rows on y (row 0 on top), columns on x.
Image render_matrix_panel(const Tensor& values, double vmin, double vmax);
// Bar chart on a fixed [vmin, vmax] vertical scale.
Image render_bar_panel(const std::vector<double>& values, double vmin, double vmax);

// Multi-array dump in the binary cache spirit: "SEDA", u32 version,
// u32 count, then per array: u32 name_len, name, u32 rows, u32 cols,
// little-endian f32 data.
struct NamedArray {
  std::string name;
  Tensor values;  // 2-D
};
void save_array_dump(const std::filesystem::path& path,
                     const std::vector<NamedArray>& arrays);
std::vector<NamedArray> load_array_dump(const std::filesystem::path& path);

}  // namespace sedkit
