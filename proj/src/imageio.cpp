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
#include "sedkit/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

namespace sedkit {

namespace {

void put_be32(std::vector<uint8_t>& out, uint32_t v) {
  out.push_back(static_cast<uint8_t>(v >> 24));
  out.push_back(static_cast<uint8_t>(v >> 16));
  out.push_back(static_cast<uint8_t>(v >> 8));
  out.push_back(static_cast<uint8_t>(v));
}

void write_chunk(std::ofstream& os, const char type[4], const std::vector<uint8_t>& data) {
  std::vector<uint8_t> head;
  put_be32(head, static_cast<uint32_t>(data.size()));
  os.write(reinterpret_cast<const char*>(head.data()), 4);
  os.write(type, 4);
  if (!data.empty()) os.write(reinterpret_cast<const char*>(data.data()), data.size());
  uint32_t crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(type), 4);
  if (!data.empty()) crc = crc32(crc, data.data(), static_cast<uInt>(data.size()));
  std::vector<uint8_t> tail;
  put_be32(tail, crc);
  os.write(reinterpret_cast<const char*>(tail.data()), 4);
}

}  // namespace

void write_png(const std::filesystem::path& path, const Image& image) {
  if (image.width < 1 || image.height < 1 ||
      image.rgb.size() != static_cast<size_t>(image.width) * image.height * 3)
    throw InvalidInput("write_png: malformed image");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("write_png: cannot open " + path.string());
  static const uint8_t sig[8] = {137, 80, 78, 71, 13, 10, 26, 10};
  os.write(reinterpret_cast<const char*>(sig), 8);

  std::vector<uint8_t> ihdr;
  put_be32(ihdr, static_cast<uint32_t>(image.width));
  put_be32(ihdr, static_cast<uint32_t>(image.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  write_chunk(os, "IHDR", ihdr);

  const size_t stride = static_cast<size_t>(image.width) * 3;
  std::vector<uint8_t> raw((stride + 1) * image.height);
  for (int y = 0; y < image.height; ++y) {
    raw[y * (stride + 1)] = 0;  // filter type none
    std::memcpy(raw.data() + y * (stride + 1) + 1, image.rgb.data() + y * stride, stride);
  }
  uLongf comp_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<uint8_t> comp(comp_size);
  if (compress2(comp.data(), &comp_size, raw.data(), static_cast<uLong>(raw.size()), 9) !=
      Z_OK)
    throw Error("write_png: zlib compression failed");
  comp.resize(comp_size);
  write_chunk(os, "IDAT", comp);
  write_chunk(os, "IEND", {});
  if (!os) throw IOError("write_png: write failed for " + path.string());
}

void viridis(double t, uint8_t& r, uint8_t& g, uint8_t& b) {
  static const uint8_t anchors[10][3] = {
      {68, 1, 84},    {72, 40, 120},  {62, 74, 137},  {49, 104, 142}, {38, 130, 142},
      {31, 158, 137}, {53, 183, 121}, {110, 206, 88}, {181, 222, 43}, {253, 231, 37}};
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * 9.0;
  const int i = std::min(8, static_cast<int>(pos));
  const double frac = pos - i;
  r = static_cast<uint8_t>(std::lround(anchors[i][0] + frac * (anchors[i + 1][0] - anchors[i][0])));
  g = static_cast<uint8_t>(std::lround(anchors[i][1] + frac * (anchors[i + 1][1] - anchors[i][1])));
  b = static_cast<uint8_t>(std::lround(anchors[i][2] + frac * (anchors[i + 1][2] - anchors[i][2])));
}

namespace {

int upscale_factor(int cells, int target) {
  return std::max(1, target / std::max(cells, 1));
}

Image render_cells(const Tensor& values, double vmin, double vmax, bool flip_cols_to_y) {
  if (values.ndim() != 2) throw InvalidInput("render: expected a 2-D tensor");
  const int R = values.dim(0), C = values.dim(1);
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  // flip_cols_to_y: rows (time) on x, columns (mel) on y bottom-up.
  const int cells_x = flip_cols_to_y ? R : C;
  const int cells_y = flip_cols_to_y ? C : R;
  const int sx = upscale_factor(cells_x, 512);
  const int sy = upscale_factor(cells_y, 256);
  Image img(cells_x * sx, cells_y * sy);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const int cx = x / sx, cy = y / sy;
      double v;
      if (flip_cols_to_y)
        v = values.at2(cx, C - 1 - cy);
      else
        v = values.at2(cy, cx);
      uint8_t r, g, b;
      viridis((v - vmin) / span, r, g, b);
      img.set(x, y, r, g, b);
    }
  }
  return img;
}

}  // namespace

Image render_spectrogram_panel(const Tensor& values, double vmin, double vmax) {
  return render_cells(values, vmin, vmax, true);
}

Image render_matrix_panel(const Tensor& values, double vmin, double vmax) {
  return render_cells(values, vmin, vmax, false);
}

Image render_bar_panel(const std::vector<double>& values, double vmin, double vmax) {
  if (values.empty()) throw InvalidInput("render_bar_panel: no values");
  const int bar_w = 36, gap = 10, margin = 16, plot_h = 200;
  const int width = margin * 2 + static_cast<int>(values.size()) * (bar_w + gap) - gap;
  const int height = plot_h + margin * 2;
  Image img(width, height);
  const double span = vmax > vmin ? vmax - vmin : 1.0;
  for (size_t k = 0; k < values.size(); ++k) {
    const double t = std::clamp((values[k] - vmin) / span, 0.0, 1.0);
    const int h = static_cast<int>(std::lround(t * plot_h));
    const int x0 = margin + static_cast<int>(k) * (bar_w + gap);
    uint8_t r, g, b;
    viridis(t, r, g, b);
    for (int y = height - margin - h; y < height - margin; ++y)
      for (int x = x0; x < x0 + bar_w; ++x) img.set(x, y, r, g, b);
  }
  for (int x = margin / 2; x < width - margin / 2; ++x)
    img.set(x, height - margin, 40, 40, 40);  // baseline
  return img;
}

namespace {
constexpr char kDumpMagic[4] = {'S', 'E', 'D', 'A'};
constexpr uint32_t kDumpVersion = 1;
}  // namespace

void save_array_dump(const std::filesystem::path& path,
                     const std::vector<NamedArray>& arrays) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("array dump: cannot open " + path.string());
  os.write(kDumpMagic, 4);
  os.write(reinterpret_cast<const char*>(&kDumpVersion), sizeof(kDumpVersion));
  const uint32_t count = static_cast<uint32_t>(arrays.size());
  os.write(reinterpret_cast<const char*>(&count), sizeof(count));
  for (const auto& a : arrays) {
    if (a.values.ndim() != 2) throw InvalidInput("array dump: arrays must be 2-D");
    const uint32_t name_len = static_cast<uint32_t>(a.name.size());
    os.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
    os.write(a.name.data(), name_len);
    const uint32_t rows = static_cast<uint32_t>(a.values.dim(0));
    const uint32_t cols = static_cast<uint32_t>(a.values.dim(1));
    os.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
    os.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
    std::vector<float> buf(a.values.size());
    for (int64_t i = 0; i < a.values.size(); ++i) buf[i] = static_cast<float>(a.values[i]);
    os.write(reinterpret_cast<const char*>(buf.data()), buf.size() * sizeof(float));
  }
  if (!os) throw IOError("array dump: write failed for " + path.string());
}

std::vector<NamedArray> load_array_dump(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("array dump: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  uint32_t version = 0, count = 0;
  is.read(reinterpret_cast<char*>(&version), sizeof(version));
  is.read(reinterpret_cast<char*>(&count), sizeof(count));
  if (!is || std::memcmp(magic, kDumpMagic, 4) != 0 || version != kDumpVersion)
    throw IOError("array dump: bad header in " + path.string());
  std::vector<NamedArray> arrays(count);
  for (uint32_t i = 0; i < count; ++i) {
    uint32_t name_len = 0, rows = 0, cols = 0;
    is.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    is.read(reinterpret_cast<char*>(&rows), sizeof(rows));
    is.read(reinterpret_cast<char*>(&cols), sizeof(cols));
    Tensor t({static_cast<int>(rows), static_cast<int>(cols)});
    std::vector<float> buf(t.size());
    is.read(reinterpret_cast<char*>(buf.data()), buf.size() * sizeof(float));
    if (!is) throw IOError("array dump: truncated data in " + path.string());
    for (int64_t n = 0; n < t.size(); ++n) t[n] = buf[n];
    arrays[i].name = std::move(name);
    arrays[i].values = std::move(t);
  }
  return arrays;
}

}  // namespace sedkit
