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
#include "sedkit/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace sedkit {

double mean_power(const AudioClip& clip, int64_t begin, int64_t len) {
  if (len < 0) len = clip.length() - begin;
  if (begin < 0 || len <= 0 || begin + len > clip.length())
    throw InvalidInput("mean_power: window out of range");
  double acc = 0.0;
  for (int64_t i = begin; i < begin + len; ++i) acc += clip.samples[i] * clip.samples[i];
  return acc / static_cast<double>(len);
}

namespace {

void put_u32(std::ofstream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u16(std::ofstream& os, uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<char*>(b), 2);
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t get_u16(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace

void write_wav(const std::filesystem::path& path, const AudioClip& clip) {
  clip.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IOError("write_wav: cannot open " + path.string());

  const uint32_t n = static_cast<uint32_t>(clip.samples.size());
  const uint32_t data_bytes = n * 2;
  os.write("RIFF", 4);
  put_u32(os, 36 + data_bytes);
  os.write("WAVE", 4);
  os.write("fmt ", 4);
  put_u32(os, 16);
  put_u16(os, 1);  // PCM
  put_u16(os, 1);  // mono
  put_u32(os, static_cast<uint32_t>(clip.sample_rate));
  put_u32(os, static_cast<uint32_t>(clip.sample_rate) * 2);
  put_u16(os, 2);
  put_u16(os, 16);
  os.write("data", 4);
  put_u32(os, data_bytes);
  std::vector<unsigned char> buf(data_bytes);
  for (uint32_t i = 0; i < n; ++i) {
    const double v = std::clamp(clip.samples[i], -1.0, 1.0);
    const int16_t s = static_cast<int16_t>(std::lround(v * 32767.0));
    buf[2 * i] = static_cast<unsigned char>(s & 0xff);
    buf[2 * i + 1] = static_cast<unsigned char>((s >> 8) & 0xff);
  }
  os.write(reinterpret_cast<char*>(buf.data()), buf.size());
  if (!os) throw IOError("write_wav: write failed for " + path.string());
}

AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOError("read_wav: cannot open " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 44 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
    throw IOError("read_wav: not a RIFF/WAVE file: " + path.string());

  AudioClip clip;
  size_t pos = 12;
  bool have_fmt = false, have_data = false;
  uint16_t channels = 0, bits = 0, format = 0;
  while (pos + 8 <= bytes.size()) {
    const uint32_t chunk_size = get_u32(bytes.data() + pos + 4);
    const unsigned char* body = bytes.data() + pos + 8;
    if (pos + 8 + chunk_size > bytes.size())
      throw IOError("read_wav: truncated chunk in " + path.string());
    if (std::memcmp(bytes.data() + pos, "fmt ", 4) == 0 && chunk_size >= 16) {
      format = get_u16(body);
      channels = get_u16(body + 2);
      clip.sample_rate = static_cast<int>(get_u32(body + 4));
      bits = get_u16(body + 14);
      have_fmt = true;
    } else if (std::memcmp(bytes.data() + pos, "data", 4) == 0) {
      if (!have_fmt) throw IOError("read_wav: data chunk before fmt in " + path.string());
      if (format != 1 || channels != 1 || bits != 16)
        throw IOError("read_wav: expected 16-bit PCM mono: " + path.string());
      const uint32_t n = chunk_size / 2;
      clip.samples.resize(n);
      for (uint32_t i = 0; i < n; ++i) {
        const int16_t s = static_cast<int16_t>(get_u16(body + 2 * i));
        clip.samples[i] = static_cast<double>(s) / 32768.0;
      }
      have_data = true;
    }
    pos += 8 + chunk_size + (chunk_size & 1);
  }
  if (!have_data) throw IOError("read_wav: no data chunk in " + path.string());
  return clip;
}

}  // namespace sedkit
