// Copyright 2026 The Percept Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "percept/wav.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

namespace percept {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;

std::uint16_t le16(const std::uint8_t* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t le32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
  out.insert(out.end(), tag, tag + 4);
}

}  // namespace

AudioBuffer read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw WavError("cannot open WAV file " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw WavError("not a RIFF/WAVE file" + where);
  }

  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  bool have_fmt = false;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const std::uint8_t* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + size > bytes.size()) throw WavError("truncated fmt chunk" + where);
      format = le16(bytes.data() + body);
      channels = le16(bytes.data() + body + 2);
      rate = le32(bytes.data() + body + 4);
      bits = le16(bytes.data() + body + 14);
      have_fmt = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_fmt) throw WavError("data chunk before fmt chunk" + where);
      const bool pcm16 = format == kFormatPcm && bits == 16;
      const bool f32 = format == kFormatFloat && bits == 32;
      if (!pcm16 && !f32) {
        throw WavError("unsupported WAV encoding (format " + std::to_string(format) + ", " +
                       std::to_string(bits) + " bits)" + where);
      }
      if (channels == 0 || rate == 0) throw WavError("invalid channel count or rate" + where);
      if (body + size > bytes.size()) throw WavError("truncated data chunk" + where);
      const std::size_t width = bits / 8;
      const std::size_t frame_bytes = width * channels;
      if (size % frame_bytes != 0) throw WavError("data chunk is not a whole number of frames" + where);
      const Index frames = static_cast<Index>(size / frame_bytes);
      Tensor<double> samples(channels, frames);
      const std::uint8_t* p = bytes.data() + body;
      for (Index t = 0; t < frames; ++t) {
        for (Index c = 0; c < channels; ++c, p += width) {
          if (pcm16) {
            samples(c, t) = static_cast<std::int16_t>(le16(p)) / 32768.0;
          } else {
            samples(c, t) = std::bit_cast<float>(le32(p));
          }
        }
      }
      if (!samples.allFinite()) throw WavError("non-finite sample values" + where);
      return AudioBuffer(std::move(samples), static_cast<int>(rate));
    }
    pos = body + size + (size & 1u);
  }
  throw WavError("missing data chunk" + where);
}

WavWriteReport write_wav(const AudioBuffer& buf, const std::filesystem::path& path,
                         WavEncoding encoding) {
  WavWriteReport report;
  const bool pcm16 = encoding == WavEncoding::kPcm16;
  const std::uint16_t channels = static_cast<std::uint16_t>(buf.channels());
  const std::uint16_t bits = pcm16 ? 16 : 32;
  const std::uint32_t data_bytes =
      static_cast<std::uint32_t>(buf.frames() * buf.channels() * (bits / 8));

  std::vector<std::uint8_t> out;
  out.reserve(44 + data_bytes);
  put_tag(out, "RIFF");
  put32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put32(out, 16);
  put16(out, pcm16 ? kFormatPcm : kFormatFloat);
  put16(out, channels);
  put32(out, static_cast<std::uint32_t>(buf.sample_rate()));
  put32(out, static_cast<std::uint32_t>(buf.sample_rate()) * channels * (bits / 8));
  put16(out, static_cast<std::uint16_t>(channels * (bits / 8)));
  put16(out, bits);
  put_tag(out, "data");
  put32(out, data_bytes);

  const Tensor<double>& s = buf.samples();
  for (Index t = 0; t < buf.frames(); ++t) {
    for (Index c = 0; c < buf.channels(); ++c) {
      const double v = s(c, t);
      if (pcm16) {
        if (v > 1.0 || v < -1.0) ++report.clipped_samples;
        const double scaled = std::round(std::clamp(v, -1.0, 1.0) * 32768.0);
        const auto q = static_cast<std::int16_t>(std::clamp(scaled, -32768.0, 32767.0));
        put16(out, static_cast<std::uint16_t>(q));
      } else {
        put32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      }
    }
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw WavError("cannot open " + path.string() + " for writing");
  file.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!file) throw WavError("failed writing " + path.string());
  return report;
}

}  // namespace percept
