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

#pragma once

#include <cstddef>
#include <filesystem>
#include <stdexcept>

#include "percept/audio.hpp"

namespace percept {

class WavError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class WavEncoding { kPcm16, kFloat32 };

struct WavWriteReport {
  /// Samples outside [-1, 1] that were clamped (PCM16 only).
  std::size_t clipped_samples = 0;
};

/// Reads a RIFF/WAVE file with a PCM16 (format 1) or IEEE float32
/// (format 3) data chunk. PCM16 is scaled by 1/32768.
AudioBuffer read_wav(const std::filesystem::path& path);

WavWriteReport write_wav(const AudioBuffer& buf, const std::filesystem::path& path,
                         WavEncoding encoding = WavEncoding::kFloat32);

}  // namespace percept
