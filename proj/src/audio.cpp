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

#include "percept/audio.hpp"

#include <string>

namespace percept {

AudioBuffer::AudioBuffer(Tensor<double> samples, int sample_rate_hz)
    : samples_(std::move(samples)), sample_rate_hz_(sample_rate_hz) {
  if (sample_rate_hz_ <= 0) {
    throw std::invalid_argument("AudioBuffer: sample rate must be positive, got " +
                                std::to_string(sample_rate_hz_));
  }
  if (!samples_.allFinite()) throw std::invalid_argument("AudioBuffer: non-finite samples");
}

AudioBuffer select_channel(const AudioBuffer& buf, Index c) {
  if (c < 0 || c >= buf.channels()) {
    throw std::out_of_range("select_channel: channel " + std::to_string(c) +
                            " out of range for " + std::to_string(buf.channels()) +
                            "-channel buffer");
  }
  return AudioBuffer(buf.samples().row(c), buf.sample_rate());
}

AudioBuffer rotate_channels(const AudioBuffer& buf, Index first) {
  const Index c = buf.channels();
  if (first < 0 || first >= c) {
    throw std::out_of_range("rotate_channels: channel " + std::to_string(first) +
                            " out of range for " + std::to_string(c) + "-channel buffer");
  }
  Tensor<double> out(c, buf.frames());
  for (Index i = 0; i < c; ++i) out.row(i) = buf.samples().row((i + first) % c);
  return AudioBuffer(std::move(out), buf.sample_rate());
}

void require_rate(const AudioBuffer& buf, int rate_hz, const char* who) {
  if (buf.sample_rate() != rate_hz) {
    throw std::invalid_argument(std::string(who) + ": expected " + std::to_string(rate_hz) +
                                " Hz input, got " + std::to_string(buf.sample_rate()) + " Hz");
  }
}

}  // namespace percept
