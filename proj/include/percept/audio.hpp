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

#include <filesystem>
#include <vector>

#include "percept/tensor.hpp"

namespace percept {

/// Multi-channel sampled signal: a C × N array of finite samples plus the
/// sample rate.
class AudioBuffer {
 public:
  AudioBuffer() = default;
  AudioBuffer(Tensor<double> samples, int sample_rate_hz);

  template <typename Derived>
  static AudioBuffer mono(const Eigen::MatrixBase<Derived>& signal, int sample_rate_hz) {
    Tensor<double> s(1, signal.size());
    for (Index i = 0; i < signal.size(); ++i) s(0, i) = static_cast<double>(signal(i));
    return AudioBuffer(std::move(s), sample_rate_hz);
  }

  Index channels() const { return samples_.rows(); }
  Index frames() const { return samples_.cols(); }
  int sample_rate() const { return sample_rate_hz_; }
  const Tensor<double>& samples() const { return samples_; }

  /// Channel c as a column vector converted to Scalar.
  template <typename Scalar = double>
  Vec<Scalar> channel(Index c) const {
    return samples_.row(c).transpose().template cast<Scalar>();
  }

  double duration_seconds() const {
    return sample_rate_hz_ > 0 ? static_cast<double>(frames()) / sample_rate_hz_ : 0.0;
  }

 private:
  Tensor<double> samples_;
  int sample_rate_hz_ = 0;
};

/// Copy of a single channel; throws std::out_of_range for a bad index.
AudioBuffer select_channel(const AudioBuffer& buf, Index c);

/// Cyclic channel rotation that puts channel `first` at index 0.
AudioBuffer rotate_channels(const AudioBuffer& buf, Index first);

/// Throws std::invalid_argument unless the buffer is at `rate_hz`.
void require_rate(const AudioBuffer& buf, int rate_hz, const char* who);

}  // namespace percept
