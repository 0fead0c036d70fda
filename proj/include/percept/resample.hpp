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

#include <vector>

#include "percept/audio.hpp"

namespace percept {

/// Kaiser-windowed sinc polyphase resampler between two fixed rates.
///
/// The filter has 64 zero crossings on each side of the centre tap, measured
/// at the lower of the two rates, and a Kaiser window with beta = 8.6. Each
/// phase is normalized to unit DC gain. The map is linear, so apply_adjoint
/// is its exact transpose and can back-propagate through a resampling step.
class Resampler {
 public:
  static constexpr int kZeroCrossings = 64;
  static constexpr double kKaiserBeta = 8.6;

  Resampler(int source_hz, int target_hz);

  int source_rate() const { return source_hz_; }
  int target_rate() const { return target_hz_; }
  bool is_identity() const { return source_hz_ == target_hz_; }

  /// round(n · target / source).
  Index output_length(Index n) const;

  template <typename Scalar>
  Vec<Scalar> apply(const Vec<Scalar>& x) const;

  /// Transpose of apply for an input of length n_in.
  template <typename Scalar>
  Vec<Scalar> apply_adjoint(const Vec<Scalar>& grad_out, Index n_in) const;

 private:
  double tap(double offset) const;
  const double* phase_taps(Index phase, std::vector<double>& scratch) const;

  int source_hz_;
  int target_hz_;
  Index up_ = 1;
  Index down_ = 1;
  double cutoff_ = 1.0;
  double half_width_ = 0.0;
  Index taps_per_side_ = 0;
  std::vector<double> table_;  // up_ phases × 2·taps_per_side_, empty if computed on the fly
};

/// Resamples every channel. Identical rates return a copy of the input.
AudioBuffer resample(const AudioBuffer& buf, int target_hz);

}  // namespace percept
