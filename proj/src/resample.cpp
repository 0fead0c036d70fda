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

#include "percept/resample.hpp"

#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace percept {

namespace {

// Beyond this many phases the taps are evaluated per output sample.
constexpr Index kMaxTablePhases = 4096;

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

}  // namespace

Resampler::Resampler(int source_hz, int target_hz) : source_hz_(source_hz), target_hz_(target_hz) {
  if (source_hz <= 0 || target_hz <= 0) {
    throw std::invalid_argument("resample: rates must be positive (" + std::to_string(source_hz) +
                                " -> " + std::to_string(target_hz) + ")");
  }
  const int g = std::gcd(source_hz, target_hz);
  up_ = target_hz / g;
  down_ = source_hz / g;
  cutoff_ = std::min(1.0, static_cast<double>(target_hz) / source_hz);
  half_width_ = kZeroCrossings / cutoff_;
  taps_per_side_ = static_cast<Index>(std::ceil(half_width_));
  if (!is_identity() && up_ <= kMaxTablePhases) {
    const Index width = 2 * taps_per_side_;
    std::vector<double> table(static_cast<std::size_t>(up_ * width));
    std::vector<double> scratch;
    for (Index phase = 0; phase < up_; ++phase) {
      const double* taps = phase_taps(phase, scratch);
      std::copy(taps, taps + width, table.begin() + phase * width);
    }
    table_ = std::move(table);
  }
}

double Resampler::tap(double offset) const {
  const double r = offset / half_width_;
  if (std::abs(r) >= 1.0) return 0.0;
  const double window = std::cyl_bessel_i(0.0, kKaiserBeta * std::sqrt(1.0 - r * r)) /
                        std::cyl_bessel_i(0.0, kKaiserBeta);
  return cutoff_ * sinc(cutoff_ * offset) * window;
}

const double* Resampler::phase_taps(Index phase, std::vector<double>& scratch) const {
  const Index width = 2 * taps_per_side_;
  if (!table_.empty()) return table_.data() + phase * width;
  scratch.resize(static_cast<std::size_t>(width));
  const double frac = static_cast<double>(phase) / static_cast<double>(up_);
  double sum = 0.0;
  for (Index j = 0; j < width; ++j) {
    // Input sample i - K + 1 + j sits at distance frac + K - 1 - j from the output.
    scratch[j] = tap(frac + static_cast<double>(taps_per_side_ - 1 - j));
    sum += scratch[j];
  }
  for (double& v : scratch) v /= sum;
  return scratch.data();
}

Index Resampler::output_length(Index n) const {
  if (is_identity()) return n;
  return (2 * n * target_hz_ + source_hz_) / (2 * static_cast<Index>(source_hz_));
}

template <typename Scalar>
Vec<Scalar> Resampler::apply(const Vec<Scalar>& x) const {
  if (is_identity()) return x;
  const Index n = x.size();
  const Index m_out = output_length(n);
  const Index width = 2 * taps_per_side_;
  Vec<Scalar> y(m_out);
  std::vector<double> scratch;
  for (Index m = 0; m < m_out; ++m) {
    const Index pos = m * down_;
    const Index i = pos / up_;
    const double* taps = phase_taps(pos % up_, scratch);
    const Index first = i - taps_per_side_ + 1;
    const Index j0 = std::max<Index>(0, -first);
    const Index j1 = std::min<Index>(width, n - first);
    double acc = 0.0;
    for (Index j = j0; j < j1; ++j) acc += taps[j] * static_cast<double>(x(first + j));
    y(m) = static_cast<Scalar>(acc);
  }
  return y;
}

template <typename Scalar>
Vec<Scalar> Resampler::apply_adjoint(const Vec<Scalar>& grad_out, Index n_in) const {
  if (is_identity()) return grad_out;
  if (grad_out.size() != output_length(n_in)) {
    throw ShapeError("resample adjoint: gradient length " + std::to_string(grad_out.size()) +
                     " does not match output length " + std::to_string(output_length(n_in)));
  }
  const Index width = 2 * taps_per_side_;
  std::vector<double> acc(static_cast<std::size_t>(n_in), 0.0);
  std::vector<double> scratch;
  for (Index m = 0; m < grad_out.size(); ++m) {
    const Index pos = m * down_;
    const Index i = pos / up_;
    const double* taps = phase_taps(pos % up_, scratch);
    const Index first = i - taps_per_side_ + 1;
    const Index j0 = std::max<Index>(0, -first);
    const Index j1 = std::min<Index>(width, n_in - first);
    const double g = static_cast<double>(grad_out(m));
    for (Index j = j0; j < j1; ++j) acc[first + j] += taps[j] * g;
  }
  Vec<Scalar> out(n_in);
  for (Index k = 0; k < n_in; ++k) out(k) = static_cast<Scalar>(acc[k]);
  return out;
}

AudioBuffer resample(const AudioBuffer& buf, int target_hz) {
  Resampler r(buf.sample_rate(), target_hz);
  if (r.is_identity()) return buf;
  Tensor<double> out(buf.channels(), r.output_length(buf.frames()));
  for (Index c = 0; c < buf.channels(); ++c) {
    out.row(c) = r.apply<double>(buf.channel(c)).transpose();
  }
  return AudioBuffer(std::move(out), target_hz);
}

template Vec<float> Resampler::apply<float>(const Vec<float>&) const;
template Vec<double> Resampler::apply<double>(const Vec<double>&) const;
template Vec<float> Resampler::apply_adjoint<float>(const Vec<float>&, Index) const;
template Vec<double> Resampler::apply_adjoint<double>(const Vec<double>&, Index) const;

}  // namespace percept
