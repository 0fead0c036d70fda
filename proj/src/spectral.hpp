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

// Internal FFT helpers on top of Eigen's FFT module.

#pragma once

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "percept/tensor.hpp"

namespace percept::detail {

inline Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

/// Symmetric Hann window of length n without the zero end points
/// (the interior of an (n+2)-point Hann window).
inline std::vector<double> hann_interior(Index n) {
  std::vector<double> w(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i + 1) / static_cast<double>(n + 1));
  }
  return w;
}

class RealFft {
 public:
  explicit RealFft(Index size) : size_(size), in_(static_cast<std::size_t>(size)) {}

  Index size() const { return size_; }

  /// Magnitude of bins 0..size/2 of the zero-padded frame.
  void magnitude(const double* frame, Index len, const std::vector<double>& window,
                 std::vector<double>& out) {
    std::fill(in_.begin(), in_.end(), 0.0);
    for (Index i = 0; i < len; ++i) in_[i] = frame[i] * window[i];
    fft_.fwd(spec_, in_);
    out.resize(static_cast<std::size_t>(size_ / 2 + 1));
    for (Index k = 0; k <= size_ / 2; ++k) out[k] = std::abs(spec_[k]);
  }

 private:
  Index size_;
  std::vector<double> in_;
  std::vector<std::complex<double>> spec_;
  Eigen::FFT<double> fft_;
};

/// Linear convolution y = a * b truncated to `out_len` samples, via FFT.
inline std::vector<double> fft_convolve(const std::vector<double>& a, const std::vector<double>& b,
                                        Index out_len) {
  const Index full = static_cast<Index>(a.size() + b.size()) - 1;
  const Index n = next_pow2(std::max<Index>(full, 1));
  std::vector<double> pa(static_cast<std::size_t>(n), 0.0), pb(static_cast<std::size_t>(n), 0.0);
  std::copy(a.begin(), a.end(), pa.begin());
  std::copy(b.begin(), b.end(), pb.begin());
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> fa, fb;
  fft.fwd(fa, pa);
  fft.fwd(fb, pb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  std::vector<double> y;
  fft.inv(y, fa);
  y.resize(static_cast<std::size_t>(out_len), 0.0);
  for (Index i = full; i < out_len; ++i) y[i] = 0.0;
  return y;
}

}  // namespace percept::detail
