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

/// \file
/// Training objectives over a reference s and an estimate ŝ (both mono):
///
///   snr   -10 log10(|s|^2 / (|s - ŝ|^2 + tau |s|^2)),  tau = 10^(-snr_max/10)
///   wlm   mean over (t, f) of (W(s)[t,f] - W(ŝ)[t,f])^2 for a frozen encoder W
///   joint snr + wlm
///
/// Each returns the value and the gradient with respect to ŝ.

#pragma once

#include <cmath>
#include <concepts>
#include <limits>
#include <numbers>
#include <optional>
#include <string>

#include "percept/feature_encoder.hpp"
#include "percept/resample.hpp"

namespace percept {

template <typename Scalar>
struct LossResult {
  double value = 0.0;
  Vec<Scalar> grad;  // empty when the gradient was not requested
  double snr_part = std::numeric_limits<double>::quiet_NaN();
  double wlm_part = std::numeric_limits<double>::quiet_NaN();
};

struct SnrLossParams {
  double snr_max_db = 30.0;
  double tau() const { return std::pow(10.0, -snr_max_db / 10.0); }
};

/// Weights of the two terms of the joint loss. The default (1, 1) is the plain sum.
struct JointWeights {
  double snr = 1.0;
  double wlm = 1.0;
};

class LossError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Anything that maps a signal to an F × T representation and can pull a
/// gradient on that representation back to the signal.
template <typename E, typename Scalar>
concept SignalEncoder = requires(const E& e, const Vec<Scalar>& x, typename E::Trace* trace,
                                 const typename E::Trace& t, const Tensor<Scalar>& g) {
  { e.input_rate() } -> std::convertible_to<int>;
  { e.encode(x, trace).values } -> std::convertible_to<Tensor<Scalar>>;
  { e.encode_grad(t, g) } -> std::convertible_to<Vec<Scalar>>;
};

template <typename Scalar>
LossResult<Scalar> loss_snr(const Vec<Scalar>& s, const Vec<Scalar>& s_hat,
                            const SnrLossParams& params = {}, bool want_grad = true) {
  if (s.size() != s_hat.size()) {
    throw LossError("loss_snr: length mismatch (" + std::to_string(s.size()) + " vs " +
                    std::to_string(s_hat.size()) + ")");
  }
  if (s.size() < 1) throw LossError("loss_snr: empty signals");
  const Vec<double> ref = s.template cast<double>();
  const Vec<double> err = ref - s_hat.template cast<double>();
  const double signal_energy = ref.squaredNorm();
  if (!(signal_energy > 0.0)) throw LossError("loss_snr: reference signal has zero energy");
  const double denom = err.squaredNorm() + params.tau() * signal_energy;

  LossResult<Scalar> r;
  r.value = -10.0 * std::log10(signal_energy / denom);
  r.snr_part = r.value;
  if (want_grad) {
    const double k = 20.0 / std::numbers::ln10 / denom;
    r.grad = (-k * err).template cast<Scalar>();
  }
  return r;
}

/// Encoder-distance loss. Signals at `signal_rate_hz` are resampled to the
/// encoder rate first; the gradient goes back through the resampler's
/// adjoint. The reference representation is treated as a constant.
template <typename Scalar, SignalEncoder<Scalar> Encoder>
LossResult<Scalar> loss_wlm(const Vec<Scalar>& s, const Vec<Scalar>& s_hat, int signal_rate_hz,
                            const Encoder& encoder, bool want_grad = true,
                            const Resampler* resampler = nullptr) {
  if (s.size() != s_hat.size()) {
    throw LossError("loss_wlm: length mismatch (" + std::to_string(s.size()) + " vs " +
                    std::to_string(s_hat.size()) + ")");
  }
  std::optional<Resampler> own;
  if (signal_rate_hz != encoder.input_rate()) {
    if (!resampler || resampler->source_rate() != signal_rate_hz ||
        resampler->target_rate() != encoder.input_rate()) {
      own.emplace(signal_rate_hz, encoder.input_rate());
      resampler = &*own;
    }
  } else {
    resampler = nullptr;
  }
  const Vec<Scalar> ref = resampler ? resampler->apply(s) : s;
  const Vec<Scalar> est = resampler ? resampler->apply(s_hat) : s_hat;

  typename Encoder::Trace trace;
  const Tensor<Scalar> ref_feat = encoder.encode(ref, nullptr).values;
  const Tensor<Scalar> est_feat = encoder.encode(est, want_grad ? &trace : nullptr).values;
  const Tensor<double> diff = est_feat.template cast<double>() - ref_feat.template cast<double>();
  const double count = static_cast<double>(diff.size());

  LossResult<Scalar> r;
  r.value = diff.squaredNorm() / count;
  r.wlm_part = r.value;
  if (want_grad) {
    const Tensor<Scalar> upstream = ((2.0 / count) * diff).template cast<Scalar>();
    Vec<Scalar> g = encoder.encode_grad(trace, upstream);
    r.grad = resampler ? resampler->apply_adjoint(g, s_hat.size()) : std::move(g);
  }
  return r;
}

template <typename Scalar, SignalEncoder<Scalar> Encoder>
LossResult<Scalar> loss_joint(const Vec<Scalar>& s, const Vec<Scalar>& s_hat, int signal_rate_hz,
                              const SnrLossParams& params, const Encoder& encoder,
                              const JointWeights& weights = {}, bool want_grad = true,
                              const Resampler* resampler = nullptr) {
  const LossResult<Scalar> snr = loss_snr(s, s_hat, params, want_grad);
  const LossResult<Scalar> wlm =
      loss_wlm(s, s_hat, signal_rate_hz, encoder, want_grad, resampler);
  LossResult<Scalar> r;
  r.value = weights.snr * snr.value + weights.wlm * wlm.value;
  r.snr_part = snr.value;
  r.wlm_part = wlm.value;
  if (want_grad) {
    if (weights.snr == 1.0 && weights.wlm == 1.0) {
      r.grad = snr.grad + wlm.grad;
    } else {
      r.grad = Scalar(weights.snr) * snr.grad + Scalar(weights.wlm) * wlm.grad;
    }
  }
  return r;
}

}  // namespace percept
