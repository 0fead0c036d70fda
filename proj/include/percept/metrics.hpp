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
/// Evaluation-only scores. None of these are differentiable; they operate on
/// double-precision mono signals.

#pragma once

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/tensor.hpp"

namespace percept {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr double kSiSnrCapDb = 60.0;

/// Scale-invariant SNR in dB after removing the mean of both signals.
/// Capped at +60 dB when the residual vanishes.
double si_snr(const Vec<double>& s, const Vec<double>& s_hat);

/// Short-time objective intelligibility (Taal et al. 2011): 10 kHz,
/// 256-sample Hann frames with 50% overlap, 512-point spectra, 40 dB
/// silent-frame removal, 15 one-third-octave bands from 150 Hz, 30-frame
/// segments and a -15 dB SDR clipping bound.
double stoi(const Vec<double>& s, const Vec<double>& s_hat, int sample_rate_hz);

inline constexpr double kFwSegSnrFloorDb = -10.0;
inline constexpr double kFwSegSnrCeilDb = 35.0;

/// Frequency-weighted segmental SNR: 25 ms Hann frames every 10 ms, 23
/// triangular mel bands between 50 Hz and 0.4·rate on magnitude spectra,
/// band SNR 10 log10(S_b^2 / (S_b - Ŝ_b)^2) weighted by S_b^0.2, each frame
/// clamped to [-10, 35] dB, averaged over frames whose reference is not
/// silent.
double fw_seg_snr(const Vec<double>& s, const Vec<double>& s_hat, int sample_rate_hz);

enum class Orientation { kHigherBetter, kLowerBetter };

/// The more favourable of the left and right ear scores.
double better_ear(double left, double right, Orientation orientation);

/// Sample Pearson correlation; throws MetricError for n < 2 or zero variance.
double pearson(std::span<const double> x, std::span<const double> y);

enum class Metric { kSiSnr, kStoi, kFwSegSnr };

std::string_view metric_name(Metric m);
Metric metric_from_name(std::string_view name);

double compute_metric(Metric m, const Vec<double>& s, const Vec<double>& s_hat, int rate_hz);

/// metric(s, ŝ) - metric(s, x_ref), where x_ref is the unprocessed reference channel.
double delta_metric(Metric m, const Vec<double>& s, const Vec<double>& s_hat,
                    const Vec<double>& x_ref, int rate_hz);

/// Per-sample scores plus aggregate means.
struct MetricReport {
  struct Row {
    std::string sample_id;
    std::string split;
    std::map<std::string, double> values;
  };

  std::vector<Row> rows;

  std::vector<std::string> columns() const;
  /// Mean of each column over the rows where it is finite, and per split as
  /// "<split>/<column>".
  std::map<std::string, double> means() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;
};

}  // namespace percept
