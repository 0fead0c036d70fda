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

#include "percept/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "percept/resample.hpp"
#include "spectral.hpp"

namespace percept {

namespace {

void require_same_length(const Vec<double>& a, const Vec<double>& b, const char* who) {
  if (a.size() != b.size()) {
    throw MetricError(std::string(who) + ": length mismatch (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
  }
}

// STOI constants.
constexpr int kStoiRate = 10000;
constexpr Index kStoiFrame = 256;
constexpr Index kStoiHop = 128;
constexpr Index kStoiFft = 512;
constexpr Index kStoiBands = 15;
constexpr double kStoiMinFreq = 150.0;
constexpr Index kStoiSegment = 30;
constexpr double kStoiBetaDb = -15.0;
constexpr double kStoiDynRangeDb = 40.0;
constexpr double kEps = std::numeric_limits<double>::epsilon();

// Rows are one-third-octave bands, columns FFT bins 0..fft/2.
Tensor<double> third_octave_matrix() {
  const Index bins = kStoiFft / 2 + 1;
  Tensor<double> obm = Tensor<double>::Zero(kStoiBands, bins);
  auto nearest_bin = [&](double freq) {
    Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * kStoiRate / kStoiFft;
      const double d = (f - freq) * (f - freq);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };
  for (Index b = 0; b < kStoiBands; ++b) {
    const double lo = kStoiMinFreq * std::pow(2.0, (2.0 * b - 1.0) / 6.0);
    const double hi = kStoiMinFreq * std::pow(2.0, (2.0 * b + 1.0) / 6.0);
    const Index lo_bin = nearest_bin(lo);
    const Index hi_bin = nearest_bin(hi);
    for (Index k = lo_bin; k < hi_bin; ++k) obm(b, k) = 1.0;
  }
  return obm;
}

// Drops frames more than 40 dB below the loudest reference frame and
// overlap-adds the remaining windowed frames back into two signals.
void remove_silent_frames(const Vec<double>& x, const Vec<double>& y, std::vector<double>& x_out,
                          std::vector<double>& y_out) {
  const std::vector<double> w = detail::hann_interior(kStoiFrame);
  std::vector<Index> starts;
  for (Index i = 0; i < x.size() - kStoiFrame; i += kStoiHop) starts.push_back(i);
  std::vector<double> energy(starts.size());
  double max_energy = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < starts.size(); ++f) {
    double sq = 0.0;
    for (Index j = 0; j < kStoiFrame; ++j) {
      const double v = w[j] * x(starts[f] + j);
      sq += v * v;
    }
    energy[f] = 20.0 * std::log10(std::sqrt(sq) + kEps);
    max_energy = std::max(max_energy, energy[f]);
  }
  std::vector<Index> kept;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    if (max_energy - kStoiDynRangeDb - energy[f] < 0.0) kept.push_back(starts[f]);
  }
  const std::size_t len = kept.empty() ? 0 : (kept.size() - 1) * kStoiHop + kStoiFrame;
  x_out.assign(len, 0.0);
  y_out.assign(len, 0.0);
  for (std::size_t f = 0; f < kept.size(); ++f) {
    for (Index j = 0; j < kStoiFrame; ++j) {
      x_out[f * kStoiHop + j] += w[j] * x(kept[f] + j);
      y_out[f * kStoiHop + j] += w[j] * y(kept[f] + j);
    }
  }
}

// Band envelopes: bands × frames.
Tensor<double> third_octave_envelopes(const std::vector<double>& sig, const Tensor<double>& obm) {
  const std::vector<double> w = detail::hann_interior(kStoiFrame);
  const Index len = static_cast<Index>(sig.size());
  std::vector<Index> starts;
  for (Index i = 0; i < len - kStoiFrame; i += kStoiHop) starts.push_back(i);
  Tensor<double> power(kStoiFft / 2 + 1, static_cast<Index>(starts.size()));
  detail::RealFft fft(kStoiFft);
  std::vector<double> mag;
  for (std::size_t f = 0; f < starts.size(); ++f) {
    fft.magnitude(sig.data() + starts[f], kStoiFrame, w, mag);
    for (Index k = 0; k < power.rows(); ++k) power(k, f) = mag[k] * mag[k];
  }
  return (obm * power).cwiseSqrt();
}

}  // namespace

double si_snr(const Vec<double>& s, const Vec<double>& s_hat) {
  require_same_length(s, s_hat, "si_snr");
  if (s.size() == 0) throw MetricError("si_snr: empty signals");
  const Vec<double> ref = s.array() - s.mean();
  const Vec<double> est = s_hat.array() - s_hat.mean();
  const double ref_energy = ref.squaredNorm();
  if (!(ref_energy > 0.0) || !(est.squaredNorm() > 0.0)) {
    throw MetricError("si_snr: zero-energy input");
  }
  const Vec<double> target = (est.dot(ref) / ref_energy) * ref;
  const double err_energy = (est - target).squaredNorm();
  const double target_energy = target.squaredNorm();
  if (err_energy <= 0.0) return kSiSnrCapDb;
  return std::min(kSiSnrCapDb, 10.0 * std::log10(target_energy / err_energy));
}

double stoi(const Vec<double>& s, const Vec<double>& s_hat, int sample_rate_hz) {
  require_same_length(s, s_hat, "stoi");
  Vec<double> x = s, y = s_hat;
  if (sample_rate_hz != kStoiRate) {
    const Resampler r(sample_rate_hz, kStoiRate);
    x = r.apply(s);
    y = r.apply(s_hat);
  }
  if (x.size() <= kStoiFrame) throw MetricError("stoi: signal too short");

  std::vector<double> xs, ys;
  remove_silent_frames(x, y, xs, ys);
  static const Tensor<double> obm = third_octave_matrix();
  const Tensor<double> x_env = third_octave_envelopes(xs, obm);
  const Tensor<double> y_env = third_octave_envelopes(ys, obm);
  const Index frames = x_env.cols();
  if (frames < kStoiSegment) {
    throw MetricError("stoi: only " + std::to_string(frames) +
                      " frames after silence removal, need at least " +
                      std::to_string(kStoiSegment));
  }

  const double clip = std::pow(10.0, -kStoiBetaDb / 20.0);
  double total = 0.0;
  Index count = 0;
  Eigen::RowVectorXd xv(kStoiSegment), yv(kStoiSegment);
  for (Index m = kStoiSegment; m <= frames; ++m) {
    for (Index b = 0; b < kStoiBands; ++b) {
      xv = x_env.row(b).segment(m - kStoiSegment, kStoiSegment);
      yv = y_env.row(b).segment(m - kStoiSegment, kStoiSegment);
      const double scale = xv.norm() / (yv.norm() + kEps);
      yv = (yv * scale).cwiseMin(xv * (1.0 + clip));
      yv.array() -= yv.mean();
      xv.array() -= xv.mean();
      yv /= (yv.norm() + kEps);
      xv /= (xv.norm() + kEps);
      total += xv.dot(yv);
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

double fw_seg_snr(const Vec<double>& s, const Vec<double>& s_hat, int sample_rate_hz) {
  require_same_length(s, s_hat, "fw_seg_snr");
  if (sample_rate_hz <= 0) throw MetricError("fw_seg_snr: invalid sample rate");
  const Index frame = std::lround(0.025 * sample_rate_hz);
  const Index hop = std::lround(0.010 * sample_rate_hz);
  if (frame < 2 || s.size() < frame) throw MetricError("fw_seg_snr: signal shorter than one frame");
  const Index nfft = detail::next_pow2(frame);
  const Index bins = nfft / 2 + 1;

  constexpr Index kBands = 23;
  constexpr double kGamma = 0.2;
  auto hz_to_mel = [](double f) { return 2595.0 * std::log10(1.0 + f / 700.0); };
  auto mel_to_hz = [](double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); };
  const double mel_lo = hz_to_mel(50.0);
  const double mel_hi = hz_to_mel(0.4 * sample_rate_hz);
  std::vector<double> edges(kBands + 2);
  for (Index i = 0; i < kBands + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / (kBands + 1));
  }
  Tensor<double> bank = Tensor<double>::Zero(kBands, bins);
  for (Index b = 0; b < kBands; ++b) {
    for (Index k = 0; k < bins; ++k) {
      const double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(nfft);
      if (f > edges[b] && f < edges[b + 1]) {
        bank(b, k) = (f - edges[b]) / (edges[b + 1] - edges[b]);
      } else if (f >= edges[b + 1] && f < edges[b + 2]) {
        bank(b, k) = (edges[b + 2] - f) / (edges[b + 2] - edges[b + 1]);
      }
    }
  }

  std::vector<double> w(static_cast<std::size_t>(frame));
  for (Index i = 0; i < frame; ++i) {
    w[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(frame - 1));
  }
  detail::RealFft fft(nfft);
  std::vector<double> mag_ref, mag_est;
  Eigen::VectorXd spec_ref(bins), spec_est(bins);
  double total = 0.0;
  Index used = 0;
  for (Index start = 0; start + frame <= s.size(); start += hop) {
    fft.magnitude(s.data() + start, frame, w, mag_ref);
    fft.magnitude(s_hat.data() + start, frame, w, mag_est);
    for (Index k = 0; k < bins; ++k) {
      spec_ref(k) = mag_ref[k];
      spec_est(k) = mag_est[k];
    }
    const Eigen::VectorXd band_ref = bank * spec_ref;
    const Eigen::VectorXd band_est = bank * spec_est;
    double num = 0.0, den = 0.0;
    for (Index b = 0; b < kBands; ++b) {
      const double weight = std::pow(band_ref(b), kGamma);
      if (!(weight > 0.0)) continue;
      const double diff = band_ref(b) - band_est(b);
      const double sig = band_ref(b) * band_ref(b);
      // Beyond 120 dB the value only matters through the frame clamp.
      const double snr = diff * diff <= sig * 1e-12 ? 120.0 : 10.0 * std::log10(sig / (diff * diff));
      num += weight * snr;
      den += weight;
    }
    if (den <= 0.0) continue;
    total += std::clamp(num / den, kFwSegSnrFloorDb, kFwSegSnrCeilDb);
    ++used;
  }
  if (used == 0) throw MetricError("fw_seg_snr: reference is silent in every frame");
  return total / static_cast<double>(used);
}

double better_ear(double left, double right, Orientation orientation) {
  return orientation == Orientation::kHigherBetter ? std::max(left, right) : std::min(left, right);
}

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw MetricError("pearson: length mismatch");
  if (x.size() < 2) throw MetricError("pearson: need at least two samples");
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) throw MetricError("pearson: zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::kSiSnr:
      return "si_snr";
    case Metric::kStoi:
      return "stoi";
    case Metric::kFwSegSnr:
      return "fw_seg_snr";
  }
  return "unknown";
}

Metric metric_from_name(std::string_view name) {
  for (Metric m : {Metric::kSiSnr, Metric::kStoi, Metric::kFwSegSnr}) {
    if (metric_name(m) == name) return m;
  }
  throw MetricError("unknown metric \"" + std::string(name) + "\"");
}

double compute_metric(Metric m, const Vec<double>& s, const Vec<double>& s_hat, int rate_hz) {
  switch (m) {
    case Metric::kSiSnr:
      return si_snr(s, s_hat);
    case Metric::kStoi:
      return stoi(s, s_hat, rate_hz);
    case Metric::kFwSegSnr:
      return fw_seg_snr(s, s_hat, rate_hz);
  }
  throw MetricError("unknown metric");
}

double delta_metric(Metric m, const Vec<double>& s, const Vec<double>& s_hat,
                    const Vec<double>& x_ref, int rate_hz) {
  return compute_metric(m, s, s_hat, rate_hz) - compute_metric(m, s, x_ref, rate_hz);
}

std::vector<std::string> MetricReport::columns() const {
  std::set<std::string> names;
  for (const Row& r : rows) {
    for (const auto& [k, v] : r.values) names.insert(k);
  }
  return {names.begin(), names.end()};
}

std::map<std::string, double> MetricReport::means() const {
  std::map<std::string, std::pair<double, Index>> acc;
  for (const Row& r : rows) {
    for (const auto& [k, v] : r.values) {
      if (!std::isfinite(v)) continue;
      auto& a = acc[k];
      a.first += v;
      ++a.second;
      auto& s = acc[r.split + "/" + k];
      s.first += v;
      ++s.second;
    }
  }
  std::map<std::string, double> out;
  for (const auto& [k, a] : acc) out[k] = a.first / static_cast<double>(a.second);
  return out;
}

nlohmann::json MetricReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const Row& r : rows) {
    nlohmann::json row = {{"sample_id", r.sample_id}, {"split", r.split}};
    for (const auto& [k, v] : r.values) row[k] = v;
    j["rows"].push_back(row);
  }
  j["means"] = means();
  j["count"] = rows.size();
  return j;
}

std::string MetricReport::to_csv() const {
  const std::vector<std::string> cols = columns();
  std::ostringstream os;
  os.precision(17);
  os << "sample_id,split";
  for (const auto& c : cols) os << ',' << c;
  os << '\n';
  for (const Row& r : rows) {
    os << r.sample_id << ',' << r.split;
    for (const auto& c : cols) {
      os << ',';
      const auto it = r.values.find(c);
      if (it != r.values.end()) os << it->second;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace percept
