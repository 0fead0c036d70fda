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

#include <cmath>

#include <gtest/gtest.h>

#include "percept/feature_encoder.hpp"
#include "percept/json_util.hpp"
#include "percept/losses.hpp"
#include "test_util.hpp"

namespace percept {
namespace {

using testing::random_vec;
using testing::TempDir;

EncoderConfig small_encoder() {
  EncoderConfig cfg;
  cfg.layers = {{6, 5, 3}, {6, 3, 2}, {5, 2, 2}};
  return cfg;
}

// floor((N - k) / s) + 1 chained through the layers.
Index chained_frames(const EncoderConfig& cfg, Index n) {
  for (const auto& l : cfg.layers) {
    if (n < l.kernel) return 0;
    n = (n - l.kernel) / l.stride + 1;
  }
  return n;
}

TEST(EncoderConfig, WavlmBaseGeometry) {
  const EncoderConfig cfg = EncoderConfig::wavlm_base();
  ASSERT_EQ(cfg.layers.size(), 7u);
  EXPECT_EQ(cfg.feature_dim(), 512);
  EXPECT_EQ(cfg.receptive_field(), 400);
  EXPECT_EQ(cfg.hop(), 320);
  EXPECT_EQ(cfg.frames(16000), 49);
  for (Index n : {399, 400, 719, 720, 16000, 22050, 48000}) {
    EXPECT_EQ(cfg.frames(n), chained_frames(cfg, n)) << n;
  }
}

TEST(EncoderConfig, JsonRoundTripAndStrictness) {
  const EncoderConfig cfg = small_encoder();
  EXPECT_EQ(encoder_config_from_json(to_json(cfg)), cfg);
  nlohmann::json j = to_json(cfg);
  j["extra"] = 1;
  EXPECT_THROW(encoder_config_from_json(j), ConfigError);
  EXPECT_THROW(encoder_config_from_json({{"activation", "relu"}}), ConfigError);
  EXPECT_THROW(encoder_config_from_json({{"profile", "unknown"}}), ConfigError);
}

TEST(Encoder, DefaultProfileShape) {
  const auto enc = FeatureEncoder<float>::init_random(EncoderConfig::wavlm_base(), 1);
  const FeatureMap<float> f = enc.encode(random_vec(16000, 2, 0.1).cast<float>());
  EXPECT_EQ(f.dim(), 512);
  EXPECT_EQ(f.frames(), 49);
}

TEST(Encoder, ShorterThanReceptiveFieldThrows) {
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 1);
  EXPECT_THROW(enc.encode(random_vec(small_encoder().receptive_field() - 1, 3)), ShapeError);
}

TEST(Encoder, ShiftByOneHopShiftsOneFrame) {
  const auto enc = FeatureEncoder<double>::init_random(EncoderConfig::wavlm_base(), 3);
  const Index hop = 320;
  // A burst surrounded by silence keeps the per-channel statistics of the
  // first-layer group norm unchanged under the shift.
  Vec<double> x = Vec<double>::Zero(16000);
  x.segment(3000, 8000) = random_vec(8000, 4, 0.1);
  Vec<double> shifted = Vec<double>::Zero(16000);
  shifted.segment(hop, 16000 - hop) = x.head(16000 - hop);
  const Tensor<double> a = enc.encode(x).values;
  const Tensor<double> b = enc.encode(shifted).values;
  double worst = 0.0;
  for (Index t = 2; t + 3 < a.cols(); ++t) {
    worst = std::max(worst, (b.col(t + 1) - a.col(t)).cwiseAbs().maxCoeff());
  }
  EXPECT_LT(worst, 1e-5);
}

TEST(Encoder, SaveLoadPreservesOutputs) {
  TempDir dir;
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 5);
  enc.save(dir / "e.sewf");
  const auto back = FeatureEncoder<double>::load(dir / "e.sewf");
  EXPECT_EQ(back.config(), enc.config());
  const Vec<double> x = random_vec(200, 6);
  EXPECT_EQ(back.encode(x).values, enc.encode(x).values);
  EXPECT_THROW(FeatureEncoder<float>::load(dir / "e.sewf"), std::exception);
}

TEST(Encoder, SeedsAreReproducible) {
  const auto a = FeatureEncoder<double>::init_random(small_encoder(), 9);
  const auto b = FeatureEncoder<double>::init_random(small_encoder(), 9);
  const auto c = FeatureEncoder<double>::init_random(small_encoder(), 10);
  EXPECT_EQ(a.parameters()[0].value, b.parameters()[0].value);
  EXPECT_NE(a.parameters()[0].value, c.parameters()[0].value);
}

TEST(LossSnr, ClosedFormValues) {
  const Vec<double> s = random_vec(1000, 10);
  EXPECT_NEAR(loss_snr(s, s).value, -30.0, 1e-9);
  EXPECT_NEAR(loss_snr<double>(s, Vec<double>::Zero(1000)).value, 10.0 * std::log10(1.001), 1e-9);
  // Scaling both signals leaves the loss unchanged.
  const Vec<double> e = s + random_vec(1000, 11, 0.3);
  EXPECT_NEAR(loss_snr<double>(3.0 * s, 3.0 * e).value, loss_snr(s, e).value, 1e-12);
}

TEST(LossSnr, MatchesDirectFormula) {
  const Vec<double> s = random_vec(300, 12);
  const Vec<double> e = s + random_vec(300, 13, 0.5);
  double ss = 0.0, ee = 0.0;
  for (Index i = 0; i < s.size(); ++i) {
    ss += s(i) * s(i);
    ee += (s(i) - e(i)) * (s(i) - e(i));
  }
  EXPECT_NEAR(loss_snr(s, e).value, -10.0 * std::log10(ss / (ee + 1e-3 * ss)), 1e-12);
  SnrLossParams p{20.0};
  EXPECT_NEAR(loss_snr(s, e, p).value, -10.0 * std::log10(ss / (ee + 1e-2 * ss)), 1e-12);
}

TEST(LossSnr, GradientMatchesCentralDifference) {
  const Vec<double> s = random_vec(40, 14);
  const Vec<double> e = s + random_vec(40, 15, 0.4);
  const Vec<double> g = loss_snr(s, e).grad;
  const double h = 1e-6;
  for (Index i = 0; i < e.size(); ++i) {
    Vec<double> p = e, m = e;
    p(i) += h;
    m(i) -= h;
    const double fd = (loss_snr(s, p, {}, false).value - loss_snr(s, m, {}, false).value) / (2 * h);
    EXPECT_NEAR(g(i), fd, 1e-6 * std::max(1.0, std::abs(fd)));
  }
}

TEST(LossSnr, InvalidInputs) {
  EXPECT_THROW(loss_snr<double>(random_vec(5, 1), random_vec(6, 2)), LossError);
  EXPECT_THROW(loss_snr<double>(Vec<double>::Zero(5), random_vec(5, 2)), LossError);
}

TEST(LossWlm, IdenticalSignalsGiveExactlyZero) {
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 16);
  const Vec<double> s = random_vec(300, 17);
  const auto r = loss_wlm(s, s, 16000, enc);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.grad.cwiseAbs().maxCoeff(), 0.0);
}

TEST(LossWlm, MatchesMeanSquaredFeatureDistance) {
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 18);
  const Vec<double> s = random_vec(300, 19);
  const Vec<double> e = random_vec(300, 20);
  const Tensor<double> a = enc.encode(s).values;
  const Tensor<double> b = enc.encode(e).values;
  double acc = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index t = 0; t < a.cols(); ++t) acc += (a(i, t) - b(i, t)) * (a(i, t) - b(i, t));
  EXPECT_NEAR(loss_wlm(s, e, 16000, enc).value, acc / static_cast<double>(a.size()), 1e-12);
}

TEST(LossWlm, ResamplesWhenRatesDiffer) {
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 21);
  const Vec<double> s = random_vec(200, 22);
  const Vec<double> e = random_vec(200, 23);
  const Resampler r(8000, 16000);
  const double direct = loss_wlm<double>(r.apply(s), r.apply(e), 16000, enc).value;
  EXPECT_NEAR(loss_wlm(s, e, 8000, enc).value, direct, 1e-12);
}

TEST(LossJoint, IsUnweightedSum) {
  const auto enc = FeatureEncoder<double>::init_random(small_encoder(), 24);
  const Vec<double> s = random_vec(300, 25);
  const Vec<double> e = s + random_vec(300, 26, 0.5);
  const auto j = loss_joint(s, e, 16000, SnrLossParams{}, enc);
  const auto a = loss_snr(s, e);
  const auto b = loss_wlm(s, e, 16000, enc);
  EXPECT_DOUBLE_EQ(j.value, a.value + b.value);
  EXPECT_DOUBLE_EQ(j.snr_part, a.value);
  EXPECT_DOUBLE_EQ(j.wlm_part, b.value);
  EXPECT_LT((j.grad - a.grad - b.grad).cwiseAbs().maxCoeff(), 1e-15);
}

}  // namespace
}  // namespace percept
