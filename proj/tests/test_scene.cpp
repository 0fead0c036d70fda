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
#include <complex>

#include <gtest/gtest.h>

#include "percept/json_util.hpp"
#include "percept/scene.hpp"
#include "percept/wav.hpp"
#include "test_util.hpp"

namespace percept {
namespace {

using testing::random_vec;
using testing::sine;
using testing::TempDir;

double rms(const Vec<double>& v) { return std::sqrt(v.squaredNorm() / static_cast<double>(v.size())); }

double dft_magnitude(const Vec<double>& x, double freq, int rate) {
  std::complex<double> acc = 0.0;
  for (Index i = 0; i < x.size(); ++i) acc += x(i) * std::polar(1.0, -2.0 * M_PI * freq * i / rate);
  return std::abs(acc);
}

TEST(Source, AllKindsAreNormalizedAndDeterministic) {
  for (auto kind : {SourceKind::kAmTones, SourceKind::kChirp, SourceKind::kFilteredNoise}) {
    const Vec<double> a = synth_source(kind, 1.0, 42).channel(0);
    const Vec<double> b = synth_source(kind, 1.0, 42).channel(0);
    const Vec<double> c = synth_source(kind, 1.0, 43).channel(0);
    EXPECT_EQ(a.size(), 16000);
    EXPECT_NEAR(rms(a), kSourceRms, 1e-12) << source_kind_name(kind);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
  }
}

TEST(Source, AmTonesHaveHarmonicsOfF0) {
  const std::uint64_t seed = 5;
  const double f0 = am_tones_f0(seed);
  EXPECT_GE(f0, 110.0);
  EXPECT_LE(f0, 220.0);
  const Vec<double> x = synth_source(SourceKind::kAmTones, 1.0, seed).channel(0);
  const double fundamental = dft_magnitude(x, f0, 16000);
  EXPECT_GT(fundamental, 10.0 * dft_magnitude(x, 1.5 * f0, 16000));
  EXPECT_GT(dft_magnitude(x, 2.0 * f0, 16000), 10.0 * dft_magnitude(x, 2.5 * f0, 16000));
}

TEST(Spatialize, IntegerDelayIsAnExactShift) {
  const Vec<double> x = random_vec(100, 1);
  const Tensor<double> y = spatialize(x, {0.0, 3.0}, {1.0, 0.5});
  EXPECT_EQ(y.row(0).transpose(), x);
  for (Index i = 0; i < 3; ++i) EXPECT_EQ(y(1, i), 0.0);
  for (Index i = 3; i < 100; ++i) EXPECT_EQ(y(1, i), 0.5 * x(i - 3));
}

TEST(Spatialize, FractionalDelayOfBandLimitedTone) {
  const int rate = 16000;
  const double f = 500.0, d = 2.37;
  const Vec<double> x = sine(2000, f, rate);
  const Tensor<double> y = spatialize(x, {d}, {1.0});
  double worst = 0.0;
  for (Index i = 100; i < 1900; ++i) {
    worst = std::max(worst, std::abs(y(0, i) - std::sin(2.0 * M_PI * f * (i - d) / rate)));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Spatialize, RejectsBadArguments) {
  const Vec<double> x = random_vec(10, 1);
  EXPECT_THROW(spatialize(x, {0.0, 1.0}, {1.0}), SceneError);
  EXPECT_THROW(spatialize(x, {-1.0}, {1.0}), SceneError);
}

TEST(Reverb, TailHasPredelayAndTargetEnergy) {
  RirParams rir;
  rir.seed = 3;
  const auto h = reverb_tail(rir, 16000, 0);
  const Index pre = std::lround(rir.predelay_s * 16000);
  for (Index i = 0; i < pre; ++i) EXPECT_EQ(h[i], 0.0);
  double e = 0.0;
  for (double v : h) e += v * v;
  EXPECT_NEAR(e, std::pow(10.0, -rir.drr_db / 10.0), 1e-12);
  EXPECT_NE(reverb_tail(rir, 16000, 1), h);
}

class SceneFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    write_wav(synth_source(SourceKind::kAmTones, 0.5, 1), dir_ / "t.wav");
    write_wav(synth_source(SourceKind::kFilteredNoise, 0.5, 2), dir_ / "i0.wav");
    write_wav(synth_source(SourceKind::kChirp, 0.6, 3), dir_ / "i1.wav");
    scene_.scene_id = "s0";
    scene_.mic_count = 4;
    scene_.target = {"t.wav", {0.0, 1.5, 2.0, 3.25}, {1.0, 0.9, 0.8, 0.7}};
    scene_.interferers = {{{"i0.wav", {4.0, 2.0, 0.5, 0.0}, {0.7, 0.8, 0.9, 1.0}}, 3.0},
                          {{"i1.wav", {0.0, 0.0, 0.0, 0.0}, {1.0, 1.0, 1.0, 1.0}}, -2.0}};
    scene_.rir.seed = 9;
  }

  TempDir dir_;
  SceneRecord scene_;
};

TEST_F(SceneFixture, MixtureDecomposesAndHitsRequestedSnr) {
  const SceneAudio a = mix_scene(scene_, dir_.path());
  ASSERT_EQ(a.mixture.channels(), 4);
  ASSERT_EQ(a.mixture.frames(), 8000);
  Tensor<double> sum = a.dry_target + a.reverb;
  for (const auto& d : a.dry_interferers) sum += d;
  EXPECT_LT((sum - a.mixture.samples()).cwiseAbs().maxCoeff(), 1e-15);
  const double et = a.dry_target.row(0).squaredNorm();
  for (std::size_t k = 0; k < 2; ++k) {
    const double ei = a.dry_interferers[k].row(0).squaredNorm();
    EXPECT_NEAR(10.0 * std::log10(et / ei), scene_.interferers[k].snr_db, 1e-9);
  }
  EXPECT_EQ(a.target_l.channel(0), a.dry_target.row(0).transpose());
  EXPECT_EQ(a.target_r.channel(0), a.dry_target.row(2).transpose());
}

TEST_F(SceneFixture, MissingSourceThrows) {
  scene_.interferers[0].source.path = "nope.wav";
  EXPECT_THROW(mix_scene(scene_, dir_.path()), std::exception);
}

TEST_F(SceneFixture, PreparedSceneReadsFiles) {
  const SceneAudio a = mix_scene(scene_, dir_.path());
  write_wav(a.mixture, dir_ / "mix.wav");
  write_wav(a.target_l, dir_ / "l.wav");
  write_wav(a.target_r, dir_ / "r.wav");
  SceneRecord p;
  p.scene_id = "p0";
  p.mic_count = 4;
  p.mixture_path = "mix.wav";
  p.target_l_path = "l.wav";
  p.target_r_path = "r.wav";
  const SceneAudio b = mix_scene(p, dir_.path());
  EXPECT_EQ(b.mixture.channels(), 4);
  EXPECT_LT((b.target_l.samples() - a.target_l.samples()).cwiseAbs().maxCoeff(), 1e-7);
  p.mic_count = 6;
  EXPECT_THROW(mix_scene(p, dir_.path()), SceneError);
}

TEST_F(SceneFixture, ManifestRoundTrip) {
  SceneManifest m;
  m.scenes.push_back(scene_);
  SceneRecord second = scene_;
  second.scene_id = "s1";
  second.split = Split::kTest;
  second.label = 0.25;
  m.scenes.push_back(second);
  const nlohmann::json j = to_json(m);
  EXPECT_EQ(manifest_from_json(j), m);
  EXPECT_EQ(to_json(manifest_from_json(j)), j);
  write_manifest(m, dir_ / "manifest.json");
  EXPECT_EQ(read_manifest(dir_ / "manifest.json"), m);
  EXPECT_EQ(m.split(Split::kTest).size(), 1u);
  EXPECT_EQ(m.find("s1").label, 0.25);
}

TEST_F(SceneFixture, ManifestIsStrict) {
  SceneManifest m;
  m.scenes.push_back(scene_);
  nlohmann::json j = to_json(m);
  nlohmann::json extra = j;
  extra["scenes"][0]["mystery"] = 1;
  EXPECT_THROW(manifest_from_json(extra), ConfigError);
  nlohmann::json version = j;
  version["schema_version"] = 2;
  EXPECT_THROW(manifest_from_json(version), ConfigError);
  nlohmann::json dup = j;
  dup["scenes"].push_back(j["scenes"][0]);
  EXPECT_THROW(manifest_from_json(dup), ConfigError);
  nlohmann::json no_int = j;
  no_int["scenes"][0]["interferers"] = nlohmann::json::array();
  EXPECT_THROW(manifest_from_json(no_int), SceneError);
  nlohmann::json bad_label = j;
  bad_label["scenes"][0]["label"] = 1.5;
  EXPECT_THROW(manifest_from_json(bad_label), SceneError);
}

TEST(Generate, SpecJsonIsStrict) {
  GenerateSpec spec;
  EXPECT_NO_THROW(generate_spec_from_json(to_json(spec)));
  nlohmann::json j = to_json(spec);
  j["bogus"] = true;
  EXPECT_THROW(generate_spec_from_json(j), ConfigError);
  EXPECT_THROW(generate_spec_from_json({{"difficulty", "cec3_like"}}), ConfigError);
}

TEST(Generate, SnrRanges) {
  EXPECT_EQ(snr_range(Difficulty::kCec1Like), (std::pair{0.0, 10.0}));
  EXPECT_EQ(snr_range(Difficulty::kCec2Like), (std::pair{-3.0, 7.0}));
}

TEST(Generate, SceneSeedDependsOnIdAndGlobalSeed) {
  EXPECT_EQ(scene_seed(1, "train_0000"), scene_seed(1, "train_0000"));
  EXPECT_NE(scene_seed(1, "train_0000"), scene_seed(1, "train_0001"));
  EXPECT_NE(scene_seed(1, "train_0000"), scene_seed(2, "train_0000"));
}

TEST(Generate, DatasetIsDeterministicAcrossWorkerCounts) {
  TempDir dir;
  GenerateSpec spec;
  spec.counts = {{Split::kTrain, 3}, {Split::kVal, 1}, {Split::kTest, 2}};
  spec.difficulty = Difficulty::kCec2Like;
  spec.duration_s = 0.25;
  spec.mic_count = 4;
  const auto p1 = generate_dataset(spec, 7, dir / "a", 1);
  const auto p2 = generate_dataset(spec, 7, dir / "b", 3);
  generate_dataset(spec, 8, dir / "c", 1);
  EXPECT_EQ(testing::file_bytes(p1), testing::file_bytes(p2));
  EXPECT_NE(testing::file_bytes(p1), testing::file_bytes(dir / "c" / "manifest.json"));
  const SceneManifest m = read_manifest(p1);
  ASSERT_EQ(m.scenes.size(), 6u);
  for (const auto& s : m.scenes) {
    EXPECT_EQ(testing::file_bytes(dir / "a" / s.target.path), testing::file_bytes(dir / "b" / s.target.path));
    EXPECT_GE(s.interferers.size(), 2u);
    EXPECT_LE(s.interferers.size(), 3u);
    for (const auto& i : s.interferers) {
      EXPECT_GE(i.snr_db, -3.0);
      EXPECT_LE(i.snr_db, 7.0);
    }
    const SceneAudio a = mix_scene(s, dir / "a");
    EXPECT_EQ(a.mixture.frames(), 4000);
    EXPECT_TRUE(a.mixture.samples().allFinite());
  }
  EXPECT_EQ(m.split(Split::kTrain).front()->scene_id, "train_0000");
}

}  // namespace
}  // namespace percept
