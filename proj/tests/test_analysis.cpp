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
#include <limits>

#include <gtest/gtest.h>

#include "percept/analysis.hpp"
#include "percept/wav.hpp"
#include "test_util.hpp"

namespace percept {
namespace {

using testing::random_vec;
using testing::TempDir;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

TEST(Correlate, SymmetricUnitDiagonalMatchingPearson) {
  const Vec<double> a = random_vec(30, 1);
  const Vec<double> b = a + random_vec(30, 2);
  const Vec<double> c = -a + 0.3 * random_vec(30, 3);
  auto col = [](const Vec<double>& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
  const CorrelationReport r = correlate({"a", "b", "c"}, {col(a), col(b), col(c)});
  ASSERT_EQ(r.r.rows(), 3);
  EXPECT_EQ(r.n, 30);
  for (Index i = 0; i < 3; ++i) {
    EXPECT_EQ(r.r(i, i), 1.0);
    for (Index j = 0; j < 3; ++j) EXPECT_EQ(r.r(i, j), r.r(j, i));
  }
  EXPECT_NEAR(r.r(0, 1), pearson(col(a), col(b)), 1e-15);
  EXPECT_LT(r.r(0, 2), -0.9);
  EXPECT_TRUE(r.undefined.empty());
}

TEST(Correlate, SkipsIncompleteRowsPairwise) {
  const std::vector<double> a = {1, 2, 3, 4, 5};
  const std::vector<double> b = {2, kNaN, 1, 7, 3};
  const std::vector<double> c = {5, 4, 3, 2, 1};
  const CorrelationReport r = correlate({"a", "b", "c"}, {a, b, c});
  const std::vector<double> a4 = {1, 3, 4, 5}, b4 = {2, 1, 7, 3};
  EXPECT_NEAR(r.r(0, 1), pearson(a4, b4), 1e-15);
  EXPECT_NEAR(r.r(0, 2), -1.0, 1e-15);
}

TEST(Correlate, ConstantColumnIsUndefined) {
  const CorrelationReport r = correlate({"x", "k"}, {{1, 2, 3}, {4, 4, 4}});
  EXPECT_EQ(r.r(0, 0), 1.0);
  EXPECT_TRUE(std::isnan(r.r(1, 1)));
  EXPECT_TRUE(std::isnan(r.r(0, 1)));
  EXPECT_TRUE(std::isnan(r.r(1, 0)));
  EXPECT_EQ(r.undefined.count("x|k"), 1u);
}

TEST(Correlate, RecordsPutLabelFirstAndSortById) {
  std::vector<AnalysisRecord> recs(3);
  const double labels[3] = {0.9, 0.1, 0.5};
  const char* ids[3] = {"c", "a", "b"};
  for (int i = 0; i < 3; ++i) {
    recs[i].sample_id = ids[i];
    recs[i].label = labels[i];
    for (const auto& n : analysis_scores()) recs[i].better[n] = labels[i] * (n == "stoi" ? -1.0 : 1.0) + i * 1e-3;
  }
  const CorrelationReport r = correlate(recs);
  ASSERT_EQ(r.names.front(), "label");
  EXPECT_EQ(r.names.size(), analysis_scores().size() + 1);
  EXPECT_GT(r.r(0, 1), 0.99);
  const Index stoi_col = std::find(r.names.begin(), r.names.end(), "stoi") - r.names.begin();
  EXPECT_LT(r.r(0, stoi_col), -0.99);
}

class EvalFixture : public ::testing::Test {
 protected:
  void SetUp() override {
    GenerateSpec spec;
    spec.counts = {{Split::kTrain, 0}, {Split::kVal, 0}, {Split::kTest, 3}};
    spec.duration_s = 0.5;
    spec.mic_count = 4;
    manifest_path_ = generate_dataset(spec, 4, dir_.path());
    manifest_ = read_manifest(manifest_path_);
  }

  TempDir dir_;
  std::filesystem::path manifest_path_;
  SceneManifest manifest_;
};

TEST_F(EvalFixture, PassThroughEnhancerHasZeroDelta) {
  const Enhancer left = [](const AudioBuffer& x) { return x.channel(0); };
  const Enhancer right = [](const AudioBuffer& x) { return x.channel(0); };
  EvaluateOptions opts;
  opts.enhanced_dir = dir_ / "enh";
  const MetricReport rep = evaluate(manifest_, dir_.path(), left, right, opts);
  ASSERT_EQ(rep.rows.size(), 3u);
  EXPECT_EQ(rep.rows[0].sample_id, "test_0000");
  for (const auto& row : rep.rows) {
    for (const char* m : {"si_snr", "stoi", "fw_seg_snr"}) {
      const std::string base = m;
      EXPECT_EQ(row.values.at("delta_" + base + "_l"), 0.0);
      EXPECT_EQ(row.values.at("delta_" + base + "_r"), 0.0);
      EXPECT_DOUBLE_EQ(row.values.at(base), 0.5 * (row.values.at(base + "_l") + row.values.at(base + "_r")));
      EXPECT_EQ(row.values.at(base + "_better"), std::max(row.values.at(base + "_l"), row.values.at(base + "_r")));
    }
  }
  EXPECT_TRUE(std::filesystem::exists(dir_ / "enh" / "test_0002_r.wav"));
}

TEST_F(EvalFixture, OracleEnhancerScoresPerfectly) {
  // Returns the clean reference-mic target, recovered from the scene.
  auto oracle = [&](bool right) {
    return [&, right](const AudioBuffer& x) {
      for (const auto& s : manifest_.scenes) {
        const SceneAudio a = mix_scene(s, dir_.path());
        const AudioBuffer seen = right ? rotate_channels(a.mixture, s.right_reference()) : a.mixture;
        if (seen.samples() == x.samples()) return (right ? a.target_r : a.target_l).channel(0);
      }
      throw std::runtime_error("unknown mixture");
    };
  };
  const MetricReport rep = evaluate(manifest_, dir_.path(), oracle(false), oracle(true));
  for (const auto& row : rep.rows) {
    EXPECT_EQ(row.values.at("si_snr_l"), kSiSnrCapDb);
    EXPECT_NEAR(row.values.at("stoi_r"), 1.0, 1e-6);
    EXPECT_GT(row.values.at("delta_stoi_better"), 0.0);
  }
}

TEST_F(EvalFixture, AnalyzeScoresEveryScene) {
  const Enhancer left = [](const AudioBuffer& x) { return x.channel(0); };
  const Enhancer right = [](const AudioBuffer& x) { return x.channel(0); };
  EvaluateOptions opts;
  opts.enhanced_dir = dir_ / "enh";
  evaluate(manifest_, dir_.path(), left, right, opts);
  EncoderConfig ecfg;
  ecfg.layers = {{8, 10, 5}, {8, 3, 2}};
  const auto enc = FeatureEncoder<double>::init_random(ecfg, 1);
  const AnalysisResult res = analyze(manifest_, dir_.path(), dir_ / "enh", enc);
  ASSERT_EQ(res.records.size(), 3u);
  for (const auto& rec : res.records) {
    for (const auto& n : analysis_scores()) {
      EXPECT_EQ(rec.better.at(n), std::max(rec.left.at(n), rec.right.at(n))) << n;
    }
    EXPECT_LE(rec.better.at("neg_l_wlm"), 0.0);
  }
  write_analysis(res, dir_ / "out");
  EXPECT_TRUE(std::filesystem::exists(dir_ / "out" / "correlation_matrix.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "out" / "scatter_si_snr_stoi.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir_ / "out" / "report.json"));

  std::filesystem::remove(dir_ / "enh" / "test_0001_l.wav");
  EXPECT_THROW(analyze(manifest_, dir_.path(), dir_ / "enh", enc), SceneError);
  SceneManifest one = manifest_;
  one.scenes.resize(1);
  EXPECT_THROW(analyze(one, dir_.path(), dir_ / "enh", enc), std::invalid_argument);
}

}  // namespace
}  // namespace percept
