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
/// Per-sample scoring of enhanced binaural outputs, better-ear reduction
/// and the Pearson correlation matrix between all scores; plus the
/// evaluation protocol that runs a pair of ear models over a manifest.

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/denoiser.hpp"
#include "percept/feature_encoder.hpp"
#include "percept/losses.hpp"
#include "percept/metrics.hpp"
#include "percept/scene.hpp"

namespace percept {

/// Score columns in report order. Losses enter negated so that every
/// score is higher-is-better.
inline const std::vector<std::string>& analysis_scores() {
  static const std::vector<std::string> names = {"neg_l_wlm", "neg_l_snr", "si_snr", "stoi",
                                                 "fw_seg_snr"};
  return names;
}

struct AnalysisRecord {
  std::string sample_id;
  std::optional<double> label;
  std::map<std::string, double> left;
  std::map<std::string, double> right;
  std::map<std::string, double> better;  // better-ear value per score
};

struct CorrelationReport {
  std::vector<std::string> names;
  /// Symmetric; NaN where a pair has fewer than two complete rows or a
  /// constant column. The diagonal is 1 for every non-constant column.
  Tensor<double> r;
  Index n = 0;
  /// "a|b" → reason for every undefined pair (a before b in `names`).
  std::map<std::string, std::string> undefined;
};

/// Correlations between named columns. Rows with a NaN in either column
/// of a pair are skipped for that pair.
CorrelationReport correlate(const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& columns);

/// Better-ear columns (label first when any record has one), sorted by sample id.
CorrelationReport correlate(const std::vector<AnalysisRecord>& records);

struct AnalysisResult {
  std::vector<AnalysisRecord> records;  // sorted by sample id
  CorrelationReport report;
};

/// Scores <scene_id>_l.wav / <scene_id>_r.wav from `enhanced_dir` against
/// the scene targets. Throws SceneError for missing files and
/// std::invalid_argument for fewer than two scenes.
AnalysisResult analyze(const SceneManifest& manifest, const std::filesystem::path& base_dir,
                       const std::filesystem::path& enhanced_dir,
                       const FeatureEncoder<double>& encoder, const SnrLossParams& loss_params = {},
                       int workers = 1);

/// correlation_matrix.csv, scatter_<a>_<b>.csv and report.json.
void write_analysis(const AnalysisResult& result, const std::filesystem::path& out_dir);
nlohmann::json to_json(const AnalysisResult& result);

/// Maps a C × N mixture at the scene rate to a mono estimate of length N.
/// Channel 0 of the mixture is the ear's reference mic.
using Enhancer = std::function<Vec<double>(const AudioBuffer& mixture)>;

/// Wraps a model, resampling to and from its rate when needed. The model
/// must outlive the returned callable.
template <typename Scalar>
Enhancer make_enhancer(const Denoiser<Scalar>& model);

struct EvaluateOptions {
  std::vector<Metric> metrics = {Metric::kSiSnr, Metric::kStoi, Metric::kFwSegSnr};
  /// Only scenes of this split; all scenes when empty.
  std::optional<Split> split;
  /// Writes <scene_id>_l.wav and <scene_id>_r.wav here when set.
  std::optional<std::filesystem::path> enhanced_dir;
  int workers = 1;
};

/// Per scene and metric m: m_l, m_r, m (mean of ears), m_better, and the
/// same four for delta_m against the unprocessed reference channel of
/// each ear (mic 0 and mic C/2). The right enhancer sees the mixture
/// rotated so that mic C/2 is channel 0. Rows are sorted by scene id.
MetricReport evaluate(const SceneManifest& manifest, const std::filesystem::path& base_dir,
                      const Enhancer& left, const Enhancer& right,
                      const EvaluateOptions& options = {});

}  // namespace percept
