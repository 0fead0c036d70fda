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

#include "percept/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include "percept/resample.hpp"
#include "percept/wav.hpp"

namespace percept {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

template <typename Fn>
void for_each_index(std::size_t n, int workers, Fn&& fn) {
  std::vector<std::exception_ptr> errors(n);
  auto run = [&](std::size_t i) {
    try {
      fn(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  };
  if (workers <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) run(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (int w = 0; w < std::min<int>(workers, static_cast<int>(n)); ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

template <typename Fn>
double or_nan(Fn&& fn) {
  try {
    return fn();
  } catch (const MetricError&) {
    return kNaN;
  } catch (const LossError&) {
    return kNaN;
  }
}

std::string csv_number(double v) {
  if (std::isnan(v)) return "nan";
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

Vec<double> fit(const Vec<double>& x, Index n) {
  Vec<double> y = Vec<double>::Zero(n);
  const Index m = std::min(n, x.size());
  y.head(m) = x.head(m);
  return y;
}

std::vector<const SceneRecord*> sorted_scenes(const SceneManifest& manifest,
                                              const std::optional<Split>& split) {
  std::vector<const SceneRecord*> out;
  for (const auto& s : manifest.scenes) {
    if (!split || s.split == *split) out.push_back(&s);
  }
  std::sort(out.begin(), out.end(),
            [](const SceneRecord* a, const SceneRecord* b) { return a->scene_id < b->scene_id; });
  return out;
}

}  // namespace

CorrelationReport correlate(const std::vector<std::string>& names,
                            const std::vector<std::vector<double>>& columns) {
  if (names.size() != columns.size()) throw std::invalid_argument("correlate: names and columns differ");
  CorrelationReport rep;
  rep.names = names;
  rep.n = columns.empty() ? 0 : static_cast<Index>(columns.front().size());
  for (const auto& c : columns) {
    if (static_cast<Index>(c.size()) != rep.n) throw std::invalid_argument("correlate: ragged columns");
  }
  if (rep.n < 2) throw std::invalid_argument("correlate: need at least two samples");
  const Index k = static_cast<Index>(names.size());
  rep.r = Tensor<double>::Constant(k, k, kNaN);
  for (Index i = 0; i < k; ++i) {
    for (Index j = i; j < k; ++j) {
      std::vector<double> x, y;
      for (Index row = 0; row < rep.n; ++row) {
        const double a = columns[i][row], b = columns[j][row];
        if (std::isfinite(a) && std::isfinite(b)) {
          x.push_back(a);
          y.push_back(b);
        }
      }
      double r = kNaN;
      try {
        r = pearson(x, y);
        if (i == j) r = 1.0;
      } catch (const MetricError& e) {
        const std::string key = names[i] + "|" + names[j];
        rep.undefined[key] = e.what();
      }
      rep.r(i, j) = rep.r(j, i) = r;
    }
  }
  return rep;
}

CorrelationReport correlate(const std::vector<AnalysisRecord>& records) {
  std::vector<const AnalysisRecord*> rows;
  for (const auto& r : records) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(),
            [](const AnalysisRecord* a, const AnalysisRecord* b) { return a->sample_id < b->sample_id; });
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;
  const bool any_label = std::any_of(rows.begin(), rows.end(), [](const AnalysisRecord* r) { return r->label.has_value(); });
  if (any_label) {
    names.push_back("label");
    columns.emplace_back();
    for (const auto* r : rows) columns.back().push_back(r->label.value_or(kNaN));
  }
  for (const auto& s : analysis_scores()) {
    names.push_back(s);
    columns.emplace_back();
    for (const auto* r : rows) {
      const auto it = r->better.find(s);
      columns.back().push_back(it == r->better.end() ? kNaN : it->second);
    }
  }
  return correlate(names, columns);
}

AnalysisResult analyze(const SceneManifest& manifest, const std::filesystem::path& base_dir,
                       const std::filesystem::path& enhanced_dir,
                       const FeatureEncoder<double>& encoder, const SnrLossParams& loss_params,
                       int workers) {
  const std::vector<const SceneRecord*> scenes = sorted_scenes(manifest, std::nullopt);
  if (scenes.size() < 2) throw std::invalid_argument("analyze: need at least two scenes");
  for (const auto* s : scenes) {
    for (const char* ear : {"_l.wav", "_r.wav"}) {
      const auto path = enhanced_dir / (s->scene_id + ear);
      if (!std::filesystem::exists(path)) throw SceneError("analyze: missing enhanced file " + path.string());
    }
  }

  AnalysisResult result;
  result.records.resize(scenes.size());
  for_each_index(scenes.size(), workers, [&](std::size_t i) {
    const SceneRecord& scene = *scenes[i];
    const SceneAudio audio = mix_scene(scene, base_dir);
    const int rate = scene.sample_rate_hz;
    AnalysisRecord& rec = result.records[i];
    rec.sample_id = scene.scene_id;
    rec.label = scene.label;
    for (int side = 0; side < 2; ++side) {
      const AudioBuffer& target = side == 0 ? audio.target_l : audio.target_r;
      const auto path = enhanced_dir / (scene.scene_id + (side == 0 ? "_l.wav" : "_r.wav"));
      const AudioBuffer enhanced = read_wav(path);
      if (enhanced.channels() != 1) throw SceneError("analyze: " + path.string() + " is not mono");
      require_rate(enhanced, rate, "analyze");
      if (enhanced.frames() != target.frames()) {
        throw SceneError("analyze: " + path.string() + " has " + std::to_string(enhanced.frames()) +
                         " samples, the target has " + std::to_string(target.frames()));
      }
      const Vec<double> s = target.channel<double>(0);
      const Vec<double> s_hat = enhanced.channel<double>(0);
      std::map<std::string, double>& out = side == 0 ? rec.left : rec.right;
      out["neg_l_wlm"] = or_nan([&] { return -loss_wlm(s, s_hat, rate, encoder, false).value; });
      out["neg_l_snr"] = or_nan([&] { return -loss_snr(s, s_hat, loss_params, false).value; });
      out["si_snr"] = or_nan([&] { return si_snr(s, s_hat); });
      out["stoi"] = or_nan([&] { return stoi(s, s_hat, rate); });
      out["fw_seg_snr"] = or_nan([&] { return fw_seg_snr(s, s_hat, rate); });
    }
    for (const auto& name : analysis_scores()) {
      const double l = rec.left.at(name), r = rec.right.at(name);
      rec.better[name] = std::isnan(l) ? r : std::isnan(r) ? l : better_ear(l, r, Orientation::kHigherBetter);
    }
  });
  result.report = correlate(result.records);
  return result;
}

nlohmann::json to_json(const AnalysisResult& result) {
  const CorrelationReport& rep = result.report;
  nlohmann::json matrix = nlohmann::json::array();
  for (Index i = 0; i < rep.r.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < rep.r.cols(); ++j) {
      row.push_back(std::isnan(rep.r(i, j)) ? nlohmann::json(nullptr) : nlohmann::json(rep.r(i, j)));
    }
    matrix.push_back(row);
  }
  nlohmann::json undefined = nlohmann::json::array();
  for (const auto& [pair, reason] : rep.undefined) {
    const auto bar = pair.find('|');
    undefined.push_back({{"a", pair.substr(0, bar)}, {"b", pair.substr(bar + 1)}, {"reason", reason}});
  }
  auto scores = [](const std::map<std::string, double>& m) {
    nlohmann::json j;
    for (const auto& [k, v] : m) j[k] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
    return j;
  };
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : result.records) {
    nlohmann::json j = {{"sample_id", r.sample_id},
                        {"left", scores(r.left)},
                        {"right", scores(r.right)},
                        {"better_ear", scores(r.better)}};
    if (r.label) j["label"] = *r.label;
    records.push_back(j);
  }
  return {{"n", rep.n},
          {"names", rep.names},
          {"correlation", matrix},
          {"undefined", undefined},
          {"records", records}};
}

void write_analysis(const AnalysisResult& result, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const CorrelationReport& rep = result.report;
  {
    std::ofstream out(out_dir / "correlation_matrix.csv", std::ios::binary);
    out << "score";
    for (const auto& n : rep.names) out << ',' << n;
    out << '\n';
    for (Index i = 0; i < rep.r.rows(); ++i) {
      out << rep.names[i];
      for (Index j = 0; j < rep.r.cols(); ++j) out << ',' << csv_number(rep.r(i, j));
      out << '\n';
    }
  }
  std::vector<const AnalysisRecord*> rows;
  for (const auto& r : result.records) rows.push_back(&r);
  std::sort(rows.begin(), rows.end(),
            [](const AnalysisRecord* a, const AnalysisRecord* b) { return a->sample_id < b->sample_id; });
  auto value = [](const AnalysisRecord& r, const std::string& name) {
    if (name == "label") return r.label.value_or(kNaN);
    const auto it = r.better.find(name);
    return it == r.better.end() ? kNaN : it->second;
  };
  for (std::size_t a = 0; a < rep.names.size(); ++a) {
    for (std::size_t b = a + 1; b < rep.names.size(); ++b) {
      std::ofstream out(out_dir / ("scatter_" + rep.names[a] + "_" + rep.names[b] + ".csv"),
                        std::ios::binary);
      out << "sample_id," << rep.names[a] << ',' << rep.names[b] << '\n';
      for (const auto* r : rows) {
        out << r->sample_id << ',' << csv_number(value(*r, rep.names[a])) << ','
            << csv_number(value(*r, rep.names[b])) << '\n';
      }
    }
  }
  std::ofstream out(out_dir / "report.json", std::ios::binary);
  out << to_json(result).dump(2) << '\n';
}

template <typename Scalar>
Enhancer make_enhancer(const Denoiser<Scalar>& model) {
  return [&model](const AudioBuffer& mixture) -> Vec<double> {
    const int rate = model.config().sample_rate_hz;
    const AudioBuffer x = resample(mixture, rate);
    const Vec<Scalar> y = model.forward(x.samples().template cast<Scalar>().eval());
    if (rate == mixture.sample_rate()) return y.template cast<double>();
    const Resampler back(rate, mixture.sample_rate());
    return fit(back.apply(y.template cast<double>().eval()), mixture.frames());
  };
}

template Enhancer make_enhancer<float>(const Denoiser<float>&);
template Enhancer make_enhancer<double>(const Denoiser<double>&);

MetricReport evaluate(const SceneManifest& manifest, const std::filesystem::path& base_dir,
                      const Enhancer& left, const Enhancer& right, const EvaluateOptions& options) {
  const std::vector<const SceneRecord*> scenes = sorted_scenes(manifest, options.split);
  if (options.enhanced_dir) std::filesystem::create_directories(*options.enhanced_dir);
  MetricReport report;
  report.rows.resize(scenes.size());
  for_each_index(scenes.size(), options.workers, [&](std::size_t i) {
    const SceneRecord& scene = *scenes[i];
    const SceneAudio audio = mix_scene(scene, base_dir);
    const int rate = scene.sample_rate_hz;
    MetricReport::Row& row = report.rows[i];
    row.sample_id = scene.scene_id;
    row.split = split_name(scene.split);
    std::map<std::string, double> per_ear[2];
    for (int side = 0; side < 2; ++side) {
      const Enhancer& enhance = side == 0 ? left : right;
      const Vec<double> s = (side == 0 ? audio.target_l : audio.target_r).channel<double>(0);
      const Vec<double> x_ref =
          audio.mixture.channel<double>(side == 0 ? 0 : scene.right_reference());
      const Vec<double> s_hat =
          enhance(side == 0 ? audio.mixture : rotate_channels(audio.mixture, scene.right_reference()));
      if (s_hat.size() != s.size()) {
        throw ShapeError("evaluate: enhancer returned " + std::to_string(s_hat.size()) +
                         " samples for a " + std::to_string(s.size()) + "-sample scene");
      }
      if (options.enhanced_dir) {
        write_wav(AudioBuffer::mono(s_hat, rate),
                  *options.enhanced_dir / (scene.scene_id + (side == 0 ? "_l.wav" : "_r.wav")));
      }
      for (Metric m : options.metrics) {
        const std::string name(metric_name(m));
        const double value = or_nan([&] { return compute_metric(m, s, s_hat, rate); });
        const double ref = or_nan([&] { return compute_metric(m, s, x_ref, rate); });
        per_ear[side][name] = value;
        per_ear[side]["delta_" + name] = value - ref;
      }
    }
    for (const auto& [name, l] : per_ear[0]) {
      const double r = per_ear[1].at(name);
      row.values[name + "_l"] = l;
      row.values[name + "_r"] = r;
      row.values[name] = 0.5 * (l + r);
      row.values[name + "_better"] = better_ear(l, r, Orientation::kHigherBetter);
    }
  });
  return report;
}

}  // namespace percept
