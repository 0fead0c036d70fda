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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.
//
//   acceptance [--workdir DIR] [N ...]
//
// With no numbers every criterion runs. Criterion 6 trains twelve small
// models and dominates the runtime (tens of minutes on one core).

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/analysis.hpp"
#include "percept/denoiser.hpp"
#include "percept/feature_encoder.hpp"
#include "percept/gradcheck.hpp"
#include "percept/losses.hpp"
#include "percept/metrics.hpp"
#include "percept/scene.hpp"
#include "percept/sewf.hpp"
#include "percept/trainer.hpp"
#include "percept/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace percept {
namespace {

// Tolerances and thresholds.
constexpr double kGradTol = 1e-4;
constexpr int kGradSeeds = 20;
constexpr double kGradBudgetS = 60.0;
constexpr double kLossTol = 1e-9;
constexpr double kShiftTol = 1e-5;
constexpr double kStoiTol = 1e-6;
constexpr double kScaleTol = 1e-9;
constexpr Index kOverfitMaxParams = 50000;
constexpr int kOverfitSteps = 300;
constexpr double kOverfitTargetDb = -15.0;
constexpr double kOverfitBudgetS = 300.0;
constexpr int kReplicationScenes = 50;
constexpr int kReplicationSeeds = 3;
constexpr double kReplicationBudgetS = 7200.0;
constexpr double kWlmReduction = 0.10;
constexpr double kLabelCorrelation = 0.9;
constexpr int kResumeSteps = 10;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Vec<double> noise(Index n, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, scale);
  Vec<double> v(n);
  for (Index i = 0; i < n; ++i) v(i) = d(rng);
  return v;
}

std::vector<char> bytes_of(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

bool same_tree(const fs::path& a, const fs::path& b, std::size_t& files) {
  std::set<fs::path> rel_a, rel_b;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (e.is_regular_file()) rel_a.insert(fs::relative(e.path(), a));
  }
  for (const auto& e : fs::recursive_directory_iterator(b)) {
    if (e.is_regular_file()) rel_b.insert(fs::relative(e.path(), b));
  }
  files = rel_a.size();
  if (rel_a != rel_b) return false;
  for (const auto& r : rel_a) {
    if (bytes_of(a / r) != bytes_of(b / r)) return false;
  }
  return true;
}

fs::path fresh_dir(const fs::path& p) {
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

// 1. Finite-difference gradient suite and the CLI entry point.
Outcome gradient_suite(const fs::path&) {
  GradCheckOptions opts;
  opts.seeds = kGradSeeds;
  double worst = 0.0;
  bool all = true;
  std::size_t checks = 0;
  for (const auto& r : run_gradcheck("all", opts)) {
    worst = std::max(worst, r.max_rel_error);
    all = all && r.passed;
    ++checks;
  }
  const auto t0 = Clock::now();
  const std::string cmd = std::string(PERCEPT_CLI) + " gradcheck > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  const double elapsed = seconds_since(t0);
  return {all && worst < kGradTol && code == 0 && elapsed < kGradBudgetS,
          fmt("%zu checks x %d seeds, max rel err %.2e (< %.0e); `percept gradcheck` exit %d in %.1f s",
              checks, kGradSeeds, worst, kGradTol, code, elapsed)};
}

// 2. Closed-form loss values.
Outcome closed_form_losses(const fs::path&) {
  const auto enc = FeatureEncoder<double>::init_random(EncoderConfig::wavlm_base(), 11);
  double e_same = 0.0, e_zero = 0.0, wlm_max = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Vec<double> s = noise(16000, seed, 0.1 * seed);
    e_same = std::max(e_same, std::abs(loss_snr(s, s).value + 30.0));
    e_zero = std::max(e_zero, std::abs(loss_snr<double>(s, Vec<double>::Zero(s.size())).value -
                                       10.0 * std::log10(1.001)));
    if (seed <= 2) wlm_max = std::max(wlm_max, std::abs(loss_wlm(s, s, 16000, enc).value));
  }
  return {e_same <= kLossTol && e_zero <= kLossTol && wlm_max == 0.0,
          fmt("|L_SNR(s,s)+30| = %.1e, |L_SNR(s,0)-10log10(1.001)| = %.1e, L_WLM(s,s) = %g", e_same,
              e_zero, wlm_max)};
}

// 3. Encoder output shape and hop-shift covariance.
Outcome encoder_shape(const fs::path&) {
  const auto enc = FeatureEncoder<double>::init_random(EncoderConfig::wavlm_base(), 3);
  const FeatureMap<double> f = enc.encode(noise(16000, 1, 0.1));
  const Index hop = enc.config().hop();
  Vec<double> x = Vec<double>::Zero(16000);
  x.segment(3000, 9000) = noise(9000, 2, 0.1);
  Vec<double> shifted = Vec<double>::Zero(16000);
  shifted.segment(hop, 16000 - hop) = x.head(16000 - hop);
  const Tensor<double> a = enc.encode(x).values;
  const Tensor<double> b = enc.encode(shifted).values;
  double worst = 0.0;
  for (Index t = 2; t + 3 < a.cols(); ++t) {
    worst = std::max(worst, (b.col(t + 1) - a.col(t)).cwiseAbs().maxCoeff());
  }
  return {f.dim() == 512 && f.frames() == 49 && hop == 320 && worst <= kShiftTol,
          fmt("16000 samples -> %lld x %lld; one-hop (%lld) shift max interior deviation %.1e",
              static_cast<long long>(f.dim()), static_cast<long long>(f.frames()),
              static_cast<long long>(hop), worst)};
}

// 4. Metric invariants.
Outcome metric_invariants(const fs::path&) {
  double stoi_err = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const Vec<double> s = synth_source(SourceKind::kAmTones, 2.0, seed).channel(0);
    stoi_err = std::max(stoi_err, std::abs(stoi(s, s, 16000) - 1.0));
  }
  const Vec<double> s = synth_source(SourceKind::kChirp, 2.0, 4).channel(0);
  const Vec<double> e = s + noise(s.size(), 5, 0.05);
  const double base = si_snr(s, e);
  double scale_err = 0.0;
  for (double k : {1e-3, 0.5, 2.0, 1e3}) scale_err = std::max(scale_err, std::abs(si_snr(s, k * e) - base));

  std::vector<std::vector<double>> cols(5, std::vector<double>(40));
  for (int c = 0; c < 5; ++c) {
    const Vec<double> v = noise(40, 10 + c);
    for (int i = 0; i < 40; ++i) cols[c][i] = v(i) + (c > 0 ? cols[0][i] : 0.0);
  }
  const CorrelationReport rep = correlate({"a", "b", "c", "d", "e"}, cols);
  bool symmetric = true;
  for (Index i = 0; i < 5; ++i) {
    symmetric = symmetric && rep.r(i, i) == 1.0;
    for (Index j = 0; j < 5; ++j) symmetric = symmetric && rep.r(i, j) == rep.r(j, i);
  }

  const std::vector<Vec<double>> adversarial = {
      s, -s, Vec<double>::Zero(s.size()), 1e6 * noise(s.size(), 6), 1e-9 * noise(s.size(), 7),
      s + 1e-14 * noise(s.size(), 8), 1e4 * s, Vec<double>::Constant(s.size(), 1.0)};
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& x : adversarial) {
    const double v = fw_seg_snr(s, x, 16000);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const bool clamp_ok = lo >= kFwSegSnrFloorDb && hi <= kFwSegSnrCeilDb;
  return {stoi_err <= kStoiTol && scale_err <= kScaleTol && symmetric && clamp_ok,
          fmt("|stoi(s,s)-1| = %.1e; si_snr scale drift %.1e; corr symmetric/unit diag %s; "
              "fwSegSNR on %zu adversarial inputs in [%.2f, %.2f]",
              stoi_err, scale_err, symmetric ? "yes" : "no", adversarial.size(), lo, hi)};
}

// 5. Overfit two scenes.
Outcome overfit(const fs::path& work) {
  const fs::path dir = fresh_dir(work / "overfit");
  GenerateSpec spec;
  spec.counts = {{Split::kTrain, 2}, {Split::kVal, 0}, {Split::kTest, 0}};
  spec.duration_s = 1.0;
  spec.mic_count = 2;
  const SceneManifest m = read_manifest(generate_dataset(spec, 1, dir));
  const DenoiserConfig cfg = DenoiserConfig::small();
  const std::vector<Example> ex =
      load_examples(m, dir, Split::kTrain, Ear::kLeft, cfg.sample_rate_hz, 0);
  TrainConfig tc;
  tc.strategy = Strategy::kBaselineSnr;
  tc.batch_size = 2;
  tc.epochs = kOverfitSteps;
  tc.steps_per_epoch = 1;
  tc.lr_init = 3e-3;
  tc.seed = 1;
  TrainState<double> st(Denoiser<double>::init_random(cfg, tc.seed), tc.seed);
  const auto t0 = Clock::now();
  train(st, ex, {}, tc, static_cast<const FeatureEncoder<double>*>(nullptr));
  const double elapsed = seconds_since(t0);
  double final_loss = 0.0;
  for (const Example& e : ex) final_loss += loss_snr(e.target, st.model.forward(e.mixture), {}, false).value;
  final_loss /= static_cast<double>(ex.size());
  const Index params = st.model.param_count();
  return {params <= kOverfitMaxParams && st.step == kOverfitSteps && final_loss <= kOverfitTargetDb &&
              elapsed < kOverfitBudgetS,
          fmt("%lld params, %lld steps, final train L_SNR %.2f dB (<= %.0f) in %.1f s",
              static_cast<long long>(params), st.step, final_loss, kOverfitTargetDb, elapsed)};
}

// 6. Joint vs baseline training on a cec2-like split.
struct ReplicationRun {
  double stoi = 0.0;
  double delta_si_snr = 0.0;
  double val_wlm = 0.0;
};

EncoderConfig replication_encoder() {
  EncoderConfig cfg = EncoderConfig::wavlm_base();
  for (auto& l : cfg.layers) l.out_channels = 64;
  return cfg;
}

Outcome replication(const fs::path& work) {
  const auto t0 = Clock::now();
  const fs::path dir = fresh_dir(work / "replication");
  GenerateSpec spec;
  spec.counts = {{Split::kTrain, 24}, {Split::kVal, 6}, {Split::kTest, kReplicationScenes}};
  spec.difficulty = Difficulty::kCec2Like;
  spec.duration_s = 2.0;
  spec.mic_count = 2;
  const fs::path manifest_path = generate_dataset(spec, 2024, dir / "data", workers());
  const SceneManifest manifest = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();

  const DenoiserConfig mcfg = DenoiserConfig::small();
  const auto encoder = FeatureEncoder<float>::init_random(replication_encoder(), 7);
  const Index segment = mcfg.sample_rate_hz;
  std::vector<Example> train_set[2], val_set[2];
  for (int e = 0; e < 2; ++e) {
    const Ear ear = e == 0 ? Ear::kLeft : Ear::kRight;
    train_set[e] = load_examples(manifest, base, Split::kTrain, ear, mcfg.sample_rate_hz, segment, workers());
    val_set[e] = load_examples(manifest, base, Split::kVal, ear, mcfg.sample_rate_hz, segment, workers());
  }

  json log = json::array();
  ReplicationRun mean[2];
  for (int si = 0; si < 2; ++si) {
    const Strategy strategy = si == 0 ? Strategy::kBaselineSnr : Strategy::kJointScheduled;
    for (int r = 0; r < kReplicationSeeds; ++r) {
      TrainConfig tc;
      tc.strategy = strategy;
      tc.epochs = 40;
      tc.batch_size = 4;
      tc.lr_init = 3e-3;
      tc.warmup_steps = 40;
      tc.seed = 100 + static_cast<std::uint64_t>(r);
      std::optional<Denoiser<float>> models[2];
      double val_wlm = 0.0;
      for (int e = 0; e < 2; ++e) {
        TrainState<float> st(Denoiser<float>::init_random(mcfg, tc.seed + 10 * e), tc.seed + 10 * e);
        TrainHooks hooks;
        hooks.workers = workers();
        train(st, train_set[e], val_set[e], tc, &encoder, hooks);
        val_wlm += 0.5 * st.history.back().val_wlm;
        models[e].emplace(st.best ? *st.best : st.model);
      }
      EvaluateOptions opts;
      opts.split = Split::kTest;
      opts.workers = workers();
      const MetricReport rep =
          evaluate(manifest, base, make_enhancer(*models[0]), make_enhancer(*models[1]), opts);
      const auto means = rep.means();
      ReplicationRun run{means.at("stoi"), means.at("delta_si_snr"), val_wlm};
      mean[si].stoi += run.stoi / kReplicationSeeds;
      mean[si].delta_si_snr += run.delta_si_snr / kReplicationSeeds;
      mean[si].val_wlm += run.val_wlm / kReplicationSeeds;
      log.push_back({{"strategy", strategy_name(strategy)},
                     {"seed", tc.seed},
                     {"stoi", run.stoi},
                     {"delta_si_snr", run.delta_si_snr},
                     {"val_wlm", run.val_wlm}});
      std::fprintf(stderr, "  [6] %-15s seed %llu: stoi %.4f  dSI-SNR %.3f dB  val L_WLM %.3e  (%.0f s)\n",
                   strategy_name(strategy).c_str(), static_cast<unsigned long long>(tc.seed), run.stoi,
                   run.delta_si_snr, run.val_wlm, seconds_since(t0));
    }
  }
  const double elapsed = seconds_since(t0);
  std::ofstream(work / "replication.json") << json{{"runs", log}, {"seconds", elapsed}}.dump(2) << '\n';

  const bool ordering = mean[1].stoi >= mean[0].stoi && mean[1].delta_si_snr >= mean[0].delta_si_snr;
  const double wlm_drop = 1.0 - mean[1].val_wlm / mean[0].val_wlm;
  const bool fallback = wlm_drop >= kWlmReduction;
  const std::string summary =
      fmt("STOI joint %.4f vs baseline %.4f, dSI-SNR joint %.3f vs baseline %.3f dB over %d seeds x "
          "%d test scenes; val L_WLM %.1f%% lower; %.0f s",
          mean[1].stoi, mean[0].stoi, mean[1].delta_si_snr, mean[0].delta_si_snr, kReplicationSeeds,
          kReplicationScenes, 100.0 * wlm_drop, elapsed);
  const bool in_budget = elapsed < kReplicationBudgetS;
  if (ordering) return {in_budget, "ordering holds: " + summary};
  return {in_budget && fallback,
          std::string("ordering does not hold, fallback (>= 10% lower val L_WLM) ") +
              (fallback ? "met: " : "not met: ") + summary};
}

// 7. Correlation pipeline with labels built from the scene SNR.
struct CorrelationCase {
  CorrelationReport report;
  double r_si = 0.0;
  double r_snr = 0.0;
};

CorrelationCase correlation_case(const fs::path& dir, double drr_db) {
  GenerateSpec spec;
  spec.counts = {{Split::kTrain, 0}, {Split::kVal, 0}, {Split::kTest, 30}};
  spec.duration_s = 1.0;
  spec.mic_count = 2;
  spec.drr_db = drr_db;
  const fs::path manifest_path = generate_dataset(spec, 77, dir / "data", workers());
  const fs::path base = manifest_path.parent_path();
  SceneManifest m = read_manifest(manifest_path);
  for (auto& s : m.scenes) {
    // Logistic in the realized better-ear SNR: monotone increasing, in (0, 1).
    const SceneAudio a = mix_scene(s, base);
    double snr = -std::numeric_limits<double>::infinity();
    for (const auto& [ref, target] : {std::pair{Index{0}, &a.target_l}, std::pair{s.right_reference(), &a.target_r}}) {
      const Vec<double> t = target->channel(0);
      const Vec<double> rest = a.mixture.channel(ref) - t;
      snr = std::max(snr, 10.0 * std::log10(t.squaredNorm() / rest.squaredNorm()));
    }
    s.label = 1.0 / (1.0 + std::exp(-snr / 4.0));
  }
  write_manifest(m, manifest_path);
  const Enhancer unprocessed = [](const AudioBuffer& x) { return x.channel(0); };
  EvaluateOptions opts;
  opts.enhanced_dir = dir / "enhanced";
  evaluate(m, base, unprocessed, unprocessed, opts);
  EncoderConfig ecfg = EncoderConfig::wavlm_base();
  for (auto& l : ecfg.layers) l.out_channels = 32;
  const auto enc = FeatureEncoder<double>::init_random(ecfg, 5);
  const AnalysisResult res = analyze(m, base, dir / "enhanced", enc, {}, workers());
  write_analysis(res, dir / "analysis");
  CorrelationCase out{res.report};
  auto col = [&](const std::string& n) {
    const auto& names = out.report.names;
    return static_cast<Index>(std::find(names.begin(), names.end(), n) - names.begin());
  };
  out.r_si = out.report.r(col("label"), col("si_snr"));
  out.r_snr = out.report.r(col("label"), col("neg_l_snr"));
  return out;
}

Outcome correlation_construction(const fs::path& work) {
  // Gated on dry renderings: a noise-like reverb tail correlates with
  // harmonic targets by chance, which decouples SI-SNR from the energy SNR.
  const CorrelationCase dry = correlation_case(fresh_dir(work / "correlation_dry"), 60.0);
  const CorrelationCase wet = correlation_case(fresh_dir(work / "correlation_reverb"), GenerateSpec{}.drr_db);
  const CorrelationReport& rep = dry.report;
  bool structure = rep.names.front() == "label";
  for (Index i = 0; i < rep.r.rows(); ++i) {
    structure = structure && rep.r(i, i) == 1.0;
    for (Index j = 0; j < rep.r.cols(); ++j) structure = structure && rep.r(i, j) == rep.r(j, i);
  }
  return {dry.r_si > kLabelCorrelation && dry.r_snr > 0.0 && structure,
          fmt("dry scenes (DRR 60 dB), n=%lld: r(label, SI-SNR) = %.3f (> %.1f), r(label, -L_SNR) = "
              "%.3f (> 0), symmetric with unit diagonal: %s; reverberant (DRR %.0f dB, not gated): "
              "r(label, SI-SNR) = %.3f, r(label, -L_SNR) = %.3f",
              static_cast<long long>(rep.n), dry.r_si, kLabelCorrelation, dry.r_snr,
              structure ? "yes" : "no", GenerateSpec{}.drr_db, wet.r_si, wet.r_snr)};
}

// 8. Determinism of generation, training and checkpoint resume.
Outcome determinism(const fs::path& work) {
  const fs::path dir = fresh_dir(work / "determinism");
  GenerateSpec spec;
  spec.counts = {{Split::kTrain, 3}, {Split::kVal, 1}, {Split::kTest, 1}};
  spec.duration_s = 0.5;
  spec.mic_count = 2;
  const fs::path m1 = generate_dataset(spec, 5, dir / "gen_a", 1);
  generate_dataset(spec, 5, dir / "gen_b", workers() > 1 ? 2 : 3);
  std::size_t files = 0;
  const bool data_same = same_tree(dir / "gen_a", dir / "gen_b", files);

  const SceneManifest m = read_manifest(m1);
  DenoiserConfig cfg = DenoiserConfig::tiny();
  cfg.sample_rate_hz = 16000;
  const auto tr = load_examples(m, dir / "gen_a", Split::kTrain, Ear::kLeft, 16000, 0);
  const auto va = load_examples(m, dir / "gen_a", Split::kVal, Ear::kLeft, 16000, 0);
  TrainConfig tc;
  tc.epochs = kResumeSteps;
  tc.steps_per_epoch = 1;
  tc.batch_size = 2;
  tc.seed = 9;
  auto run = [&](const std::string& name, int threads) {
    TrainState<double> st(Denoiser<double>::init_random(cfg, tc.seed), tc.seed);
    TrainHooks h;
    h.workers = threads;
    train(st, tr, va, tc, static_cast<const FeatureEncoder<double>*>(nullptr), h);
    st.model.save(dir / (name + ".sewf"));
    std::ofstream(dir / (name + ".csv")) << history_csv(st.history);
    return st;
  };
  run("a", 1);
  run("b", 2);
  const bool train_same = bytes_of(dir / "a.sewf") == bytes_of(dir / "b.sewf") &&
                          bytes_of(dir / "a.csv") == bytes_of(dir / "b.csv");

  TrainConfig half = tc;
  half.epochs = kResumeSteps / 2;
  {
    TrainState<double> st(Denoiser<double>::init_random(cfg, tc.seed), tc.seed);
    TrainHooks h;
    h.checkpoint_dir = dir / "ckpt";
    train(st, tr, va, half, static_cast<const FeatureEncoder<double>*>(nullptr), h);
  }
  TrainState<double> resumed = load_checkpoint<double>(dir / "ckpt");
  train(resumed, tr, va, tc, static_cast<const FeatureEncoder<double>*>(nullptr));
  resumed.model.save(dir / "resumed.sewf");
  std::ofstream(dir / "resumed.csv") << history_csv(resumed.history);
  const bool resume_same = resumed.step == kResumeSteps &&
                           bytes_of(dir / "a.sewf") == bytes_of(dir / "resumed.sewf") &&
                           bytes_of(dir / "a.csv") == bytes_of(dir / "resumed.csv");
  return {data_same && train_same && resume_same,
          fmt("dataset (%zu files) identical: %s; history + model identical across runs and thread "
              "counts: %s; %d-step run resumed at step %d identical: %s",
              files, data_same ? "yes" : "no", train_same ? "yes" : "no", kResumeSteps, kResumeSteps / 2,
              resume_same ? "yes" : "no")};
}

// 9. File-format round trips.
Outcome round_trips(const fs::path& work) {
  const fs::path dir = fresh_dir(work / "formats");
  bool sewf_ok = true;
  {
    const auto m = Denoiser<float>::init_random(DenoiserConfig::tiny(), 1);
    m.save(dir / "a.sewf");
    const auto back = Denoiser<float>::load(dir / "a.sewf");
    for (std::size_t i = 0; i < m.parameters().size(); ++i) {
      const auto& x = m.parameters()[i].value;
      const auto& y = back.parameters()[i].value;
      sewf_ok = sewf_ok && x.size() == y.size() &&
                std::memcmp(x.data(), y.data(), sizeof(float) * x.size()) == 0;
    }
    back.save(dir / "b.sewf");
    sewf_ok = sewf_ok && bytes_of(dir / "a.sewf") == bytes_of(dir / "b.sewf");
    const auto e = FeatureEncoder<double>::init_random(EncoderConfig::wavlm_base(), 2);
    e.save(dir / "e.sewf");
    FeatureEncoder<double>::load(dir / "e.sewf").save(dir / "f.sewf");
    sewf_ok = sewf_ok && bytes_of(dir / "e.sewf") == bytes_of(dir / "f.sewf");
  }
  bool wav_ok = true;
  {
    Tensor<double> x(3, 4096);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<float> u(-1.5f, 1.5f);
    for (Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
    write_wav(AudioBuffer(x, 44100), dir / "a.wav");
    const AudioBuffer back = read_wav(dir / "a.wav");
    wav_ok = back.sample_rate() == 44100 && back.channels() == 3 && back.frames() == 4096 &&
             std::memcmp(back.samples().data(), x.data(), sizeof(double) * x.size()) == 0;
  }
  bool manifest_ok = true;
  {
    GenerateSpec spec;
    spec.counts = {{Split::kTrain, 2}, {Split::kVal, 1}, {Split::kTest, 2}};
    spec.duration_s = 0.25;
    spec.difficulty = Difficulty::kCec2Like;
    SceneManifest m = read_manifest(generate_dataset(spec, 3, dir / "data"));
    m.scenes[0].label = 0.5;
    SceneRecord prepared;
    prepared.scene_id = "external_01";
    prepared.split = Split::kTest;
    prepared.mixture_path = "mix.wav";
    prepared.target_l_path = "l.wav";
    prepared.target_r_path = "r.wav";
    m.scenes.push_back(prepared);
    const std::string text = to_json(m).dump(2);
    const SceneManifest parsed = manifest_from_json(json::parse(text));
    manifest_ok = parsed == m && to_json(parsed).dump(2) == text;
  }
  return {sewf_ok && wav_ok && manifest_ok,
          fmt("SEWF save/load bit-exact: %s; WAV float32 bit-exact: %s; manifest parse/serialize "
              "identity: %s",
              sewf_ok ? "yes" : "no", wav_ok ? "yes" : "no", manifest_ok ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome(const fs::path&)> run;
};

int run(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "percept_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--workdir") == 0 && i + 1 < argc) {
      work = argv[++i];
    } else {
      only.insert(std::atoi(argv[i]));
    }
  }
  fs::create_directories(work);
  const std::vector<Criterion> criteria = {
      {1, "gradient suite", gradient_suite},
      {2, "closed-form loss values", closed_form_losses},
      {3, "encoder shape", encoder_shape},
      {4, "metric invariants", metric_invariants},
      {5, "overfit check", overfit},
      {6, "joint vs baseline replication", replication},
      {7, "correlation pipeline construction", correlation_construction},
      {8, "determinism", determinism},
      {9, "file-format round trips", round_trips},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run(work);
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace percept

int main(int argc, char** argv) { return percept::run(argc, argv); }
