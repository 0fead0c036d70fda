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

// percept: dataset generation, training, evaluation, correlation analysis
// and gradient checks.
//
// Exit codes: 0 success, 1 check or runtime failure, 2 usage or
// configuration error, 3 numerical abort during training.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "percept/analysis.hpp"
#include "percept/denoiser.hpp"
#include "percept/feature_encoder.hpp"
#include "percept/gradcheck.hpp"
#include "percept/json_util.hpp"
#include "percept/scene.hpp"
#include "percept/sewf.hpp"
#include "percept/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace percept {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;
constexpr int kExitNumerical = 3;

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void write_json(const json& j, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << j.dump(2) << '\n';
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_text(const std::string& text, const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Seed precedence: flag, config file, PERCEPT_SEED, 0.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag,
                           const std::optional<std::uint64_t>& from_file) {
  if (flag) return *flag;
  if (from_file) return *from_file;
  if (const char* env = std::getenv("PERCEPT_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw ConfigError(std::string("PERCEPT_SEED is not an unsigned integer: ") + env);
    }
  }
  return 0;
}

fs::path resolve_path(const fs::path& p, const fs::path& base) {
  return fs::absolute(p.is_absolute() ? p : base / p).lexically_normal();
}

// generate

struct GenerateArgs {
  std::string spec;
  std::optional<std::uint64_t> seed;
  std::string out;
  int workers = 1;
};

int cmd_generate(const GenerateArgs& a) {
  json j = read_json(a.spec);
  std::optional<std::uint64_t> file_seed;
  if (j.is_object() && j.contains("seed")) {
    file_seed = j.at("seed").get<std::uint64_t>();
    j.erase("seed");
  }
  const GenerateSpec spec = generate_spec_from_json(j);
  const std::uint64_t seed = resolve_seed(a.seed, file_seed);
  const fs::path manifest = generate_dataset(spec, seed, a.out, a.workers);
  json resolved = to_json(spec);
  resolved["seed"] = seed;
  write_json(resolved, fs::path(a.out) / "resolved_config.json");
  std::cout << "wrote " << manifest.string() << '\n';
  return kExitOk;
}

// train

struct TrainArgs {
  std::string config;
  std::optional<std::string> strategy;
  std::optional<std::string> ear;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::string out;
  bool resume = false;
  int workers = 1;
};

struct RunConfig {
  fs::path manifest;
  std::string dtype = "f64";
  Ear ear = Ear::kLeft;
  DenoiserConfig denoiser;
  std::optional<fs::path> encoder_weights;
  EncoderConfig encoder = EncoderConfig::wavlm_base();
  std::uint64_t encoder_seed = 0;
  TrainConfig train;

  json to_json() const {
    json enc;
    if (encoder_weights) {
      enc = {{"weights", encoder_weights->string()}};
    } else {
      enc = percept::to_json(encoder);
      enc["seed"] = encoder_seed;
    }
    return {{"manifest", manifest.string()},
            {"dtype", dtype},
            {"ear", ear_name(ear)},
            {"denoiser", percept::to_json(denoiser)},
            {"encoder", enc},
            {"train", percept::to_json(train)}};
  }
};

RunConfig run_config_from_json(const json& j, const fs::path& base) {
  reject_unknown_keys(j, {"manifest", "dtype", "ear", "denoiser", "encoder", "train"}, "config");
  RunConfig rc;
  if (!j.contains("manifest")) throw ConfigError("config: missing manifest");
  rc.manifest = resolve_path(j.at("manifest").get<std::string>(), base);
  read_optional(j, "dtype", rc.dtype, "config");
  if (rc.dtype != "f32" && rc.dtype != "f64") throw ConfigError("config: dtype must be f32 or f64");
  std::string ear = "l";
  read_optional(j, "ear", ear, "config");
  rc.ear = ear_from_name(ear);
  if (j.contains("denoiser")) rc.denoiser = denoiser_config_from_json(j.at("denoiser"));
  if (j.contains("encoder")) {
    json enc = j.at("encoder");
    if (!enc.is_object()) throw ConfigError("config.encoder: expected an object");
    if (enc.contains("weights")) {
      if (enc.size() != 1) throw ConfigError("config.encoder: weights excludes other keys");
      rc.encoder_weights = resolve_path(enc.at("weights").get<std::string>(), base);
    } else {
      if (enc.contains("seed")) {
        rc.encoder_seed = enc.at("seed").get<std::uint64_t>();
        enc.erase("seed");
      }
      rc.encoder = encoder_config_from_json(enc);
    }
  }
  if (j.contains("train")) rc.train = train_config_from_json(j.at("train"));
  return rc;
}

template <typename Scalar>
int run_training(const RunConfig& rc, const TrainArgs& a) {
  const fs::path out(a.out);
  fs::create_directories(out);
  const SceneManifest manifest = read_manifest(rc.manifest);
  const fs::path base = rc.manifest.parent_path();
  const int rate = rc.denoiser.sample_rate_hz;
  const Index segment = static_cast<Index>(std::lround(rc.train.segment_s * rate));
  const std::vector<Example> train_set =
      load_examples(manifest, base, Split::kTrain, rc.ear, rate, segment, a.workers);
  const std::vector<Example> val_set =
      load_examples(manifest, base, Split::kVal, rc.ear, rate, segment, a.workers);

  std::optional<FeatureEncoder<Scalar>> encoder;
  if (rc.encoder_weights) {
    encoder.emplace(FeatureEncoder<Scalar>::load(*rc.encoder_weights));
  } else {
    encoder.emplace(FeatureEncoder<Scalar>::init_random(rc.encoder, rc.encoder_seed));
  }

  const fs::path ckpt = out / "checkpoint";
  std::optional<TrainState<Scalar>> state;
  if (a.resume && fs::exists(ckpt / "checkpoint.json")) {
    state.emplace(load_checkpoint<Scalar>(ckpt));
    if (!(state->model.config() == rc.denoiser)) {
      throw ConfigError("resume: checkpoint model config differs from the run config");
    }
    std::cout << "resuming at epoch " << state->next_epoch << '\n';
  } else {
    state.emplace(Denoiser<Scalar>::init_random(rc.denoiser, rc.train.seed), rc.train.seed);
  }

  std::ofstream steps(out / "steps.csv", a.resume ? std::ios::app : std::ios::trunc);
  steps.precision(17);
  if (!a.resume || state->step == 0) {
    steps << "epoch,step,lr,loss,snr_part,wlm_part,grad_norm,grad_norm_clipped\n";
  }
  TrainHooks hooks;
  hooks.workers = a.workers;
  hooks.checkpoint_dir = ckpt;
  hooks.on_step = [&](const StepRecord& r) {
    steps << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.loss << ',' << r.snr_part << ','
          << r.wlm_part << ',' << r.grad_norm << ',' << r.grad_norm_clipped << '\n';
  };
  hooks.on_epoch = [&](const EpochRecord& r) {
    std::printf("epoch %d step %lld lr %.3g train %.4f val_snr %.4f val_stoi %.4f\n", r.epoch,
                r.step, r.lr, r.train_loss, r.val_loss, r.val_stoi);
    std::fflush(stdout);
  };

  try {
    train(*state, train_set, val_set, rc.train, encoder ? &*encoder : nullptr, hooks);
  } catch (const NumericalAbort& e) {
    steps.flush();
    write_text(history_csv(state->history), out / "history.csv");
    std::cerr << "numerical abort: " << e.what() << '\n';
    return kExitNumerical;
  }
  write_text(history_csv(state->history), out / "history.csv");
  state->model.save(out / "model.sewf");
  (state->best ? *state->best : state->model).save(out / "best.sewf");
  return kExitOk;
}

int cmd_train(const TrainArgs& a) {
  const fs::path cfg_path(a.config);
  RunConfig rc = run_config_from_json(read_json(cfg_path), cfg_path.parent_path());
  if (a.strategy) rc.train.strategy = strategy_from_name(*a.strategy);
  if (a.ear) rc.ear = ear_from_name(*a.ear);
  if (a.seed) rc.train.seed = *a.seed;
  if (a.epochs) rc.train.epochs = *a.epochs;
  rc.train.validate();
  fs::create_directories(a.out);
  write_json(rc.to_json(), fs::path(a.out) / "resolved_config.json");
  return rc.dtype == "f32" ? run_training<float>(rc, a) : run_training<double>(rc, a);
}

// evaluate

struct EvaluateArgs {
  std::string manifest;
  std::string model_l;
  std::string model_r;
  std::string out;
  std::string split = "test";
  int workers = 1;
};

template <typename Scalar>
MetricReport evaluate_models(const SceneManifest& manifest, const fs::path& base,
                             const EvaluateArgs& a, const EvaluateOptions& opts) {
  const Denoiser<Scalar> left = Denoiser<Scalar>::load(a.model_l);
  const Denoiser<Scalar> right = Denoiser<Scalar>::load(a.model_r);
  for (const auto& s : manifest.scenes) {
    if (s.mic_count != left.config().n_mics || s.mic_count != right.config().n_mics) {
      throw ConfigError("evaluate: scene " + s.scene_id + " has " + std::to_string(s.mic_count) +
                        " mics but the models expect " + std::to_string(left.config().n_mics) +
                        " and " + std::to_string(right.config().n_mics));
    }
  }
  return evaluate(manifest, base, make_enhancer(left), make_enhancer(right), opts);
}

int cmd_evaluate(const EvaluateArgs& a) {
  const fs::path manifest_path = fs::absolute(a.manifest);
  const SceneManifest manifest = read_manifest(manifest_path);
  EvaluateOptions opts;
  if (a.split != "all") opts.split = split_from_name(a.split);
  opts.enhanced_dir = fs::path(a.out) / "enhanced";
  opts.workers = a.workers;
  fs::create_directories(a.out);
  write_json({{"manifest", manifest_path.string()},
              {"model_l", fs::absolute(a.model_l).string()},
              {"model_r", fs::absolute(a.model_r).string()},
              {"split", a.split}},
             fs::path(a.out) / "resolved_config.json");

  const DType dl = sewf::first_tensor_dtype(sewf::read_file(a.model_l));
  const DType dr = sewf::first_tensor_dtype(sewf::read_file(a.model_r));
  if (dl != dr) throw ConfigError("evaluate: the two models have different dtypes");
  const MetricReport report = dl == DType::kF32
                                  ? evaluate_models<float>(manifest, manifest_path.parent_path(), a, opts)
                                  : evaluate_models<double>(manifest, manifest_path.parent_path(), a, opts);
  write_json(report.to_json(), fs::path(a.out) / "report.json");
  write_text(report.to_csv(), fs::path(a.out) / "report.csv");
  for (const auto& [k, v] : report.means()) {
    if (k.find('/') == std::string::npos) std::printf("%-24s %.6f\n", k.c_str(), v);
  }
  return kExitOk;
}

// analyze

struct AnalyzeArgs {
  std::string manifest;
  std::string enhanced;
  std::string encoder;
  std::string out;
  std::string split = "test";
  double snr_max_db = 30.0;
  int workers = 1;
};

int cmd_analyze(const AnalyzeArgs& a) {
  const fs::path manifest_path = fs::absolute(a.manifest);
  SceneManifest manifest = read_manifest(manifest_path);
  if (a.split != "all") {
    const Split keep = split_from_name(a.split);
    std::erase_if(manifest.scenes, [&](const SceneRecord& s) { return s.split != keep; });
  }
  const FeatureEncoder<double> encoder = FeatureEncoder<double>::load(a.encoder);
  fs::create_directories(a.out);
  write_json({{"manifest", manifest_path.string()},
              {"enhanced", fs::absolute(a.enhanced).string()},
              {"encoder", fs::absolute(a.encoder).string()},
              {"split", a.split},
              {"snr_max_db", a.snr_max_db}},
             fs::path(a.out) / "resolved_config.json");
  const AnalysisResult result = analyze(manifest, manifest_path.parent_path(), a.enhanced, encoder,
                                        SnrLossParams{a.snr_max_db}, a.workers);
  write_analysis(result, a.out);
  const auto& rep = result.report;
  std::printf("%-12s", "");
  for (const auto& n : rep.names) std::printf(" %11s", n.c_str());
  std::printf("\n");
  for (Index i = 0; i < rep.r.rows(); ++i) {
    std::printf("%-12s", rep.names[i].c_str());
    for (Index j = 0; j < rep.r.cols(); ++j) std::printf(" %11.4f", rep.r(i, j));
    std::printf("\n");
  }
  return kExitOk;
}

// init-encoder

struct InitEncoderArgs {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  std::string dtype = "f64";
  std::string out;
};

int cmd_init_encoder(const InitEncoderArgs& a) {
  EncoderConfig cfg = EncoderConfig::wavlm_base();
  if (a.config) cfg = encoder_config_from_json(read_json(*a.config));
  const std::uint64_t seed = resolve_seed(a.seed, std::nullopt);
  if (a.dtype == "f32") {
    FeatureEncoder<float>::init_random(cfg, seed).save(a.out);
  } else {
    FeatureEncoder<double>::init_random(cfg, seed).save(a.out);
  }
  return kExitOk;
}

// gradcheck

struct GradcheckArgs {
  std::string module = "all";
  int seeds = 20;
  bool corrupt = false;
};

int cmd_gradcheck(const GradcheckArgs& a) {
  if (!is_gradcheck_module(a.module)) {
    std::cerr << "gradcheck: unknown module \"" << a.module
              << "\" (expected all, layers, encoder, losses or denoiser)\n";
    return kExitUsage;
  }
  GradCheckOptions opts;
  opts.seeds = a.seeds;
  opts.corrupt_backward = a.corrupt;
  bool ok = true;
  for (const auto& r : run_gradcheck(a.module, opts)) {
    std::printf("%-36s max_rel_err %.3e  entries %lld  %s\n", r.name.c_str(), r.max_rel_error,
                r.entries, r.passed ? "ok" : "FAIL");
    ok = ok && r.passed;
  }
  std::printf("%s\n", ok ? "all gradients match" : "gradient check failed");
  return ok ? kExitOk : kExitFailure;
}

int run(int argc, char** argv) {
  CLI::App app{"percept: perceptual-loss speech enhancement toolkit"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Generate a synthetic scene dataset");
  g->add_option("--spec", gen.spec, "Dataset spec (JSON)")->required()->check(CLI::ExistingFile);
  g->add_option("--seed", gen.seed, "Global seed (default: spec, then PERCEPT_SEED)");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--workers", gen.workers, "Parallel scene workers")->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train one ear's denoiser");
  t->add_option("--config", tr.config, "Run config (JSON)")->required()->check(CLI::ExistingFile);
  t->add_option("--strategy", tr.strategy, "baseline_snr | wlm_finetune | joint_scheduled")
      ->check(CLI::IsMember({"baseline_snr", "wlm_finetune", "joint_scheduled"}));
  t->add_option("--ear", tr.ear, "l | r")->check(CLI::IsMember({"l", "r"}));
  t->add_option("--seed", tr.seed, "Training seed override");
  t->add_option("--epochs", tr.epochs, "Epoch count override");
  t->add_option("--out", tr.out, "Output directory")->required();
  t->add_flag("--resume", tr.resume, "Continue from the checkpoint in the output directory");
  t->add_option("--workers", tr.workers, "Per-sample gradient threads")->check(CLI::PositiveNumber);

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Run both ear models over a manifest and score them");
  e->add_option("--manifest", ev.manifest, "Scene manifest")->required()->check(CLI::ExistingFile);
  e->add_option("--model-l", ev.model_l, "Left-ear model (SEWF)")->required()->check(CLI::ExistingFile);
  e->add_option("--model-r", ev.model_r, "Right-ear model (SEWF)")->required()->check(CLI::ExistingFile);
  e->add_option("--out", ev.out, "Output directory")->required();
  e->add_option("--split", ev.split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  e->add_option("--workers", ev.workers, "Parallel scene workers")->check(CLI::PositiveNumber);

  AnalyzeArgs an;
  auto* n = app.add_subcommand("analyze", "Correlate losses and metrics over enhanced outputs");
  n->add_option("--manifest", an.manifest, "Scene manifest")->required()->check(CLI::ExistingFile);
  n->add_option("--enhanced", an.enhanced, "Directory of <scene_id>_<l|r>.wav")
      ->required()
      ->check(CLI::ExistingDirectory);
  n->add_option("--encoder", an.encoder, "Feature encoder weights (SEWF)")->required()->check(CLI::ExistingFile);
  n->add_option("--out", an.out, "Output directory")->required();
  n->add_option("--split", an.split, "train | val | test | all")
      ->check(CLI::IsMember({"train", "val", "test", "all"}));
  n->add_option("--snr-max-db", an.snr_max_db, "Soft threshold of the SNR loss");
  n->add_option("--workers", an.workers, "Parallel scene workers")->check(CLI::PositiveNumber);

  InitEncoderArgs ie;
  auto* i = app.add_subcommand("init-encoder", "Write a randomly initialized feature encoder");
  i->add_option("--config", ie.config, "Encoder config (JSON)")->check(CLI::ExistingFile);
  i->add_option("--seed", ie.seed, "Seed (default: PERCEPT_SEED)");
  i->add_option("--dtype", ie.dtype, "f32 | f64")->check(CLI::IsMember({"f32", "f64"}));
  i->add_option("--out", ie.out, "Output SEWF file")->required();

  GradcheckArgs gc;
  auto* c = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  c->add_option("--module", gc.module, "all | layers | encoder | losses | denoiser");
  c->add_option("--seeds", gc.seeds, "Number of random seeds")->check(CLI::PositiveNumber);
  c->add_flag("--corrupt-backward", gc.corrupt, "Perturb analytic gradients (self-test)")->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*g) return cmd_generate(gen);
    if (*t) return cmd_train(tr);
    if (*e) return cmd_evaluate(ev);
    if (*n) return cmd_analyze(an);
    if (*i) return cmd_init_encoder(ie);
    if (*c) return cmd_gradcheck(gc);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const json::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace
}  // namespace percept

int main(int argc, char** argv) { return percept::run(argc, argv); }
