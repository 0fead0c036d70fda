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

#include "percept/trainer.hpp"

#include <sodium.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <sstream>
#include <thread>

#include "percept/json_util.hpp"
#include "percept/metrics.hpp"
#include "percept/resample.hpp"
#include "percept/sewf.hpp"

namespace percept {

namespace {

// Runs fn(i) for i in [0, n) on up to `workers` threads and rethrows the
// first error by index.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn&& fn) {
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
    const std::size_t count = std::min<std::size_t>(n, static_cast<std::size_t>(workers));
    for (std::size_t w = 0; w < count; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) run(i);
      });
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string to_base64(const std::vector<std::uint8_t>& bytes) {
  const int variant = sodium_base64_VARIANT_ORIGINAL;
  std::string out(sodium_base64_encoded_len(bytes.size(), variant), '\0');
  sodium_bin2base64(out.data(), out.size(), bytes.data(), bytes.size(), variant);
  out.resize(std::char_traits<char>::length(out.c_str()));
  return out;
}

std::vector<std::uint8_t> from_base64(const std::string& text) {
  std::vector<std::uint8_t> out(text.size());
  std::size_t len = 0;
  if (sodium_base642bin(out.data(), out.size(), text.data(), text.size(), nullptr, &len, nullptr,
                        sodium_base64_VARIANT_ORIGINAL) != 0) {
    throw sewf::FormatError("checkpoint: malformed base64 optimizer state");
  }
  out.resize(len);
  return out;
}

nlohmann::json number_or_null(double v) {
  return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr);
}

double number_or_nan(const nlohmann::json& j) {
  return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
}

}  // namespace

std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::kBaselineSnr:
      return "baseline_snr";
    case Strategy::kWlmFinetune:
      return "wlm_finetune";
    case Strategy::kJointScheduled:
      return "joint_scheduled";
  }
  return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
  for (Strategy s : {Strategy::kBaselineSnr, Strategy::kWlmFinetune, Strategy::kJointScheduled}) {
    if (strategy_name(s) == name) return s;
  }
  throw ConfigError("unknown strategy \"" + name + "\"");
}

std::string ear_name(Ear e) { return e == Ear::kLeft ? "l" : "r"; }

Ear ear_from_name(const std::string& name) {
  if (name == "l") return Ear::kLeft;
  if (name == "r") return Ear::kRight;
  throw ConfigError("ear must be \"l\" or \"r\", got \"" + name + "\"");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (!(lr_init >= 0.0) || !(lr_finetune >= 0.0)) throw ConfigError("train: learning rates must be >= 0");
  if (!(clip_l2_max > 0.0)) throw ConfigError("train: clip_l2_max must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("train: adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("train: adam_eps must be positive");
  if (warmup_steps < 1) throw ConfigError("train: warmup_steps must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (steps_per_epoch < 0) throw ConfigError("train: steps_per_epoch must be >= 0");
  if (!(segment_s >= 0.0)) throw ConfigError("train: segment_s must be >= 0");
}

nlohmann::json to_json(const TrainConfig& cfg) {
  return {{"strategy", strategy_name(cfg.strategy)},
          {"epochs", cfg.epochs},
          {"lr_init", cfg.lr_init},
          {"lr_finetune", cfg.lr_finetune},
          {"finetune_switch_epoch", cfg.finetune_switch_epoch},
          {"clip_l2_max", cfg.clip_l2_max},
          {"adam_beta1", cfg.adam_beta1},
          {"adam_beta2", cfg.adam_beta2},
          {"adam_eps", cfg.adam_eps},
          {"warmup_steps", cfg.warmup_steps},
          {"batch_size", cfg.batch_size},
          {"steps_per_epoch", cfg.steps_per_epoch},
          {"segment_s", cfg.segment_s},
          {"seed", cfg.seed},
          {"snr_max_db", cfg.snr_max_db}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  constexpr const char* where = "train";
  reject_unknown_keys(j,
                      {"strategy", "epochs", "lr_init", "lr_finetune", "finetune_switch_epoch",
                       "clip_l2_max", "adam_beta1", "adam_beta2", "adam_eps", "warmup_steps",
                       "batch_size", "steps_per_epoch", "segment_s", "seed", "snr_max_db"},
                      where);
  TrainConfig cfg;
  std::string strategy = strategy_name(cfg.strategy);
  read_optional(j, "strategy", strategy, where);
  cfg.strategy = strategy_from_name(strategy);
  read_optional(j, "epochs", cfg.epochs, where);
  read_optional(j, "lr_init", cfg.lr_init, where);
  read_optional(j, "lr_finetune", cfg.lr_finetune, where);
  read_optional(j, "finetune_switch_epoch", cfg.finetune_switch_epoch, where);
  read_optional(j, "clip_l2_max", cfg.clip_l2_max, where);
  read_optional(j, "adam_beta1", cfg.adam_beta1, where);
  read_optional(j, "adam_beta2", cfg.adam_beta2, where);
  read_optional(j, "adam_eps", cfg.adam_eps, where);
  read_optional(j, "warmup_steps", cfg.warmup_steps, where);
  read_optional(j, "batch_size", cfg.batch_size, where);
  read_optional(j, "steps_per_epoch", cfg.steps_per_epoch, where);
  read_optional(j, "segment_s", cfg.segment_s, where);
  read_optional(j, "seed", cfg.seed, where);
  read_optional(j, "snr_max_db", cfg.snr_max_db, where);
  cfg.validate();
  return cfg;
}

double lr_schedule(Strategy strategy, int epoch, long long step, const TrainConfig& cfg) {
  switch (strategy) {
    case Strategy::kBaselineSnr:
      return cfg.lr_init;
    case Strategy::kWlmFinetune:
      return epoch < cfg.finetune_switch_epoch ? cfg.lr_init : cfg.lr_finetune;
    case Strategy::kJointScheduled: {
      const double s = static_cast<double>(std::max<long long>(step, 1));
      const double w = cfg.warmup_steps;
      return cfg.lr_init * std::min(s / w, std::sqrt(w / s));
    }
  }
  return cfg.lr_init;
}

bool uses_joint_loss(Strategy strategy, int epoch, const TrainConfig& cfg) {
  switch (strategy) {
    case Strategy::kBaselineSnr:
      return false;
    case Strategy::kWlmFinetune:
      return epoch >= cfg.finetune_switch_epoch;
    case Strategy::kJointScheduled:
      return true;
  }
  return false;
}

template <typename Scalar>
void adam_step(std::vector<Parameter<Scalar>>& params, const std::vector<Tensor<Scalar>>& grads,
               AdamState<Scalar>& state, double lr, double beta1, double beta2, double eps) {
  if (grads.size() != params.size()) {
    throw ShapeError("adam_step: " + std::to_string(grads.size()) + " gradients for " +
                     std::to_string(params.size()) + " parameters");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params[i].value.rows() || grads[i].cols() != params[i].value.cols()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + params[i].name);
    }
  }
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.push_back(Tensor<Scalar>::Zero(p.value.rows(), p.value.cols()));
      state.v.push_back(Tensor<Scalar>::Zero(p.value.rows(), p.value.cols()));
    }
  } else if (state.m.size() != params.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameters");
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));
  const Scalar b1(beta1), b2(beta2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto m = state.m[i].array();
    auto v = state.v[i].array();
    const auto g = grads[i].array();
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g * g;
    params[i].value.array() -=
        Scalar(lr) * (m / Scalar(c1)) / ((v / Scalar(c2)).sqrt() + Scalar(eps));
  }
}

template <typename Scalar>
double global_norm(const std::vector<Tensor<Scalar>>& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.template cast<double>().squaredNorm();
  return std::sqrt(sq);
}

template <typename Scalar>
double clip_global_norm(std::vector<Tensor<Scalar>>& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const Scalar scale(max_norm / norm);
    for (auto& g : grads) g *= scale;
  }
  return norm;
}

std::vector<Example> load_examples(const SceneManifest& manifest,
                                   const std::filesystem::path& base_dir, Split split, Ear ear,
                                   int model_rate_hz, Index segment_len, int workers) {
  const std::vector<const SceneRecord*> scenes = manifest.split(split);
  std::vector<Example> out(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const SceneAudio audio = mix_scene(*scenes[i], base_dir);
    const Index ref = ear == Ear::kLeft ? 0 : scenes[i]->right_reference();
    AudioBuffer mix = resample(rotate_channels(audio.mixture, ref), model_rate_hz);
    AudioBuffer tgt = resample(ear == Ear::kLeft ? audio.target_l : audio.target_r, model_rate_hz);
    const Index n = segment_len > 0 ? segment_len : mix.frames();
    Example& e = out[i];
    e.scene_id = scenes[i]->scene_id;
    e.mixture = Tensor<double>::Zero(mix.channels(), n);
    e.target = Vec<double>::Zero(n);
    const Index m = std::min(n, mix.frames());
    e.mixture.leftCols(m) = mix.samples().leftCols(m);
    e.target.head(m) = tgt.samples().row(0).head(m).transpose();
  });
  return out;
}

bool EpochRecord::operator==(const EpochRecord& o) const {
  auto same = [](double a, double b) { return a == b || (std::isnan(a) && std::isnan(b)); };
  return epoch == o.epoch && step == o.step && same(lr, o.lr) && same(train_loss, o.train_loss) &&
         same(val_loss, o.val_loss) && same(val_stoi, o.val_stoi) && same(val_wlm, o.val_wlm);
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream os;
  os.precision(17);
  os << "epoch,step,lr,train_loss,val_loss,val_stoi\n";
  for (const auto& r : history) {
    os << r.epoch << ',' << r.step << ',' << r.lr << ',' << r.train_loss << ',' << r.val_loss << ','
       << r.val_stoi << '\n';
  }
  return os.str();
}

template <typename Scalar>
void train(TrainState<Scalar>& state, const std::vector<Example>& train_set,
           const std::vector<Example>& val_set, const TrainConfig& cfg,
           const FeatureEncoder<Scalar>* encoder, const TrainHooks& hooks) {
  cfg.validate();
  if (train_set.empty()) throw ConfigError("train: the training split is empty");
  const bool needs_encoder = cfg.strategy != Strategy::kBaselineSnr;
  if (needs_encoder && !encoder) {
    throw ConfigError("train: strategy " + strategy_name(cfg.strategy) + " needs a feature encoder");
  }
  const DenoiserConfig& mcfg = state.model.config();
  const SnrLossParams snr_params{cfg.snr_max_db};
  std::optional<Resampler> resampler;
  if (encoder && encoder->input_rate() != mcfg.sample_rate_hz) {
    resampler.emplace(mcfg.sample_rate_hz, encoder->input_rate());
  }
  const Resampler* rs = resampler ? &*resampler : nullptr;
  const std::size_t batch = static_cast<std::size_t>(cfg.batch_size);
  const long long steps_per_epoch =
      cfg.steps_per_epoch > 0 ? cfg.steps_per_epoch
                              : static_cast<long long>((train_set.size() + batch - 1) / batch);

  std::vector<std::size_t> order(train_set.size());
  for (int epoch = state.next_epoch; epoch < cfg.epochs; ++epoch) {
    const bool joint = uses_joint_loss(cfg.strategy, epoch, cfg);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), state.rng);
    std::size_t cursor = 0;
    double loss_sum = 0.0;
    double lr = 0.0;

    for (long long s = 0; s < steps_per_epoch; ++s) {
      std::vector<std::size_t> idx;
      for (std::size_t k = 0; k < batch && (cursor < order.size() || cfg.steps_per_epoch > 0); ++k) {
        if (cursor == order.size()) {
          std::shuffle(order.begin(), order.end(), state.rng);
          cursor = 0;
        }
        idx.push_back(order[cursor++]);
      }
      const long long step = state.step + 1;
      lr = lr_schedule(cfg.strategy, epoch, step, cfg);

      std::vector<typename Denoiser<Scalar>::Gradients> grads(idx.size());
      std::vector<LossResult<Scalar>> losses(idx.size());
      parallel_for(idx.size(), hooks.workers, [&](std::size_t k) {
        const Example& ex = train_set[idx[k]];
        const Tensor<Scalar> x = ex.mixture.template cast<Scalar>();
        const Vec<Scalar> target = ex.target.template cast<Scalar>();
        DenoiserTrace<Scalar> trace;
        const Vec<Scalar> s_hat = state.model.forward(x, &trace);
        losses[k] = joint ? loss_joint(target, s_hat, mcfg.sample_rate_hz, snr_params, *encoder, {},
                                       true, rs)
                          : loss_snr(target, s_hat, snr_params);
        state.model.backward(trace, losses[k].grad, grads[k]);
      });

      const double inv = 1.0 / static_cast<double>(idx.size());
      typename Denoiser<Scalar>::Gradients total = std::move(grads[0]);
      StepRecord rec;
      rec.epoch = epoch;
      rec.step = step;
      rec.lr = lr;
      rec.loss = losses[0].value;
      rec.snr_part = losses[0].snr_part;
      rec.wlm_part = joint ? losses[0].wlm_part : std::numeric_limits<double>::quiet_NaN();
      for (std::size_t k = 1; k < idx.size(); ++k) {
        for (std::size_t p = 0; p < total.size(); ++p) total[p] += grads[k][p];
        rec.loss += losses[k].value;
        rec.snr_part += losses[k].snr_part;
        if (joint) rec.wlm_part += losses[k].wlm_part;
      }
      for (auto& g : total) g *= Scalar(inv);
      rec.loss *= inv;
      rec.snr_part *= inv;
      if (joint) rec.wlm_part *= inv;

      rec.grad_norm = clip_global_norm(total, cfg.clip_l2_max);
      rec.grad_norm_clipped = global_norm(total);
      if (!std::isfinite(rec.loss) || !std::isfinite(rec.grad_norm)) {
        std::ostringstream os;
        os << "non-finite training state at epoch " << epoch << ", step " << step
           << ": loss=" << rec.loss << " snr=" << rec.snr_part << " wlm=" << rec.wlm_part
           << " grad_norm=" << rec.grad_norm;
        throw NumericalAbort(os.str(), epoch, step);
      }
      adam_step(state.model.mutable_parameters(), total, state.adam, lr, cfg.adam_beta1,
                cfg.adam_beta2, cfg.adam_eps);
      state.step = step;
      loss_sum += rec.loss;
      if (hooks.on_step) hooks.on_step(rec);
    }

    EpochRecord er;
    er.epoch = epoch;
    er.step = state.step;
    er.lr = lr;
    er.train_loss = loss_sum / static_cast<double>(steps_per_epoch);
    if (!val_set.empty()) {
      std::vector<double> v_snr(val_set.size()), v_stoi(val_set.size()), v_wlm(val_set.size());
      parallel_for(val_set.size(), hooks.workers, [&](std::size_t k) {
        const Example& ex = val_set[k];
        const Vec<Scalar> target = ex.target.template cast<Scalar>();
        const Vec<Scalar> s_hat = state.model.forward(ex.mixture.template cast<Scalar>().eval());
        v_snr[k] = loss_snr(target, s_hat, snr_params, false).value;
        try {
          v_stoi[k] = stoi(ex.target, s_hat.template cast<double>(), mcfg.sample_rate_hz);
        } catch (const MetricError&) {
          v_stoi[k] = std::numeric_limits<double>::quiet_NaN();
        }
        v_wlm[k] = encoder ? loss_wlm(target, s_hat, mcfg.sample_rate_hz, *encoder, false, rs).value
                           : std::numeric_limits<double>::quiet_NaN();
      });
      auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / static_cast<double>(v.size());
      };
      er.val_loss = mean(v_snr);
      er.val_stoi = mean(v_stoi);
      er.val_wlm = mean(v_wlm);
      if (std::isfinite(er.val_stoi) && er.val_stoi > state.best_val_stoi) {
        state.best_val_stoi = er.val_stoi;
        state.best = state.model;
      }
    }
    state.history.push_back(er);
    state.next_epoch = epoch + 1;
    if (hooks.on_epoch) hooks.on_epoch(er);
    if (hooks.checkpoint_dir) save_checkpoint(state, *hooks.checkpoint_dir);
  }
}

template <typename Scalar>
void save_checkpoint(const TrainState<Scalar>& state, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  state.model.save(dir / "checkpoint.sewf");
  if (state.best) state.best->save(dir / "best.sewf");

  std::vector<sewf::Entry> moments;
  const auto& params = state.model.parameters();
  for (std::size_t i = 0; i < state.adam.m.size(); ++i) {
    moments.push_back(sewf::tensor_entry("m." + params[i].name, params[i].dims, state.adam.m[i]));
    moments.push_back(sewf::tensor_entry("v." + params[i].name, params[i].dims, state.adam.v[i]));
  }
  std::ostringstream rng;
  rng << state.rng;

  nlohmann::json history = nlohmann::json::array();
  for (const auto& r : state.history) {
    history.push_back({{"epoch", r.epoch},
                       {"step", r.step},
                       {"lr", r.lr},
                       {"train_loss", number_or_null(r.train_loss)},
                       {"val_loss", number_or_null(r.val_loss)},
                       {"val_stoi", number_or_null(r.val_stoi)},
                       {"val_wlm", number_or_null(r.val_wlm)}});
  }
  const nlohmann::json j = {{"next_epoch", state.next_epoch},
                            {"step", state.step},
                            {"rng_state", rng.str()},
                            {"adam_step", state.adam.step},
                            {"adam_moments", to_base64(sewf::serialize(moments))},
                            {"best_val_stoi", number_or_null(state.best_val_stoi)},
                            {"has_best", state.best.has_value()},
                            {"history", history}};
  const auto tmp = dir / "checkpoint.json.tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    out << j.dump(2) << '\n';
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, dir / "checkpoint.json");
}

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "checkpoint.json");
  if (!in) throw std::runtime_error("no checkpoint in " + dir.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw sewf::FormatError((dir / "checkpoint.json").string() + ": " + e.what());
  }
  TrainState<Scalar> state(Denoiser<Scalar>::load(dir / "checkpoint.sewf"), 0);
  state.next_epoch = j.at("next_epoch").get<int>();
  state.step = j.at("step").get<long long>();
  std::istringstream rng(j.at("rng_state").get<std::string>());
  rng >> state.rng;
  if (!rng) throw sewf::FormatError("checkpoint: malformed RNG state");

  state.adam.step = j.at("adam_step").get<long long>();
  const auto entries = sewf::parse(from_base64(j.at("adam_moments").get<std::string>()));
  auto& params = state.model.mutable_parameters();
  if (!entries.empty()) {
    if (entries.size() != 2 * params.size()) {
      throw sewf::FormatError("checkpoint: optimizer state does not match the model");
    }
    for (auto& p : params) {
      Parameter<Scalar> m(p.name, p.dims), v(p.name, p.dims);
      const sewf::Entry* em = sewf::find(entries, "m." + p.name);
      const sewf::Entry* ev = sewf::find(entries, "v." + p.name);
      if (!em || !ev) throw sewf::FormatError("checkpoint: missing optimizer state for " + p.name);
      sewf::load_into(*em, m);
      sewf::load_into(*ev, v);
      state.adam.m.push_back(std::move(m.value));
      state.adam.v.push_back(std::move(v.value));
    }
  }
  for (const auto& r : j.at("history")) {
    EpochRecord er;
    er.epoch = r.at("epoch").get<int>();
    er.step = r.at("step").get<long long>();
    er.lr = r.at("lr").get<double>();
    er.train_loss = number_or_nan(r.at("train_loss"));
    er.val_loss = number_or_nan(r.at("val_loss"));
    er.val_stoi = number_or_nan(r.at("val_stoi"));
    er.val_wlm = number_or_nan(r.at("val_wlm"));
    state.history.push_back(er);
  }
  state.best_val_stoi = j.at("best_val_stoi").is_null() ? -std::numeric_limits<double>::infinity()
                                                        : j.at("best_val_stoi").get<double>();
  if (j.at("has_best").get<bool>()) state.best = Denoiser<Scalar>::load(dir / "best.sewf");
  return state;
}

#define PERCEPT_INSTANTIATE_TRAINER(S)                                                        \
  template void adam_step<S>(std::vector<Parameter<S>>&, const std::vector<Tensor<S>>&,       \
                             AdamState<S>&, double, double, double, double);                  \
  template double clip_global_norm<S>(std::vector<Tensor<S>>&, double);                       \
  template double global_norm<S>(const std::vector<Tensor<S>>&);                              \
  template void train<S>(TrainState<S>&, const std::vector<Example>&,                         \
                         const std::vector<Example>&, const TrainConfig&,                     \
                         const FeatureEncoder<S>*, const TrainHooks&);                        \
  template void save_checkpoint<S>(const TrainState<S>&, const std::filesystem::path&);       \
  template TrainState<S> load_checkpoint<S>(const std::filesystem::path&);

PERCEPT_INSTANTIATE_TRAINER(float)
PERCEPT_INSTANTIATE_TRAINER(double)

}  // namespace percept
