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
/// Training loop for one ear's denoiser: Adam with global-norm clipping and
/// three strategies.
///
///   baseline_snr     L_SNR throughout, constant lr_init
///   wlm_finetune     L_SNR before finetune_switch_epoch, then L_SNR + L_WLM at lr_finetune
///   joint_scheduled  L_SNR + L_WLM throughout, lr_init · min(step/w, sqrt(w/step))
///
/// Epochs are counted from 0 and steps from 1. Per-sample gradients of a
/// batch are reduced in index order, so results do not depend on the
/// number of worker threads.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/denoiser.hpp"
#include "percept/feature_encoder.hpp"
#include "percept/losses.hpp"
#include "percept/scene.hpp"

namespace percept {

enum class Strategy { kBaselineSnr, kWlmFinetune, kJointScheduled };
std::string strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

enum class Ear { kLeft, kRight };
std::string ear_name(Ear e);  // "l" or "r"
Ear ear_from_name(const std::string& name);

struct TrainConfig {
  Strategy strategy = Strategy::kBaselineSnr;
  int epochs = 200;
  double lr_init = 1e-3;
  double lr_finetune = 1e-4;
  int finetune_switch_epoch = 100;
  double clip_l2_max = 5.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int warmup_steps = 1000;
  int batch_size = 4;
  /// 0 means one pass over the training split per epoch.
  int steps_per_epoch = 0;
  double segment_s = 2.0;
  std::uint64_t seed = 0;
  double snr_max_db = 30.0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Strict: unknown keys are rejected. Missing keys keep their defaults.
TrainConfig train_config_from_json(const nlohmann::json& j);

/// Learning rate for a (0-based) epoch and (1-based) global step.
double lr_schedule(Strategy strategy, int epoch, long long step, const TrainConfig& cfg);

/// Whether the strategy optimizes L_SNR + L_WLM during `epoch`.
bool uses_joint_loss(Strategy strategy, int epoch, const TrainConfig& cfg);

template <typename Scalar>
struct AdamState {
  long long step = 0;
  std::vector<Tensor<Scalar>> m;
  std::vector<Tensor<Scalar>> v;
};

/// One bias-corrected Adam update. Moments are created on first use;
/// throws ShapeError when the gradient list does not match the parameters.
template <typename Scalar>
void adam_step(std::vector<Parameter<Scalar>>& params, const std::vector<Tensor<Scalar>>& grads,
               AdamState<Scalar>& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
               double eps = 1e-8);

/// Rescales all gradients by max_norm / g when their global L2 norm g
/// exceeds max_norm. Returns g.
template <typename Scalar>
double clip_global_norm(std::vector<Tensor<Scalar>>& grads, double max_norm = 5.0);

template <typename Scalar>
double global_norm(const std::vector<Tensor<Scalar>>& grads);

/// One training or validation example for a single ear.
struct Example {
  std::string scene_id;
  Tensor<double> mixture;  // C × n
  Vec<double> target;      // n
};

/// Renders every scene of `split`, resamples to `model_rate_hz` and crops
/// or zero-pads to `segment_len` samples (0 keeps the full length). The
/// mixture channels are rotated so that the ear's reference mic comes first.
std::vector<Example> load_examples(const SceneManifest& manifest,
                                   const std::filesystem::path& base_dir, Split split, Ear ear,
                                   int model_rate_hz, Index segment_len, int workers = 1);

struct StepRecord {
  int epoch = 0;
  long long step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double snr_part = 0.0;
  double wlm_part = std::numeric_limits<double>::quiet_NaN();
  double grad_norm = 0.0;       // before clipping
  double grad_norm_clipped = 0.0;
};

struct EpochRecord {
  int epoch = 0;
  long long step = 0;  // global step at the end of the epoch
  double lr = 0.0;     // rate used by the last step
  double train_loss = 0.0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();  // mean L_SNR
  double val_stoi = std::numeric_limits<double>::quiet_NaN();
  double val_wlm = std::numeric_limits<double>::quiet_NaN();   // when an encoder is available

  /// Field-wise; two NaNs compare equal.
  bool operator==(const EpochRecord& o) const;
};

/// "epoch,step,lr,train_loss,val_loss,val_stoi" rows with full precision.
std::string history_csv(const std::vector<EpochRecord>& history);

class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, int epoch, long long step)
      : std::runtime_error(what), epoch(epoch), step(step) {}
  int epoch;
  long long step;
};

template <typename Scalar>
struct TrainState {
  Denoiser<Scalar> model;
  AdamState<Scalar> adam;
  std::mt19937_64 rng;
  int next_epoch = 0;
  long long step = 0;
  std::vector<EpochRecord> history;
  std::optional<Denoiser<Scalar>> best;
  double best_val_stoi = -std::numeric_limits<double>::infinity();

  TrainState(Denoiser<Scalar> m, std::uint64_t seed) : model(std::move(m)), rng(seed) {}
};

struct TrainHooks {
  std::function<void(const StepRecord&)> on_step;
  std::function<void(const EpochRecord&)> on_epoch;
  /// Writes a checkpoint here after every epoch when set.
  std::optional<std::filesystem::path> checkpoint_dir;
  int workers = 1;
};

/// Runs epochs state.next_epoch .. cfg.epochs - 1. `encoder` is required
/// for the joint strategies and optional otherwise (it enables val_wlm).
/// Throws NumericalAbort on a non-finite loss or gradient.
template <typename Scalar>
void train(TrainState<Scalar>& state, const std::vector<Example>& train_set,
           const std::vector<Example>& val_set, const TrainConfig& cfg,
           const FeatureEncoder<Scalar>* encoder, const TrainHooks& hooks = {});

/// checkpoint.sewf (model) and checkpoint.json (epoch, step, RNG state,
/// base64 Adam moments, history, best score) in `dir`; best.sewf if known.
template <typename Scalar>
void save_checkpoint(const TrainState<Scalar>& state, const std::filesystem::path& dir);

template <typename Scalar>
TrainState<Scalar> load_checkpoint(const std::filesystem::path& dir);

extern template void adam_step<float>(std::vector<Parameter<float>>&, const std::vector<Tensor<float>>&,
                                      AdamState<float>&, double, double, double, double);
extern template void adam_step<double>(std::vector<Parameter<double>>&,
                                       const std::vector<Tensor<double>>&, AdamState<double>&,
                                       double, double, double, double);

}  // namespace percept
