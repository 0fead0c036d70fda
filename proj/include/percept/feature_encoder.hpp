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
/// Convolutional speech feature extractor in the style of the WavLM /
/// wav2vec 2.0 front end: a stack of strided 1-D convolutions without bias,
/// a per-channel group norm after the first layer and GELU after every
/// layer. Weights are always frozen; the encoder only propagates gradients
/// back to its input signal.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/audio.hpp"
#include "percept/layers.hpp"

namespace percept {

struct EncoderLayerSpec {
  Index out_channels = 512;
  Index kernel = 3;
  Index stride = 2;

  bool operator==(const EncoderLayerSpec&) const = default;
};

enum class EncoderNorm { kGroupNormFirstLayer, kNone };

struct EncoderConfig {
  std::vector<EncoderLayerSpec> layers;
  EncoderNorm norm = EncoderNorm::kGroupNormFirstLayer;
  int input_rate_hz = 16000;

  /// 7 × 512 channels, kernels (10,3,3,3,3,2,2), strides (5,2,2,2,2,2,2) at 16 kHz.
  static EncoderConfig wavlm_base();

  void validate() const;
  Index feature_dim() const { return layers.back().out_channels; }
  /// Samples consumed by one output frame.
  Index receptive_field() const;
  /// Samples between consecutive output frames.
  Index hop() const;
  /// Output frames for an n-sample input; 0 if shorter than the receptive field.
  Index frames(Index n) const;

  bool operator==(const EncoderConfig&) const = default;
};

nlohmann::json to_json(const EncoderConfig& cfg);
/// Strict: unknown keys and the wrong activation name are rejected.
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

/// S_FE: F × T feature representation.
template <typename Scalar>
struct FeatureMap {
  Tensor<Scalar> values;

  Index dim() const { return values.rows(); }
  Index frames() const { return values.cols(); }
};

/// Per-call forward cache. Owning the trace at the call site keeps the
/// encoder itself immutable and safe to share between threads.
template <typename Scalar>
struct EncoderTrace {
  std::vector<Tensor<Scalar>> conv_inputs;
  std::vector<Tensor<Scalar>> activation_inputs;
  NormCache<Scalar> norm;
  bool valid() const { return !conv_inputs.empty(); }
};

template <typename Scalar>
class FeatureEncoder {
 public:
  using Trace = EncoderTrace<Scalar>;

  explicit FeatureEncoder(EncoderConfig cfg);

  /// He-uniform conv weights, group-norm affine at identity.
  static FeatureEncoder init_random(EncoderConfig cfg, std::uint64_t seed);
  /// Reads config and weights from a SEWF file; rejects dtype mismatches,
  /// missing or extra tensors and shape errors. No partial model is returned.
  static FeatureEncoder load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  const EncoderConfig& config() const { return cfg_; }
  int input_rate() const { return cfg_.input_rate_hz; }

  FeatureMap<Scalar> encode(const Vec<Scalar>& signal, EncoderTrace<Scalar>* trace = nullptr) const;
  /// Mono buffer at the encoder rate.
  FeatureMap<Scalar> encode(const AudioBuffer& mono) const;

  /// Gradient of <upstream, S_FE> with respect to the input signal.
  Vec<Scalar> encode_grad(const EncoderTrace<Scalar>& trace, const Tensor<Scalar>& upstream) const;

  const std::vector<Parameter<Scalar>>& parameters() const { return params_; }
  std::vector<Parameter<Scalar>>& mutable_parameters() { return params_; }

 private:
  ConvSpec layer_spec(std::size_t i) const;
  bool has_norm() const { return cfg_.norm == EncoderNorm::kGroupNormFirstLayer; }

  EncoderConfig cfg_;
  // conv.0.weight … conv.{L-1}.weight, then norm.gamma, norm.beta if present.
  std::vector<Parameter<Scalar>> params_;
};

extern template class FeatureEncoder<float>;
extern template class FeatureEncoder<double>;

}  // namespace percept
