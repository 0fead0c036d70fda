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
/// Multi-channel Conv-TasNet denoiser. The reference channel goes through
/// a learned filterbank (the spectral encoder), all channels through a
/// filterbank whose kernel spans every microphone (the spatial encoder).
/// A dilated TCN estimates a mask over the spectral features and a
/// transposed convolution maps the masked features back to a waveform.

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/audio.hpp"
#include "percept/layers.hpp"

namespace percept {

enum class MaskActivation { kSigmoid, kRelu };

struct DenoiserConfig {
  Index n_spectral_filters = 256;
  Index n_spatial_filters = 128;
  Index frame_len = 20;
  Index bottleneck_channels = 256;
  Index block_channels = 512;
  Index tcn_kernel = 3;
  std::vector<Index> dilations = {1, 2, 4, 8, 16, 32};
  Index repeats = 4;
  Index n_mics = 6;
  MaskActivation mask_activation = MaskActivation::kSigmoid;
  int sample_rate_hz = 22050;

  /// 8 spectral / 4 spatial filters, L = 4, one repeat of dilations 1, 2, two mics.
  static DenoiserConfig tiny();
  /// 32 spectral / 16 spatial filters, L = 16, dilations 1, 2, 4, 8 at 16 kHz,
  /// two mics; 31,449 parameters.
  static DenoiserConfig small();

  void validate() const;
  Index stride() const { return frame_len / 2; }
  Index feature_channels() const { return n_spectral_filters + n_spatial_filters; }
  Index num_blocks() const { return static_cast<Index>(dilations.size()) * repeats; }
  /// Receptive field of the TCN in encoder frames.
  Index receptive_field_frames() const;

  bool operator==(const DenoiserConfig&) const = default;
};

nlohmann::json to_json(const DenoiserConfig& cfg);
DenoiserConfig denoiser_config_from_json(const nlohmann::json& j);

/// Number of scalar parameters of a model built from `cfg`.
Index param_count(const DenoiserConfig& cfg);

template <typename Scalar>
struct DenoiserTrace {
  struct Block {
    Tensor<Scalar> input;
    Tensor<Scalar> h1;
    NormCache<Scalar> norm1;
    Tensor<Scalar> n1;
    Tensor<Scalar> h2;
    NormCache<Scalar> norm2;
    Tensor<Scalar> n2;
  };

  Index length = 0;
  Index pad_left = 0;
  Tensor<Scalar> padded;     // C × Np
  Tensor<Scalar> spec_pre;   // spectral encoder before ReLU
  Tensor<Scalar> spat_pre;
  Tensor<Scalar> spec;       // spectral encoder output
  NormCache<Scalar> norm0;
  Tensor<Scalar> n0;
  std::vector<Block> blocks;
  Tensor<Scalar> skip_sum;
  Tensor<Scalar> mask_in;    // mask conv input (after PReLU)
  Tensor<Scalar> mask_pre;
  Tensor<Scalar> mask;
  Tensor<Scalar> masked;

  bool valid() const { return length > 0; }
};

template <typename Scalar>
class Denoiser {
 public:
  using Trace = DenoiserTrace<Scalar>;
  /// One tensor per parameter, in parameters() order.
  using Gradients = std::vector<Tensor<Scalar>>;

  explicit Denoiser(DenoiserConfig cfg);

  /// Kaiming-uniform weights, zero biases, PReLU slopes 0.25, gLN identity.
  static Denoiser init_random(DenoiserConfig cfg, std::uint64_t seed);
  static Denoiser load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// Sets the spectral encoder and decoder to a ± identity filterbank pair
  /// and the mask to (nearly) one, so forward() returns the reference
  /// channel. Needs n_spectral_filters ≥ 2 · frame_len.
  void init_passthrough();

  const DenoiserConfig& config() const { return cfg_; }

  /// x is C × N at the model rate; returns ŝ of length N.
  Vec<Scalar> forward(const Tensor<Scalar>& x, Trace* trace = nullptr) const;
  Vec<Scalar> forward(const AudioBuffer& x) const;

  /// Accumulates d<grad_shat, ŝ>/dθ into `grads`. Throws std::logic_error
  /// when `trace` does not hold a forward pass.
  void backward(const Trace& trace, const Vec<Scalar>& grad_shat, Gradients& grads) const;

  /// Spectral encoder followed directly by the decoder (mask forced to one).
  Vec<Scalar> reconstruct_spectral(const Vec<Scalar>& signal) const;

  Gradients zero_gradients() const;
  const std::vector<Parameter<Scalar>>& parameters() const { return params_; }
  std::vector<Parameter<Scalar>>& mutable_parameters() { return params_; }
  Index param_count() const;

 private:
  struct BlockIds {
    std::size_t in_w, in_b, prelu1, norm1_g, norm1_b, dw_w, dw_b, prelu2, norm2_g, norm2_b, res_w,
        res_b, skip_w, skip_b;
  };

  std::size_t add_param(const std::string& name, std::vector<Index> dims);
  const Tensor<Scalar>& w(std::size_t id) const { return params_[id].value; }
  Scalar scalar(std::size_t id) const { return params_[id].value(0, 0); }

  ConvSpec encoder_spec(Index in_channels, Index out_channels) const;
  ConvSpec pointwise_spec(Index in, Index out) const;
  ConvSpec depthwise_spec(Index dilation) const;
  ConvTransposeSpec decoder_spec() const;
  /// Left and right zero padding for an N-sample input.
  std::pair<Index, Index> padding(Index n) const;

  DenoiserConfig cfg_;
  std::vector<Parameter<Scalar>> params_;
  std::size_t spec_w_, spec_b_, spat_w_, spat_b_, norm0_g_, norm0_b_, bott_w_, bott_b_;
  std::vector<BlockIds> blocks_;
  std::size_t out_prelu_, mask_w_, mask_b_, dec_w_;
};

extern template class Denoiser<float>;
extern template class Denoiser<double>;

}  // namespace percept
