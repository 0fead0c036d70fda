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
/// Differentiable layer primitives. Every op comes as a stateless pair of
/// free functions (forward, backward) that take the forward input
/// explicitly; the small layer classes at the bottom wrap them with a
/// one-shot forward cache for use inside models.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "percept/tensor.hpp"

namespace percept {

/// 1-D convolution geometry. Weights are laid out [out × in/groups × kernel]
/// and stored as a Tensor of shape out × (in/groups · kernel).
struct ConvSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel = 1;
  Index stride = 1;
  Index dilation = 1;
  Index groups = 1;
  Index pad_left = 0;
  Index pad_right = 0;

  void validate() const;
  Index receptive() const { return (kernel - 1) * dilation + 1; }
  /// floor((N + pads - (k-1)d - 1) / s) + 1; throws if the input is too short.
  Index output_length(Index n) const;
  std::vector<Index> weight_dims() const { return {out_channels, in_channels / groups, kernel}; }
};

/// Transposed 1-D convolution, weights [in × out × kernel].
struct ConvTransposeSpec {
  Index in_channels = 1;
  Index out_channels = 1;
  Index kernel = 1;
  Index stride = 1;

  void validate() const;
  Index output_length(Index t) const { return (t - 1) * stride + kernel; }
  std::vector<Index> weight_dims() const { return {in_channels, out_channels, kernel}; }
};

template <typename Scalar>
struct ConvGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> weight;
  Tensor<Scalar> bias;  // out_channels × 1, empty without bias
};

template <typename Scalar>
Tensor<Scalar> conv1d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                              const Tensor<Scalar>* bias, const ConvSpec& spec);

template <typename Scalar>
ConvGrads<Scalar> conv1d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                  const Tensor<Scalar>& grad_out, const ConvSpec& spec,
                                  bool has_bias, bool need_input_grad = true,
                                  bool need_weight_grad = true);

/// The multi-channel "2-D" encoder: a [1 × C × N] input convolved with a
/// [out × 1 × C × k] kernel whose height spans every channel. Since the
/// kernel covers the whole channel axis this is a 1-D convolution with C
/// input channels; `input` is the C × N view.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                              const Tensor<Scalar>* bias, Index kernel_height, Index kernel,
                              Index stride);

template <typename Scalar>
Tensor<Scalar> conv_transpose1d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                        const Tensor<Scalar>* bias,
                                        const ConvTransposeSpec& spec);

template <typename Scalar>
ConvGrads<Scalar> conv_transpose1d_backward(const Tensor<Scalar>& input,
                                            const Tensor<Scalar>& weight,
                                            const Tensor<Scalar>& grad_out,
                                            const ConvTransposeSpec& spec, bool has_bias,
                                            bool need_input_grad = true);

// Pointwise ops.

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out);

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x);
/// Takes the forward *output* y = sigmoid(x).
template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& grad_out);

/// tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3))).
template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x);
template <typename Scalar>
Tensor<Scalar> gelu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out);

template <typename Scalar>
Tensor<Scalar> prelu(const Tensor<Scalar>& x, Scalar alpha);
/// Returns d/dx in `grad_input` and d/dalpha in `grad_alpha`.
template <typename Scalar>
Tensor<Scalar> prelu_backward(const Tensor<Scalar>& x, Scalar alpha,
                              const Tensor<Scalar>& grad_out, Scalar& grad_alpha);

template <typename Scalar>
Tensor<Scalar> elementwise_mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b);
template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b);

// Normalization.

inline constexpr double kGlobalLayerNormEps = 1e-8;
inline constexpr double kGroupNormEps = 1e-5;

template <typename Scalar>
struct NormCache {
  Tensor<Scalar> normalized;  // pre-affine
  Vec<Scalar> inv_std;        // one entry (gLN) or one per row (group norm)
};

/// Normalizes by mean and variance over all F·T entries, then applies the
/// per-row affine gamma, beta (both F × 1).
template <typename Scalar>
Tensor<Scalar> global_layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                 const Tensor<Scalar>& beta, NormCache<Scalar>* cache = nullptr);

template <typename Scalar>
struct NormGrads {
  Tensor<Scalar> input;
  Tensor<Scalar> gamma;
  Tensor<Scalar> beta;
};

template <typename Scalar>
NormGrads<Scalar> global_layer_norm_backward(const NormCache<Scalar>& cache,
                                             const Tensor<Scalar>& gamma,
                                             const Tensor<Scalar>& grad_out);

/// Group norm with one group per channel: each row is normalized over time.
template <typename Scalar>
Tensor<Scalar> channel_group_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                  const Tensor<Scalar>& beta, NormCache<Scalar>* cache = nullptr);

template <typename Scalar>
NormGrads<Scalar> channel_group_norm_backward(const NormCache<Scalar>& cache,
                                              const Tensor<Scalar>& gamma,
                                              const Tensor<Scalar>& grad_out);

// Stateful wrappers. backward() consumes the cache left by forward(), so it
// may be called at most once per forward and throws otherwise. Parameter
// gradients are accumulated into Parameter::grad.

template <typename Scalar>
class Conv1d {
 public:
  Conv1d(const std::string& name, const ConvSpec& spec, bool bias);

  Tensor<Scalar> forward(const Tensor<Scalar>& x);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out, bool need_input_grad = true);

  const ConvSpec& spec() const { return spec_; }
  Parameter<Scalar>& weight() { return weight_; }
  Parameter<Scalar>* bias() { return bias_ ? &*bias_ : nullptr; }
  void collect(std::vector<Parameter<Scalar>*>& out);

 private:
  ConvSpec spec_;
  Parameter<Scalar> weight_;
  std::optional<Parameter<Scalar>> bias_;
  std::optional<Tensor<Scalar>> input_;
};

template <typename Scalar>
class ConvTranspose1d {
 public:
  ConvTranspose1d(const std::string& name, const ConvTransposeSpec& spec, bool bias);

  Tensor<Scalar> forward(const Tensor<Scalar>& x);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out, bool need_input_grad = true);

  const ConvTransposeSpec& spec() const { return spec_; }
  Parameter<Scalar>& weight() { return weight_; }
  void collect(std::vector<Parameter<Scalar>*>& out);

 private:
  ConvTransposeSpec spec_;
  Parameter<Scalar> weight_;
  std::optional<Parameter<Scalar>> bias_;
  std::optional<Tensor<Scalar>> input_;
};

template <typename Scalar>
class PRelu {
 public:
  explicit PRelu(const std::string& name, Scalar init = Scalar(0.25));

  Tensor<Scalar> forward(const Tensor<Scalar>& x);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out);

  Parameter<Scalar>& alpha() { return alpha_; }
  void collect(std::vector<Parameter<Scalar>*>& out) { out.push_back(&alpha_); }

 private:
  Parameter<Scalar> alpha_;
  std::optional<Tensor<Scalar>> input_;
};

template <typename Scalar>
class GlobalLayerNorm {
 public:
  GlobalLayerNorm(const std::string& name, Index channels);

  Tensor<Scalar> forward(const Tensor<Scalar>& x);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out);

  Parameter<Scalar>& gamma() { return gamma_; }
  Parameter<Scalar>& beta() { return beta_; }
  void collect(std::vector<Parameter<Scalar>*>& out);

 private:
  Parameter<Scalar> gamma_;
  Parameter<Scalar> beta_;
  std::optional<NormCache<Scalar>> cache_;
};

enum class Activation { kRelu, kSigmoid, kGelu, kIdentity };

template <typename Scalar>
class Pointwise {
 public:
  explicit Pointwise(Activation kind) : kind_(kind) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out);

 private:
  Activation kind_;
  std::optional<Tensor<Scalar>> cache_;
};

}  // namespace percept
