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

#include "percept/layers.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace percept {

namespace {

std::string dims_of(Index r, Index c) {
  std::ostringstream os;
  os << r << "x" << c;
  return os.str();
}

void expect_shape(const char* what, Index rows, Index cols, Index want_rows, Index want_cols) {
  if (rows != want_rows || cols != want_cols) {
    throw ShapeError(std::string(what) + ": expected " + dims_of(want_rows, want_cols) +
                     ", got " + dims_of(rows, cols));
  }
}

template <typename Scalar>
Tensor<Scalar> im2col(const Tensor<Scalar>& x, Index first_channel, Index channels,
                      const ConvSpec& s, Index t_out) {
  Tensor<Scalar> cols(channels * s.kernel, t_out);
  const Index n = x.cols();
  for (Index ci = 0; ci < channels; ++ci) {
    const Scalar* src = x.row(first_channel + ci).data();
    for (Index j = 0; j < s.kernel; ++j) {
      Scalar* dst = cols.row(ci * s.kernel + j).data();
      const Index offset = j * s.dilation - s.pad_left;
      for (Index t = 0; t < t_out; ++t) {
        const Index idx = t * s.stride + offset;
        dst[t] = (idx >= 0 && idx < n) ? src[idx] : Scalar(0);
      }
    }
  }
  return cols;
}

template <typename Scalar>
void col2im_add(const Tensor<Scalar>& cols, Index first_channel, Index channels,
                const ConvSpec& s, Tensor<Scalar>& grad_x) {
  const Index n = grad_x.cols();
  const Index t_out = cols.cols();
  for (Index ci = 0; ci < channels; ++ci) {
    Scalar* dst = grad_x.row(first_channel + ci).data();
    for (Index j = 0; j < s.kernel; ++j) {
      const Scalar* src = cols.row(ci * s.kernel + j).data();
      const Index offset = j * s.dilation - s.pad_left;
      for (Index t = 0; t < t_out; ++t) {
        const Index idx = t * s.stride + offset;
        if (idx >= 0 && idx < n) dst[idx] += src[t];
      }
    }
  }
}

bool is_pointwise(const ConvSpec& s) {
  return s.kernel == 1 && s.stride == 1 && s.groups == 1 && s.pad_left == 0 && s.pad_right == 0;
}

bool is_depthwise(const ConvSpec& s) {
  return s.groups == s.in_channels && s.groups == s.out_channels;
}

}  // namespace

void ConvSpec::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0 || dilation <= 0 ||
      groups <= 0 || pad_left < 0 || pad_right < 0) {
    throw ShapeError("conv1d: non-positive geometry");
  }
  if (in_channels % groups != 0 || out_channels % groups != 0) {
    throw ShapeError("conv1d: channels not divisible by groups");
  }
}

Index ConvSpec::output_length(Index n) const {
  const Index padded = n + pad_left + pad_right;
  if (padded < receptive()) {
    std::ostringstream os;
    os << "conv1d: input of length " << n << " shorter than receptive field " << receptive();
    throw ShapeError(os.str());
  }
  return (padded - receptive()) / stride + 1;
}

void ConvTransposeSpec::validate() const {
  if (in_channels <= 0 || out_channels <= 0 || kernel <= 0 || stride <= 0) {
    throw ShapeError("conv_transpose1d: non-positive geometry");
  }
}

template <typename Scalar>
Tensor<Scalar> conv1d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                              const Tensor<Scalar>* bias, const ConvSpec& s) {
  s.validate();
  const Index cin_g = s.in_channels / s.groups;
  const Index cout_g = s.out_channels / s.groups;
  if (input.rows() != s.in_channels) {
    throw ShapeError("conv1d: input has " + std::to_string(input.rows()) + " channels, expected " +
                     std::to_string(s.in_channels));
  }
  expect_shape("conv1d weight", weight.rows(), weight.cols(), s.out_channels, cin_g * s.kernel);
  if (bias) expect_shape("conv1d bias", bias->rows(), bias->cols(), s.out_channels, 1);
  const Index t_out = s.output_length(input.cols());

  Tensor<Scalar> out(s.out_channels, t_out);
  if (is_pointwise(s)) {
    out.noalias() = weight * input;
  } else if (is_depthwise(s)) {
    const Index n = input.cols();
    for (Index c = 0; c < s.out_channels; ++c) {
      const Scalar* src = input.row(c).data();
      Scalar* dst = out.row(c).data();
      for (Index t = 0; t < t_out; ++t) dst[t] = Scalar(0);
      for (Index j = 0; j < s.kernel; ++j) {
        const Scalar w = weight(c, j);
        const Index offset = j * s.dilation - s.pad_left;
        for (Index t = 0; t < t_out; ++t) {
          const Index idx = t * s.stride + offset;
          if (idx >= 0 && idx < n) dst[t] += w * src[idx];
        }
      }
    }
  } else {
    for (Index g = 0; g < s.groups; ++g) {
      const Tensor<Scalar> cols = im2col(input, g * cin_g, cin_g, s, t_out);
      out.middleRows(g * cout_g, cout_g).noalias() = weight.middleRows(g * cout_g, cout_g) * cols;
    }
  }
  if (bias) out.colwise() += bias->col(0);
  PERCEPT_CHECK_FINITE(out, "conv1d output");
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv1d_backward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                  const Tensor<Scalar>& grad_out, const ConvSpec& s,
                                  bool has_bias, bool need_input_grad, bool need_weight_grad) {
  s.validate();
  const Index cin_g = s.in_channels / s.groups;
  const Index cout_g = s.out_channels / s.groups;
  const Index t_out = s.output_length(input.cols());
  expect_shape("conv1d grad_out", grad_out.rows(), grad_out.cols(), s.out_channels, t_out);

  ConvGrads<Scalar> g;
  g.weight.setZero(weight.rows(), weight.cols());
  if (has_bias) g.bias = grad_out.rowwise().sum();
  if (need_input_grad) g.input.setZero(input.rows(), input.cols());

  if (is_pointwise(s)) {
    if (need_weight_grad) g.weight.noalias() = grad_out * input.transpose();
    if (need_input_grad) g.input.noalias() = weight.transpose() * grad_out;
  } else if (is_depthwise(s)) {
    const Index n = input.cols();
    for (Index c = 0; c < s.out_channels; ++c) {
      const Scalar* x = input.row(c).data();
      const Scalar* go = grad_out.row(c).data();
      for (Index j = 0; j < s.kernel; ++j) {
        const Index offset = j * s.dilation - s.pad_left;
        Scalar acc(0);
        for (Index t = 0; t < t_out; ++t) {
          const Index idx = t * s.stride + offset;
          if (idx >= 0 && idx < n) acc += go[t] * x[idx];
        }
        g.weight(c, j) = acc;
        if (need_input_grad) {
          const Scalar w = weight(c, j);
          Scalar* gi = g.input.row(c).data();
          for (Index t = 0; t < t_out; ++t) {
            const Index idx = t * s.stride + offset;
            if (idx >= 0 && idx < n) gi[idx] += w * go[t];
          }
        }
      }
    }
  } else {
    for (Index grp = 0; grp < s.groups; ++grp) {
      const Tensor<Scalar> cols = im2col(input, grp * cin_g, cin_g, s, t_out);
      const auto go = grad_out.middleRows(grp * cout_g, cout_g);
      if (need_weight_grad) {
        g.weight.middleRows(grp * cout_g, cout_g).noalias() = go * cols.transpose();
      }
      if (need_input_grad) {
        Tensor<Scalar> grad_cols = weight.middleRows(grp * cout_g, cout_g).transpose() * go;
        col2im_add(grad_cols, grp * cin_g, cin_g, s, g.input);
      }
    }
  }
  return g;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                              const Tensor<Scalar>* bias, Index kernel_height, Index kernel,
                              Index stride) {
  if (kernel_height != input.rows()) {
    throw ShapeError("conv2d: kernel height " + std::to_string(kernel_height) +
                     " does not span the " + std::to_string(input.rows()) + " input channels");
  }
  ConvSpec spec;
  spec.in_channels = input.rows();
  spec.out_channels = weight.rows();
  spec.kernel = kernel;
  spec.stride = stride;
  return conv1d_forward(input, weight, bias, spec);
}

template <typename Scalar>
Tensor<Scalar> conv_transpose1d_forward(const Tensor<Scalar>& input, const Tensor<Scalar>& weight,
                                        const Tensor<Scalar>* bias,
                                        const ConvTransposeSpec& s) {
  s.validate();
  if (input.rows() != s.in_channels) throw ShapeError("conv_transpose1d: input channel mismatch");
  expect_shape("conv_transpose1d weight", weight.rows(), weight.cols(), s.in_channels,
               s.out_channels * s.kernel);
  if (bias) expect_shape("conv_transpose1d bias", bias->rows(), bias->cols(), s.out_channels, 1);
  const Index t_in = input.cols();
  if (t_in < 1) throw ShapeError("conv_transpose1d: empty input");
  const Tensor<Scalar> cols = weight.transpose() * input;
  Tensor<Scalar> out = Tensor<Scalar>::Zero(s.out_channels, s.output_length(t_in));
  for (Index co = 0; co < s.out_channels; ++co) {
    Scalar* dst = out.row(co).data();
    for (Index j = 0; j < s.kernel; ++j) {
      const Scalar* src = cols.row(co * s.kernel + j).data();
      for (Index t = 0; t < t_in; ++t) dst[t * s.stride + j] += src[t];
    }
  }
  if (bias) out.colwise() += bias->col(0);
  PERCEPT_CHECK_FINITE(out, "conv_transpose1d output");
  return out;
}

template <typename Scalar>
ConvGrads<Scalar> conv_transpose1d_backward(const Tensor<Scalar>& input,
                                            const Tensor<Scalar>& weight,
                                            const Tensor<Scalar>& grad_out,
                                            const ConvTransposeSpec& s, bool has_bias,
                                            bool need_input_grad) {
  s.validate();
  const Index t_in = input.cols();
  expect_shape("conv_transpose1d grad_out", grad_out.rows(), grad_out.cols(), s.out_channels,
               s.output_length(t_in));
  Tensor<Scalar> grad_cols(s.out_channels * s.kernel, t_in);
  for (Index co = 0; co < s.out_channels; ++co) {
    const Scalar* src = grad_out.row(co).data();
    for (Index j = 0; j < s.kernel; ++j) {
      Scalar* dst = grad_cols.row(co * s.kernel + j).data();
      for (Index t = 0; t < t_in; ++t) dst[t] = src[t * s.stride + j];
    }
  }
  ConvGrads<Scalar> g;
  g.weight.noalias() = input * grad_cols.transpose();
  if (need_input_grad) g.input.noalias() = weight * grad_cols;
  if (has_bias) g.bias = grad_out.rowwise().sum();
  return g;
}

template <typename Scalar>
Tensor<Scalar> relu(const Tensor<Scalar>& x) {
  return x.cwiseMax(Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> relu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  expect_shape("relu grad", grad_out.rows(), grad_out.cols(), x.rows(), x.cols());
  return (x.array() > Scalar(0)).select(grad_out, Scalar(0));
}

template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  return x.unaryExpr([](Scalar v) {
    if (v >= Scalar(0)) return Scalar(1) / (Scalar(1) + std::exp(-v));
    const Scalar e = std::exp(v);
    return e / (Scalar(1) + e);
  });
}

template <typename Scalar>
Tensor<Scalar> sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& grad_out) {
  expect_shape("sigmoid grad", grad_out.rows(), grad_out.cols(), y.rows(), y.cols());
  return (grad_out.array() * y.array() * (Scalar(1) - y.array())).matrix();
}

namespace {
constexpr double kGeluCubic = 0.044715;
constexpr double kSqrt2OverPi = 0.79788456080286535588;  // sqrt(2 / pi)
}  // namespace

template <typename Scalar>
Tensor<Scalar> gelu(const Tensor<Scalar>& x) {
  return x.unaryExpr([](Scalar v) {
    const Scalar u = Scalar(kSqrt2OverPi) * (v + Scalar(kGeluCubic) * v * v * v);
    return Scalar(0.5) * v * (Scalar(1) + std::tanh(u));
  });
}

template <typename Scalar>
Tensor<Scalar> gelu_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& grad_out) {
  expect_shape("gelu grad", grad_out.rows(), grad_out.cols(), x.rows(), x.cols());
  const Tensor<Scalar> slope = x.unaryExpr([](Scalar v) {
    const Scalar u = Scalar(kSqrt2OverPi) * (v + Scalar(kGeluCubic) * v * v * v);
    const Scalar th = std::tanh(u);
    const Scalar du = Scalar(kSqrt2OverPi) * (Scalar(1) + Scalar(3 * kGeluCubic) * v * v);
    return Scalar(0.5) * (Scalar(1) + th) + Scalar(0.5) * v * (Scalar(1) - th * th) * du;
  });
  return grad_out.cwiseProduct(slope);
}

template <typename Scalar>
Tensor<Scalar> prelu(const Tensor<Scalar>& x, Scalar alpha) {
  return x.unaryExpr([alpha](Scalar v) { return v >= Scalar(0) ? v : alpha * v; });
}

template <typename Scalar>
Tensor<Scalar> prelu_backward(const Tensor<Scalar>& x, Scalar alpha,
                              const Tensor<Scalar>& grad_out, Scalar& grad_alpha) {
  expect_shape("prelu grad", grad_out.rows(), grad_out.cols(), x.rows(), x.cols());
  const auto negative = (x.array() < Scalar(0));
  grad_alpha = negative.select(grad_out.array() * x.array(), Scalar(0)).sum();
  return negative.select(alpha * grad_out.array(), grad_out.array()).matrix();
}

template <typename Scalar>
Tensor<Scalar> elementwise_mul(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  expect_shape("elementwise_mul", b.rows(), b.cols(), a.rows(), a.cols());
  return a.cwiseProduct(b);
}

template <typename Scalar>
Tensor<Scalar> add(const Tensor<Scalar>& a, const Tensor<Scalar>& b) {
  expect_shape("add", b.rows(), b.cols(), a.rows(), a.cols());
  return a + b;
}

namespace {

template <typename Scalar>
void expect_affine(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                   const Tensor<Scalar>& beta) {
  expect_shape("norm gamma", gamma.rows(), gamma.cols(), x.rows(), 1);
  expect_shape("norm beta", beta.rows(), beta.cols(), x.rows(), 1);
  if (x.cols() < 1) throw ShapeError("norm: empty time axis");
}

}  // namespace

template <typename Scalar>
Tensor<Scalar> global_layer_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                 const Tensor<Scalar>& beta, NormCache<Scalar>* cache) {
  expect_affine(x, gamma, beta);
  const Scalar count = static_cast<Scalar>(x.size());
  const Scalar mean = x.sum() / count;
  const Scalar var = (x.array() - mean).square().sum() / count;
  const Scalar inv_std = Scalar(1) / std::sqrt(var + Scalar(kGlobalLayerNormEps));
  Tensor<Scalar> normalized = ((x.array() - mean) * inv_std).matrix();
  Tensor<Scalar> out = (normalized.array().colwise() * gamma.col(0).array()).matrix();
  out.colwise() += beta.col(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = Vec<Scalar>::Constant(1, inv_std);
  }
  return out;
}

template <typename Scalar>
NormGrads<Scalar> global_layer_norm_backward(const NormCache<Scalar>& cache,
                                             const Tensor<Scalar>& gamma,
                                             const Tensor<Scalar>& grad_out) {
  const Tensor<Scalar>& xhat = cache.normalized;
  expect_shape("gLN grad", grad_out.rows(), grad_out.cols(), xhat.rows(), xhat.cols());
  NormGrads<Scalar> g;
  g.gamma = grad_out.cwiseProduct(xhat).rowwise().sum();
  g.beta = grad_out.rowwise().sum();
  const Tensor<Scalar> gxhat = (grad_out.array().colwise() * gamma.col(0).array()).matrix();
  const Scalar count = static_cast<Scalar>(xhat.size());
  const Scalar mean_g = gxhat.sum() / count;
  const Scalar mean_gx = gxhat.cwiseProduct(xhat).sum() / count;
  g.input = (cache.inv_std(0) * (gxhat.array() - mean_g - xhat.array() * mean_gx)).matrix();
  return g;
}

template <typename Scalar>
Tensor<Scalar> channel_group_norm(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                  const Tensor<Scalar>& beta, NormCache<Scalar>* cache) {
  expect_affine(x, gamma, beta);
  const Scalar count = static_cast<Scalar>(x.cols());
  Tensor<Scalar> normalized(x.rows(), x.cols());
  Vec<Scalar> inv_std(x.rows());
  for (Index r = 0; r < x.rows(); ++r) {
    const Scalar mean = x.row(r).sum() / count;
    const Scalar var = (x.row(r).array() - mean).square().sum() / count;
    inv_std(r) = Scalar(1) / std::sqrt(var + Scalar(kGroupNormEps));
    normalized.row(r) = (x.row(r).array() - mean) * inv_std(r);
  }
  Tensor<Scalar> out = (normalized.array().colwise() * gamma.col(0).array()).matrix();
  out.colwise() += beta.col(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

template <typename Scalar>
NormGrads<Scalar> channel_group_norm_backward(const NormCache<Scalar>& cache,
                                              const Tensor<Scalar>& gamma,
                                              const Tensor<Scalar>& grad_out) {
  const Tensor<Scalar>& xhat = cache.normalized;
  expect_shape("group norm grad", grad_out.rows(), grad_out.cols(), xhat.rows(), xhat.cols());
  NormGrads<Scalar> g;
  g.gamma = grad_out.cwiseProduct(xhat).rowwise().sum();
  g.beta = grad_out.rowwise().sum();
  g.input.resize(xhat.rows(), xhat.cols());
  const Scalar count = static_cast<Scalar>(xhat.cols());
  for (Index r = 0; r < xhat.rows(); ++r) {
    const auto gxhat = (grad_out.row(r) * gamma(r, 0)).array();
    const Scalar mean_g = gxhat.sum() / count;
    const Scalar mean_gx = (gxhat * xhat.row(r).array()).sum() / count;
    g.input.row(r) = cache.inv_std(r) * (gxhat - mean_g - xhat.row(r).array() * mean_gx);
  }
  return g;
}

// Layer wrappers.

namespace {

[[noreturn]] void throw_no_forward(const std::string& who) {
  throw std::logic_error(who + ": backward called without a cached forward");
}

}  // namespace

template <typename Scalar>
Conv1d<Scalar>::Conv1d(const std::string& name, const ConvSpec& spec, bool bias)
    : spec_(spec), weight_(name + ".weight", spec.weight_dims()) {
  spec_.validate();
  if (bias) bias_.emplace(name + ".bias", std::vector<Index>{spec.out_channels});
}

template <typename Scalar>
Tensor<Scalar> Conv1d<Scalar>::forward(const Tensor<Scalar>& x) {
  Tensor<Scalar> out = conv1d_forward(x, weight_.value, bias_ ? &bias_->value : nullptr, spec_);
  input_ = x;
  return out;
}

template <typename Scalar>
Tensor<Scalar> Conv1d<Scalar>::backward(const Tensor<Scalar>& grad_out, bool need_input_grad) {
  if (!input_) throw_no_forward(weight_.name);
  ConvGrads<Scalar> g =
      conv1d_backward(*input_, weight_.value, grad_out, spec_, bias_.has_value(), need_input_grad);
  input_.reset();
  weight_.grad += g.weight;
  if (bias_) bias_->grad += g.bias;
  return std::move(g.input);
}

template <typename Scalar>
void Conv1d<Scalar>::collect(std::vector<Parameter<Scalar>*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

template <typename Scalar>
ConvTranspose1d<Scalar>::ConvTranspose1d(const std::string& name, const ConvTransposeSpec& spec,
                                         bool bias)
    : spec_(spec), weight_(name + ".weight", spec.weight_dims()) {
  spec_.validate();
  if (bias) bias_.emplace(name + ".bias", std::vector<Index>{spec.out_channels});
}

template <typename Scalar>
Tensor<Scalar> ConvTranspose1d<Scalar>::forward(const Tensor<Scalar>& x) {
  Tensor<Scalar> out =
      conv_transpose1d_forward(x, weight_.value, bias_ ? &bias_->value : nullptr, spec_);
  input_ = x;
  return out;
}

template <typename Scalar>
Tensor<Scalar> ConvTranspose1d<Scalar>::backward(const Tensor<Scalar>& grad_out,
                                                 bool need_input_grad) {
  if (!input_) throw_no_forward(weight_.name);
  ConvGrads<Scalar> g = conv_transpose1d_backward(*input_, weight_.value, grad_out, spec_,
                                                  bias_.has_value(), need_input_grad);
  input_.reset();
  weight_.grad += g.weight;
  if (bias_) bias_->grad += g.bias;
  return std::move(g.input);
}

template <typename Scalar>
void ConvTranspose1d<Scalar>::collect(std::vector<Parameter<Scalar>*>& out) {
  out.push_back(&weight_);
  if (bias_) out.push_back(&*bias_);
}

template <typename Scalar>
PRelu<Scalar>::PRelu(const std::string& name, Scalar init)
    : alpha_(name + ".alpha", std::vector<Index>{1}) {
  alpha_.value(0, 0) = init;
}

template <typename Scalar>
Tensor<Scalar> PRelu<Scalar>::forward(const Tensor<Scalar>& x) {
  input_ = x;
  return prelu(x, alpha_.value(0, 0));
}

template <typename Scalar>
Tensor<Scalar> PRelu<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  if (!input_) throw_no_forward(alpha_.name);
  Scalar ga(0);
  Tensor<Scalar> gi = prelu_backward(*input_, alpha_.value(0, 0), grad_out, ga);
  input_.reset();
  alpha_.grad(0, 0) += ga;
  return gi;
}

template <typename Scalar>
GlobalLayerNorm<Scalar>::GlobalLayerNorm(const std::string& name, Index channels)
    : gamma_(name + ".gamma", {channels}), beta_(name + ".beta", {channels}) {
  gamma_.value.setOnes();
}

template <typename Scalar>
Tensor<Scalar> GlobalLayerNorm<Scalar>::forward(const Tensor<Scalar>& x) {
  NormCache<Scalar> cache;
  Tensor<Scalar> out = global_layer_norm(x, gamma_.value, beta_.value, &cache);
  cache_ = std::move(cache);
  return out;
}

template <typename Scalar>
Tensor<Scalar> GlobalLayerNorm<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  if (!cache_) throw_no_forward(gamma_.name);
  NormGrads<Scalar> g = global_layer_norm_backward(*cache_, gamma_.value, grad_out);
  cache_.reset();
  gamma_.grad += g.gamma;
  beta_.grad += g.beta;
  return std::move(g.input);
}

template <typename Scalar>
void GlobalLayerNorm<Scalar>::collect(std::vector<Parameter<Scalar>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename Scalar>
Tensor<Scalar> Pointwise<Scalar>::forward(const Tensor<Scalar>& x) {
  switch (kind_) {
    case Activation::kRelu:
      cache_ = x;
      return relu(x);
    case Activation::kGelu:
      cache_ = x;
      return gelu(x);
    case Activation::kSigmoid: {
      Tensor<Scalar> y = sigmoid(x);
      cache_ = y;
      return y;
    }
    case Activation::kIdentity:
      cache_ = Tensor<Scalar>();
      return x;
  }
  throw std::logic_error("unknown activation");
}

template <typename Scalar>
Tensor<Scalar> Pointwise<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  if (!cache_) throw_no_forward("activation");
  Tensor<Scalar> cached = std::move(*cache_);
  cache_.reset();
  switch (kind_) {
    case Activation::kRelu:
      return relu_backward(cached, grad_out);
    case Activation::kGelu:
      return gelu_backward(cached, grad_out);
    case Activation::kSigmoid:
      return sigmoid_backward(cached, grad_out);
    case Activation::kIdentity:
      return grad_out;
  }
  throw std::logic_error("unknown activation");
}

#define PERCEPT_INSTANTIATE_LAYERS(S)                                                           \
  template Tensor<S> conv1d_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*,    \
                                       const ConvSpec&);                                        \
  template ConvGrads<S> conv1d_backward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                           const ConvSpec&, bool, bool, bool);                  \
  template Tensor<S> conv2d_forward<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>*,    \
                                       Index, Index, Index);                                    \
  template Tensor<S> conv_transpose1d_forward<S>(const Tensor<S>&, const Tensor<S>&,            \
                                                 const Tensor<S>*, const ConvTransposeSpec&);   \
  template ConvGrads<S> conv_transpose1d_backward<S>(const Tensor<S>&, const Tensor<S>&,        \
                                                     const Tensor<S>&, const ConvTransposeSpec&, \
                                                     bool, bool);                               \
  template Tensor<S> relu<S>(const Tensor<S>&);                                                 \
  template Tensor<S> relu_backward<S>(const Tensor<S>&, const Tensor<S>&);                      \
  template Tensor<S> sigmoid<S>(const Tensor<S>&);                                              \
  template Tensor<S> sigmoid_backward<S>(const Tensor<S>&, const Tensor<S>&);                   \
  template Tensor<S> gelu<S>(const Tensor<S>&);                                                 \
  template Tensor<S> gelu_backward<S>(const Tensor<S>&, const Tensor<S>&);                      \
  template Tensor<S> prelu<S>(const Tensor<S>&, S);                                             \
  template Tensor<S> prelu_backward<S>(const Tensor<S>&, S, const Tensor<S>&, S&);              \
  template Tensor<S> elementwise_mul<S>(const Tensor<S>&, const Tensor<S>&);                    \
  template Tensor<S> add<S>(const Tensor<S>&, const Tensor<S>&);                                \
  template Tensor<S> global_layer_norm<S>(const Tensor<S>&, const Tensor<S>&, const Tensor<S>&, \
                                          NormCache<S>*);                                       \
  template NormGrads<S> global_layer_norm_backward<S>(const NormCache<S>&, const Tensor<S>&,    \
                                                      const Tensor<S>&);                        \
  template Tensor<S> channel_group_norm<S>(const Tensor<S>&, const Tensor<S>&,                  \
                                           const Tensor<S>&, NormCache<S>*);                    \
  template NormGrads<S> channel_group_norm_backward<S>(const NormCache<S>&, const Tensor<S>&,   \
                                                       const Tensor<S>&);                       \
  template class Conv1d<S>;                                                                     \
  template class ConvTranspose1d<S>;                                                            \
  template class PRelu<S>;                                                                      \
  template class GlobalLayerNorm<S>;                                                            \
  template class Pointwise<S>;

PERCEPT_INSTANTIATE_LAYERS(float)
PERCEPT_INSTANTIATE_LAYERS(double)

}  // namespace percept
