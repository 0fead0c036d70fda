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

#include "percept/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <random>
#include <stdexcept>

#include "percept/denoiser.hpp"
#include "percept/feature_encoder.hpp"
#include "percept/layers.hpp"
#include "percept/losses.hpp"

namespace percept {

namespace {

using T = Tensor<double>;
using V = Vec<double>;

T randn(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  T t(rows, cols);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = dist(rng);
  return t;
}

V randn_vec(Index n, std::mt19937_64& rng, double scale = 1.0) {
  return randn(n, 1, rng, scale);
}

Index rand_int(std::mt19937_64& rng, Index lo, Index hi) {
  return std::uniform_int_distribution<Index>(lo, hi)(rng);
}

// Inner product <a, b> over all entries.
template <typename A, typename B>
double dot(const A& a, const B& b) {
  return (a.array() * b.array()).sum();
}

class Suite {
 public:
  explicit Suite(const GradCheckOptions& opts) : opts_(opts) {}

  // Compares `analytic` with central differences of `loss` with respect to
  // the entries of `target`, which is perturbed in place and restored.
  template <typename Derived, typename Analytic>
  void compare(const std::string& name, Derived& target, const Analytic& analytic_in,
               const std::function<double()>& loss) {
    if (analytic_in.size() != target.size()) {
      throw std::logic_error("gradcheck " + name + ": gradient has the wrong size");
    }
    Derived analytic = analytic_in;
    if (opts_.corrupt_backward) analytic = (analytic.array() * 1.01 + 1e-3).matrix();
    Derived numeric(target.rows(), target.cols());
    for (Index i = 0; i < target.size(); ++i) {
      const double saved = target.data()[i];
      target.data()[i] = saved + opts_.step;
      const double up = loss();
      target.data()[i] = saved - opts_.step;
      const double down = loss();
      target.data()[i] = saved;
      numeric.data()[i] = (up - down) / (2.0 * opts_.step);
    }
    const double floor = kFloorFraction * numeric.cwiseAbs().maxCoeff();
    GradCheckResult& r = results_[name];
    r.name = name;
    for (Index i = 0; i < target.size(); ++i) {
      const double a = analytic.data()[i], n = numeric.data()[i];
      const double denom = std::max({std::abs(a), std::abs(n), floor});
      const double err = denom > 0.0 ? std::abs(a - n) / denom : 0.0;
      r.max_rel_error = std::max(r.max_rel_error, std::isfinite(err) ? err : 1e300);
    }
    r.entries += target.size();
    r.passed = r.max_rel_error < opts_.tolerance;
  }

  std::vector<GradCheckResult> results() const {
    std::vector<GradCheckResult> out;
    for (const auto& [name, r] : results_) out.push_back(r);
    return out;
  }

  const GradCheckOptions& options() const { return opts_; }

 private:
  // Entries far below the largest gradient in their tensor are compared
  // against that tensor's scale rather than their own magnitude.
  static constexpr double kFloorFraction = 1e-3;

  GradCheckOptions opts_;
  std::map<std::string, GradCheckResult> results_;
};

ConvSpec random_conv_spec(std::mt19937_64& rng, Index groups) {
  ConvSpec s;
  s.groups = groups;
  s.in_channels = groups * rand_int(rng, 1, 3);
  s.out_channels = groups * rand_int(rng, 1, 3);
  s.kernel = rand_int(rng, 1, 4);
  s.stride = rand_int(rng, 1, 3);
  s.dilation = rand_int(rng, 1, 2);
  s.pad_left = rand_int(rng, 0, 2);
  s.pad_right = rand_int(rng, 0, 2);
  return s;
}

void check_conv(Suite& suite, const std::string& name, const ConvSpec& spec,
                std::mt19937_64& rng) {
  T x = randn(spec.in_channels, 12 + rand_int(rng, 0, 6), rng);
  T w = randn(spec.out_channels, spec.in_channels / spec.groups * spec.kernel, rng);
  T b = randn(spec.out_channels, 1, rng);
  const T y = conv1d_forward(x, w, &b, spec);
  const T r = randn(y.rows(), y.cols(), rng);
  const ConvGrads<double> g = conv1d_backward(x, w, r, spec, true);
  auto loss = [&] { return dot(r, conv1d_forward(x, w, &b, spec)); };
  suite.compare(name + ".input", x, g.input, loss);
  suite.compare(name + ".weight", w, g.weight, loss);
  suite.compare(name + ".bias", b, g.bias, loss);
}

void check_layers(Suite& suite, std::mt19937_64& rng) {
  check_conv(suite, "conv1d", random_conv_spec(rng, 1), rng);
  check_conv(suite, "conv1d_grouped", random_conv_spec(rng, 2), rng);
  {
    ConvSpec s = random_conv_spec(rng, 3);
    s.in_channels = s.out_channels = 3;
    check_conv(suite, "conv1d_depthwise", s, rng);
  }
  {
    ConvSpec s;
    s.in_channels = rand_int(rng, 1, 4);
    s.out_channels = rand_int(rng, 1, 4);
    check_conv(suite, "conv1d_pointwise", s, rng);
  }
  {
    const Index c = rand_int(rng, 1, 4), k = rand_int(rng, 2, 4), stride = k / 2;
    T x = randn(c, 16, rng);
    T w = randn(3, c * k, rng);
    T b = randn(3, 1, rng);
    ConvSpec s;
    s.in_channels = c;
    s.out_channels = 3;
    s.kernel = k;
    s.stride = stride;
    const T y = conv2d_forward(x, w, &b, c, k, stride);
    const T r = randn(y.rows(), y.cols(), rng);
    const ConvGrads<double> g = conv1d_backward(x, w, r, s, true);
    auto loss = [&] { return dot(r, conv2d_forward(x, w, &b, c, k, stride)); };
    suite.compare("conv2d.input", x, g.input, loss);
    suite.compare("conv2d.weight", w, g.weight, loss);
  }
  {
    ConvTransposeSpec s;
    s.in_channels = rand_int(rng, 1, 4);
    s.out_channels = rand_int(rng, 1, 3);
    s.kernel = rand_int(rng, 1, 5);
    s.stride = rand_int(rng, 1, s.kernel);
    T x = randn(s.in_channels, 9, rng);
    T w = randn(s.in_channels, s.out_channels * s.kernel, rng);
    T b = randn(s.out_channels, 1, rng);
    const T y = conv_transpose1d_forward(x, w, &b, s);
    const T r = randn(y.rows(), y.cols(), rng);
    const ConvGrads<double> g = conv_transpose1d_backward(x, w, r, s, true);
    auto loss = [&] { return dot(r, conv_transpose1d_forward(x, w, &b, s)); };
    suite.compare("conv_transpose1d.input", x, g.input, loss);
    suite.compare("conv_transpose1d.weight", w, g.weight, loss);
    suite.compare("conv_transpose1d.bias", b, g.bias, loss);
  }

  T x = randn(4, 10, rng);
  const T r = randn(4, 10, rng);
  suite.compare("relu", x, relu_backward(x, r), [&] { return dot(r, relu(x)); });
  suite.compare("sigmoid", x, sigmoid_backward(sigmoid(x), r), [&] { return dot(r, sigmoid(x)); });
  suite.compare("gelu", x, gelu_backward(x, r), [&] { return dot(r, gelu(x)); });
  {
    T alpha = randn(1, 1, rng, 0.5);
    double g_alpha = 0.0;
    const T gx = prelu_backward(x, alpha(0, 0), r, g_alpha);
    auto loss = [&] { return dot(r, prelu(x, alpha(0, 0))); };
    suite.compare("prelu.input", x, gx, loss);
    suite.compare("prelu.alpha", alpha, T::Constant(1, 1, g_alpha), loss);
  }
  {
    T y = randn(4, 10, rng);
    suite.compare("elementwise_mul", x, elementwise_mul(r, y),
                  [&] { return dot(r, elementwise_mul(x, y)); });
  }
  for (int kind = 0; kind < 2; ++kind) {
    const std::string name = kind == 0 ? "global_layer_norm" : "channel_group_norm";
    T gamma = randn(4, 1, rng);
    T beta = randn(4, 1, rng);
    auto forward = [&](NormCache<double>* cache) {
      return kind == 0 ? global_layer_norm(x, gamma, beta, cache)
                       : channel_group_norm(x, gamma, beta, cache);
    };
    NormCache<double> cache;
    forward(&cache);
    const NormGrads<double> g = kind == 0 ? global_layer_norm_backward(cache, gamma, r)
                                          : channel_group_norm_backward(cache, gamma, r);
    auto loss = [&] { return dot(r, forward(nullptr)); };
    suite.compare(name + ".input", x, g.input, loss);
    suite.compare(name + ".gamma", gamma, g.gamma, loss);
    suite.compare(name + ".beta", beta, g.beta, loss);
  }
}

EncoderConfig small_encoder_config(int rate) {
  EncoderConfig cfg;
  cfg.layers = {{6, 5, 3}, {6, 3, 2}, {5, 2, 2}};
  cfg.input_rate_hz = rate;
  return cfg;
}

void check_encoder(Suite& suite, std::mt19937_64& rng, std::uint64_t seed) {
  const FeatureEncoder<double> enc = FeatureEncoder<double>::init_random(small_encoder_config(16000), seed);
  V x = randn_vec(60 + rand_int(rng, 0, 20), rng);
  EncoderTrace<double> trace;
  const T s = enc.encode(x, &trace).values;
  const T r = randn(s.rows(), s.cols(), rng);
  const V g = enc.encode_grad(trace, r);
  suite.compare("encoder.input", x, g, [&] { return dot(r, enc.encode(x).values); });
}

void check_losses(Suite& suite, std::mt19937_64& rng, std::uint64_t seed) {
  const FeatureEncoder<double> enc = FeatureEncoder<double>::init_random(small_encoder_config(16000), seed);
  const SnrLossParams params;
  const Index n = 80 + rand_int(rng, 0, 20);
  const V s = randn_vec(n, rng);
  V s_hat = s + randn_vec(n, rng, 0.5);

  suite.compare("loss_snr", s_hat, loss_snr(s, s_hat, params).grad,
                [&] { return loss_snr(s, s_hat, params, false).value; });
  suite.compare("loss_wlm", s_hat, loss_wlm(s, s_hat, 16000, enc).grad,
                [&] { return loss_wlm(s, s_hat, 16000, enc, false).value; });
  suite.compare("loss_joint", s_hat, loss_joint(s, s_hat, 16000, params, enc).grad,
                [&] { return loss_joint(s, s_hat, 16000, params, enc, {}, false).value; });
  {
    const Resampler resampler(8000, 16000);
    const V s8 = s.head(50);
    V s8_hat = s_hat.head(50);
    suite.compare("loss_wlm_resampled", s8_hat,
                  loss_wlm(s8, s8_hat, 8000, enc, true, &resampler).grad,
                  [&] { return loss_wlm(s8, s8_hat, 8000, enc, false, &resampler).value; });
  }
}

void check_denoiser(Suite& suite, std::mt19937_64& rng, std::uint64_t seed) {
  Denoiser<double> model = Denoiser<double>::init_random(DenoiserConfig::tiny(), seed);
  const Index n = 24 + rand_int(rng, 0, 9);
  const T x = randn(model.config().n_mics, n, rng);
  const V s = randn_vec(n, rng);
  const SnrLossParams params;

  DenoiserTrace<double> trace;
  const V s_hat = model.forward(x, &trace);
  const LossResult<double> l = loss_snr(s, s_hat, params);
  Denoiser<double>::Gradients grads;
  model.backward(trace, l.grad, grads);

  auto loss = [&] { return loss_snr(s, model.forward(x), params, false).value; };
  auto& ps = model.mutable_parameters();
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const std::string& name = ps[i].name;
    // Per-block parameters are pooled by their role across blocks.
    std::string key = name;
    if (name.rfind("tcn.", 0) == 0) key = "tcn." + name.substr(name.find('.', 4) + 1);
    suite.compare("denoiser." + key, ps[i].value, grads[i], loss);
  }
}

}  // namespace

bool is_gradcheck_module(std::string_view module) {
  return module == "all" || module == "layers" || module == "encoder" || module == "losses" ||
         module == "denoiser";
}

std::vector<GradCheckResult> run_gradcheck(std::string_view module,
                                           const GradCheckOptions& options) {
  if (!is_gradcheck_module(module)) {
    throw std::invalid_argument("unknown gradcheck module \"" + std::string(module) + "\"");
  }
  const bool all = module == "all";
  Suite suite(options);
  for (int k = 0; k < options.seeds; ++k) {
    const std::uint64_t seed = options.base_seed + static_cast<std::uint64_t>(k);
    std::mt19937_64 rng(seed);
    if (all || module == "layers") check_layers(suite, rng);
    if (all || module == "encoder") check_encoder(suite, rng, seed);
    if (all || module == "losses") check_losses(suite, rng, seed);
    if (all || module == "denoiser") check_denoiser(suite, rng, seed);
  }
  return suite.results();
}

}  // namespace percept
