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

#include "percept/denoiser.hpp"

#include <random>
#include <stdexcept>

#include "percept/json_util.hpp"
#include "percept/sewf.hpp"

namespace percept {

namespace {

constexpr double kPassthroughMaskBias = 20.0;

std::string mask_activation_name(MaskActivation m) {
  return m == MaskActivation::kSigmoid ? "sigmoid" : "relu";
}

}  // namespace

DenoiserConfig DenoiserConfig::tiny() {
  DenoiserConfig cfg;
  cfg.n_spectral_filters = 8;
  cfg.n_spatial_filters = 4;
  cfg.frame_len = 4;
  cfg.bottleneck_channels = 8;
  cfg.block_channels = 16;
  cfg.tcn_kernel = 3;
  cfg.dilations = {1, 2};
  cfg.repeats = 1;
  cfg.n_mics = 2;
  return cfg;
}

DenoiserConfig DenoiserConfig::small() {
  DenoiserConfig cfg = tiny();
  cfg.n_spectral_filters = 32;
  cfg.n_spatial_filters = 16;
  cfg.frame_len = 16;
  cfg.bottleneck_channels = 32;
  cfg.block_channels = 64;
  cfg.dilations = {1, 2, 4, 8};
  cfg.sample_rate_hz = 16000;
  return cfg;
}

void DenoiserConfig::validate() const {
  auto positive = [](Index v, const char* what) {
    if (v < 1) throw ConfigError(std::string("denoiser: ") + what + " must be positive");
  };
  positive(n_spectral_filters, "n_spectral_filters");
  positive(n_spatial_filters, "n_spatial_filters");
  positive(bottleneck_channels, "bottleneck_channels");
  positive(block_channels, "block_channels");
  positive(repeats, "repeats");
  positive(n_mics, "n_mics");
  if (frame_len < 2 || frame_len % 2 != 0) {
    throw ConfigError("denoiser: frame_len must be even and at least 2");
  }
  if (tcn_kernel < 1 || tcn_kernel % 2 == 0) {
    throw ConfigError("denoiser: tcn_kernel must be odd");
  }
  if (dilations.empty()) throw ConfigError("denoiser: dilations must not be empty");
  for (Index d : dilations) positive(d, "dilation");
  if (sample_rate_hz <= 0) throw ConfigError("denoiser: sample_rate_hz must be positive");
}

Index DenoiserConfig::receptive_field_frames() const {
  Index sum = 0;
  for (Index d : dilations) sum += d;
  return 1 + (tcn_kernel - 1) * repeats * sum;
}

nlohmann::json to_json(const DenoiserConfig& cfg) {
  return {{"n_spectral_filters", cfg.n_spectral_filters},
          {"n_spatial_filters", cfg.n_spatial_filters},
          {"frame_len", cfg.frame_len},
          {"bottleneck_channels", cfg.bottleneck_channels},
          {"block_channels", cfg.block_channels},
          {"tcn_kernel", cfg.tcn_kernel},
          {"dilations", cfg.dilations},
          {"repeats", cfg.repeats},
          {"n_mics", cfg.n_mics},
          {"mask_activation", mask_activation_name(cfg.mask_activation)},
          {"sample_rate_hz", cfg.sample_rate_hz}};
}

DenoiserConfig denoiser_config_from_json(const nlohmann::json& j) {
  constexpr const char* where = "denoiser";
  reject_unknown_keys(j,
                      {"profile", "n_spectral_filters", "n_spatial_filters", "frame_len",
                       "bottleneck_channels", "block_channels", "tcn_kernel", "dilations",
                       "repeats", "n_mics", "mask_activation", "sample_rate_hz"},
                      where);
  std::string profile = "default";
  read_optional(j, "profile", profile, where);
  DenoiserConfig cfg;
  if (profile == "tiny") {
    cfg = DenoiserConfig::tiny();
  } else if (profile == "small") {
    cfg = DenoiserConfig::small();
  } else if (profile != "default") {
    throw ConfigError("denoiser: unknown profile \"" + profile + "\"");
  }
  read_optional(j, "n_spectral_filters", cfg.n_spectral_filters, where);
  read_optional(j, "n_spatial_filters", cfg.n_spatial_filters, where);
  read_optional(j, "frame_len", cfg.frame_len, where);
  read_optional(j, "bottleneck_channels", cfg.bottleneck_channels, where);
  read_optional(j, "block_channels", cfg.block_channels, where);
  read_optional(j, "tcn_kernel", cfg.tcn_kernel, where);
  read_optional(j, "dilations", cfg.dilations, where);
  read_optional(j, "repeats", cfg.repeats, where);
  read_optional(j, "n_mics", cfg.n_mics, where);
  std::string mask = mask_activation_name(cfg.mask_activation);
  read_optional(j, "mask_activation", mask, where);
  if (mask == "sigmoid") {
    cfg.mask_activation = MaskActivation::kSigmoid;
  } else if (mask == "relu") {
    cfg.mask_activation = MaskActivation::kRelu;
  } else {
    throw ConfigError("denoiser: unknown mask_activation \"" + mask + "\"");
  }
  read_optional(j, "sample_rate_hz", cfg.sample_rate_hz, where);
  cfg.validate();
  return cfg;
}

Index param_count(const DenoiserConfig& cfg) {
  cfg.validate();
  const Index fs = cfg.n_spectral_filters, fp = cfg.n_spatial_filters, l = cfg.frame_len;
  const Index b = cfg.bottleneck_channels, h = cfg.block_channels, f = fs + fp;
  Index n = fs * l + fs;                // spectral encoder
  n += fp * cfg.n_mics * l + fp;        // spatial encoder
  n += 2 * f;                           // input gLN
  n += b * f + b;                       // bottleneck
  const Index block = (h * b + h) + 1 + 2 * h + (h * cfg.tcn_kernel + h) + 1 + 2 * h +
                      2 * (b * h + b);
  n += cfg.num_blocks() * block;
  n += 1;                               // output PReLU
  n += fs * b + fs;                     // mask conv
  n += fs * l;                          // decoder
  return n;
}

template <typename Scalar>
std::size_t Denoiser<Scalar>::add_param(const std::string& name, std::vector<Index> dims) {
  params_.emplace_back(name, std::move(dims));
  return params_.size() - 1;
}

template <typename Scalar>
Denoiser<Scalar>::Denoiser(DenoiserConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  const Index fs = cfg_.n_spectral_filters, fp = cfg_.n_spatial_filters, l = cfg_.frame_len;
  const Index b = cfg_.bottleneck_channels, h = cfg_.block_channels;
  spec_w_ = add_param("spectral_encoder.weight", {fs, 1, l});
  spec_b_ = add_param("spectral_encoder.bias", {fs});
  spat_w_ = add_param("spatial_encoder.weight", {fp, 1, cfg_.n_mics, l});
  spat_b_ = add_param("spatial_encoder.bias", {fp});
  norm0_g_ = add_param("input_norm.gamma", {fs + fp});
  norm0_b_ = add_param("input_norm.beta", {fs + fp});
  bott_w_ = add_param("bottleneck.weight", {b, fs + fp, 1});
  bott_b_ = add_param("bottleneck.bias", {b});
  for (Index i = 0; i < cfg_.num_blocks(); ++i) {
    const std::string p = "tcn." + std::to_string(i) + ".";
    BlockIds ids{};
    ids.in_w = add_param(p + "in.weight", {h, b, 1});
    ids.in_b = add_param(p + "in.bias", {h});
    ids.prelu1 = add_param(p + "prelu1.alpha", {1});
    ids.norm1_g = add_param(p + "norm1.gamma", {h});
    ids.norm1_b = add_param(p + "norm1.beta", {h});
    ids.dw_w = add_param(p + "depthwise.weight", {h, 1, cfg_.tcn_kernel});
    ids.dw_b = add_param(p + "depthwise.bias", {h});
    ids.prelu2 = add_param(p + "prelu2.alpha", {1});
    ids.norm2_g = add_param(p + "norm2.gamma", {h});
    ids.norm2_b = add_param(p + "norm2.beta", {h});
    ids.res_w = add_param(p + "residual.weight", {b, h, 1});
    ids.res_b = add_param(p + "residual.bias", {b});
    ids.skip_w = add_param(p + "skip.weight", {b, h, 1});
    ids.skip_b = add_param(p + "skip.bias", {b});
    blocks_.push_back(ids);
  }
  out_prelu_ = add_param("output_prelu.alpha", {1});
  mask_w_ = add_param("mask.weight", {fs, b, 1});
  mask_b_ = add_param("mask.bias", {fs});
  dec_w_ = add_param("decoder.weight", {fs, 1, l});

  params_[norm0_g_].value.setOnes();
  for (const BlockIds& ids : blocks_) {
    params_[ids.norm1_g].value.setOnes();
    params_[ids.norm2_g].value.setOnes();
    params_[ids.prelu1].value.setConstant(Scalar(0.25));
    params_[ids.prelu2].value.setConstant(Scalar(0.25));
  }
  params_[out_prelu_].value.setConstant(Scalar(0.25));
  for (auto& p : params_) p.zero_grad();
}

template <typename Scalar>
Denoiser<Scalar> Denoiser<Scalar>::init_random(DenoiserConfig cfg, std::uint64_t seed) {
  Denoiser d(std::move(cfg));
  std::mt19937_64 rng(seed);
  for (auto& p : d.params_) {
    const std::string& n = p.name;
    if (n.size() < 7 || n.compare(n.size() - 7, 7, ".weight") != 0) continue;
    Index fan_in = 1;
    for (std::size_t k = 1; k < p.dims.size(); ++k) fan_in *= p.dims[k];
    kaiming_uniform(p.value, fan_in, rng);
  }
  return d;
}

template <typename Scalar>
void Denoiser<Scalar>::init_passthrough() {
  const Index l = cfg_.frame_len;
  if (cfg_.n_spectral_filters < 2 * l) {
    throw ConfigError("denoiser: passthrough needs at least 2 * frame_len spectral filters");
  }
  Tensor<Scalar>& enc = params_[spec_w_].value;
  Tensor<Scalar>& dec = params_[dec_w_].value;
  enc.setZero();
  dec.setZero();
  params_[spec_b_].value.setZero();
  // Every sample lies under exactly two frames, hence the 1/2.
  for (Index j = 0; j < l; ++j) {
    enc(j, j) = Scalar(1);
    enc(l + j, j) = Scalar(-1);
    dec(j, j) = Scalar(0.5);
    dec(l + j, j) = Scalar(-0.5);
  }
  params_[mask_w_].value.setZero();
  params_[mask_b_].value.setConstant(
      cfg_.mask_activation == MaskActivation::kSigmoid ? Scalar(kPassthroughMaskBias) : Scalar(1));
}

template <typename Scalar>
Denoiser<Scalar> Denoiser<Scalar>::load(const std::filesystem::path& path) {
  const std::vector<sewf::Entry> entries = sewf::read_file(path);
  if (entries.empty() || entries.front().name != "config") {
    throw sewf::FormatError(path.string() + ": first tensor must be the denoiser config");
  }
  DenoiserConfig cfg;
  try {
    cfg = denoiser_config_from_json(nlohmann::json::parse(sewf::entry_text(entries.front())));
  } catch (const nlohmann::json::exception& e) {
    throw sewf::FormatError(path.string() + ": malformed config record: " + e.what());
  }
  Denoiser d(cfg);
  if (entries.size() != d.params_.size() + 1) {
    throw sewf::FormatError(path.string() + ": config describes " +
                            std::to_string(d.params_.size()) + " tensors but the file holds " +
                            std::to_string(entries.size() - 1));
  }
  for (auto& p : d.params_) {
    const sewf::Entry* e = sewf::find(entries, p.name);
    if (!e) throw sewf::FormatError(path.string() + ": missing tensor " + p.name);
    sewf::load_into(*e, p);
  }
  return d;
}

template <typename Scalar>
void Denoiser<Scalar>::save(const std::filesystem::path& path) const {
  std::vector<sewf::Entry> entries;
  entries.push_back(sewf::text_entry("config", to_json(cfg_).dump()));
  for (const auto& p : params_) entries.push_back(sewf::tensor_entry(p));
  sewf::write_file(path, entries);
}

template <typename Scalar>
ConvSpec Denoiser<Scalar>::encoder_spec(Index in_channels, Index out_channels) const {
  ConvSpec s;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = cfg_.frame_len;
  s.stride = cfg_.stride();
  return s;
}

template <typename Scalar>
ConvSpec Denoiser<Scalar>::pointwise_spec(Index in, Index out) const {
  ConvSpec s;
  s.in_channels = in;
  s.out_channels = out;
  return s;
}

template <typename Scalar>
ConvSpec Denoiser<Scalar>::depthwise_spec(Index dilation) const {
  ConvSpec s;
  s.in_channels = cfg_.block_channels;
  s.out_channels = cfg_.block_channels;
  s.groups = cfg_.block_channels;
  s.kernel = cfg_.tcn_kernel;
  s.dilation = dilation;
  s.pad_left = s.pad_right = dilation * (cfg_.tcn_kernel - 1) / 2;
  return s;
}

template <typename Scalar>
ConvTransposeSpec Denoiser<Scalar>::decoder_spec() const {
  ConvTransposeSpec s;
  s.in_channels = cfg_.n_spectral_filters;
  s.out_channels = 1;
  s.kernel = cfg_.frame_len;
  s.stride = cfg_.stride();
  return s;
}

template <typename Scalar>
std::pair<Index, Index> Denoiser<Scalar>::padding(Index n) const {
  const Index s = cfg_.stride();
  return {s, s + (s - n % s) % s};
}

template <typename Scalar>
Vec<Scalar> Denoiser<Scalar>::forward(const Tensor<Scalar>& x, Trace* trace) const {
  if (x.rows() != cfg_.n_mics) {
    throw ShapeError("denoiser: expected " + std::to_string(cfg_.n_mics) + " channels, got " +
                     std::to_string(x.rows()));
  }
  const Index n = x.cols();
  if (n < cfg_.frame_len) {
    throw ShapeError("denoiser: input of " + std::to_string(n) +
                     " samples is shorter than the frame length " +
                     std::to_string(cfg_.frame_len));
  }
  const Index fs = cfg_.n_spectral_filters, fp = cfg_.n_spatial_filters;
  const Index b = cfg_.bottleneck_channels, h = cfg_.block_channels;
  const auto [pl, pr] = padding(n);

  Trace local;
  Trace& t = trace ? *trace : local;
  t = Trace{};
  t.padded = Tensor<Scalar>::Zero(x.rows(), pl + n + pr);
  t.padded.middleCols(pl, n) = x;

  const Tensor<Scalar> ref = t.padded.topRows(1);
  t.spec_pre = conv1d_forward(ref, w(spec_w_), &w(spec_b_), encoder_spec(1, fs));
  t.spat_pre = conv2d_forward(t.padded, w(spat_w_), &w(spat_b_), cfg_.n_mics, cfg_.frame_len,
                              cfg_.stride());
  t.spec = relu(t.spec_pre);
  const Index frames = t.spec.cols();

  Tensor<Scalar> cat(fs + fp, frames);
  cat.topRows(fs) = t.spec;
  cat.bottomRows(fp) = relu(t.spat_pre);
  t.n0 = global_layer_norm(cat, w(norm0_g_), w(norm0_b_), &t.norm0);
  Tensor<Scalar> y = conv1d_forward(t.n0, w(bott_w_), &w(bott_b_), pointwise_spec(fs + fp, b));

  t.skip_sum = Tensor<Scalar>::Zero(b, frames);
  t.blocks.resize(blocks_.size());
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const BlockIds& ids = blocks_[i];
    auto& c = t.blocks[i];
    const Index dilation = cfg_.dilations[i % cfg_.dilations.size()];
    c.input = y;
    c.h1 = conv1d_forward(y, w(ids.in_w), &w(ids.in_b), pointwise_spec(b, h));
    c.n1 = global_layer_norm(prelu(c.h1, scalar(ids.prelu1)), w(ids.norm1_g), w(ids.norm1_b),
                             &c.norm1);
    c.h2 = conv1d_forward(c.n1, w(ids.dw_w), &w(ids.dw_b), depthwise_spec(dilation));
    c.n2 = global_layer_norm(prelu(c.h2, scalar(ids.prelu2)), w(ids.norm2_g), w(ids.norm2_b),
                             &c.norm2);
    y += conv1d_forward(c.n2, w(ids.res_w), &w(ids.res_b), pointwise_spec(h, b));
    t.skip_sum += conv1d_forward(c.n2, w(ids.skip_w), &w(ids.skip_b), pointwise_spec(h, b));
  }

  t.mask_in = prelu(t.skip_sum, scalar(out_prelu_));
  t.mask_pre = conv1d_forward(t.mask_in, w(mask_w_), &w(mask_b_), pointwise_spec(b, fs));
  t.mask = cfg_.mask_activation == MaskActivation::kSigmoid ? sigmoid(t.mask_pre) : relu(t.mask_pre);
  t.masked = elementwise_mul(t.mask, t.spec);
  const Tensor<Scalar> out = conv_transpose1d_forward<Scalar>(t.masked, w(dec_w_), nullptr, decoder_spec());
  t.length = n;
  t.pad_left = pl;
  return out.row(0).segment(pl, n).transpose();
}

template <typename Scalar>
Vec<Scalar> Denoiser<Scalar>::forward(const AudioBuffer& x) const {
  require_rate(x, cfg_.sample_rate_hz, "denoiser");
  return forward(x.samples().template cast<Scalar>().eval());
}

template <typename Scalar>
typename Denoiser<Scalar>::Gradients Denoiser<Scalar>::zero_gradients() const {
  Gradients g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.push_back(Tensor<Scalar>::Zero(p.value.rows(), p.value.cols()));
  return g;
}

template <typename Scalar>
void Denoiser<Scalar>::backward(const Trace& t, const Vec<Scalar>& grad_shat,
                                Gradients& grads) const {
  if (!t.valid()) throw std::logic_error("denoiser: backward called without a forward pass");
  if (grad_shat.size() != t.length) {
    throw ShapeError("denoiser: gradient length " + std::to_string(grad_shat.size()) +
                     " does not match forward length " + std::to_string(t.length));
  }
  if (grads.size() != params_.size()) grads = zero_gradients();
  const Index fs = cfg_.n_spectral_filters, fp = cfg_.n_spatial_filters;
  const Index b = cfg_.bottleneck_channels, h = cfg_.block_channels;

  Tensor<Scalar> g_out = Tensor<Scalar>::Zero(1, t.padded.cols());
  g_out.row(0).segment(t.pad_left, t.length) = grad_shat.transpose();
  ConvGrads<Scalar> dec = conv_transpose1d_backward(t.masked, w(dec_w_), g_out, decoder_spec(), false);
  grads[dec_w_] += dec.weight;

  Tensor<Scalar> g_spec = elementwise_mul(dec.input, t.mask);
  const Tensor<Scalar> g_mask = elementwise_mul(dec.input, t.spec);
  const Tensor<Scalar> g_mask_pre = cfg_.mask_activation == MaskActivation::kSigmoid
                                        ? sigmoid_backward(t.mask, g_mask)
                                        : relu_backward(t.mask_pre, g_mask);
  ConvGrads<Scalar> mk = conv1d_backward(t.mask_in, w(mask_w_), g_mask_pre, pointwise_spec(b, fs), true);
  grads[mask_w_] += mk.weight;
  grads[mask_b_] += mk.bias;
  Scalar g_alpha = 0;
  const Tensor<Scalar> g_skip = prelu_backward(t.skip_sum, scalar(out_prelu_), mk.input, g_alpha);
  grads[out_prelu_](0, 0) += g_alpha;

  Tensor<Scalar> g_y = Tensor<Scalar>::Zero(b, t.spec.cols());
  for (std::size_t k = blocks_.size(); k-- > 0;) {
    const BlockIds& ids = blocks_[k];
    const auto& c = t.blocks[k];
    const Index dilation = cfg_.dilations[k % cfg_.dilations.size()];
    ConvGrads<Scalar> res = conv1d_backward(c.n2, w(ids.res_w), g_y, pointwise_spec(h, b), true);
    ConvGrads<Scalar> skip = conv1d_backward(c.n2, w(ids.skip_w), g_skip, pointwise_spec(h, b), true);
    grads[ids.res_w] += res.weight;
    grads[ids.res_b] += res.bias;
    grads[ids.skip_w] += skip.weight;
    grads[ids.skip_b] += skip.bias;

    NormGrads<Scalar> n2 = global_layer_norm_backward(c.norm2, w(ids.norm2_g), add(res.input, skip.input));
    grads[ids.norm2_g] += n2.gamma;
    grads[ids.norm2_b] += n2.beta;
    const Tensor<Scalar> g_h2 = prelu_backward(c.h2, scalar(ids.prelu2), n2.input, g_alpha);
    grads[ids.prelu2](0, 0) += g_alpha;
    ConvGrads<Scalar> dw = conv1d_backward(c.n1, w(ids.dw_w), g_h2, depthwise_spec(dilation), true);
    grads[ids.dw_w] += dw.weight;
    grads[ids.dw_b] += dw.bias;

    NormGrads<Scalar> n1 = global_layer_norm_backward(c.norm1, w(ids.norm1_g), dw.input);
    grads[ids.norm1_g] += n1.gamma;
    grads[ids.norm1_b] += n1.beta;
    const Tensor<Scalar> g_h1 = prelu_backward(c.h1, scalar(ids.prelu1), n1.input, g_alpha);
    grads[ids.prelu1](0, 0) += g_alpha;
    ConvGrads<Scalar> in = conv1d_backward(c.input, w(ids.in_w), g_h1, pointwise_spec(b, h), true);
    grads[ids.in_w] += in.weight;
    grads[ids.in_b] += in.bias;
    g_y += in.input;
  }

  ConvGrads<Scalar> bott = conv1d_backward(t.n0, w(bott_w_), g_y, pointwise_spec(fs + fp, b), true);
  grads[bott_w_] += bott.weight;
  grads[bott_b_] += bott.bias;
  NormGrads<Scalar> n0 = global_layer_norm_backward(t.norm0, w(norm0_g_), bott.input);
  grads[norm0_g_] += n0.gamma;
  grads[norm0_b_] += n0.beta;

  g_spec += n0.input.topRows(fs);
  const Tensor<Scalar> g_spat = n0.input.bottomRows(fp);
  const Tensor<Scalar> ref = t.padded.topRows(1);
  ConvGrads<Scalar> se = conv1d_backward(ref, w(spec_w_), relu_backward(t.spec_pre, g_spec),
                                         encoder_spec(1, fs), true, false);
  grads[spec_w_] += se.weight;
  grads[spec_b_] += se.bias;
  ConvGrads<Scalar> pe = conv1d_backward(t.padded, w(spat_w_), relu_backward(t.spat_pre, g_spat),
                                         encoder_spec(cfg_.n_mics, fp), true, false);
  grads[spat_w_] += pe.weight;
  grads[spat_b_] += pe.bias;
}

template <typename Scalar>
Vec<Scalar> Denoiser<Scalar>::reconstruct_spectral(const Vec<Scalar>& signal) const {
  const Index n = signal.size();
  if (n < cfg_.frame_len) throw ShapeError("denoiser: input shorter than the frame length");
  const auto [pl, pr] = padding(n);
  Tensor<Scalar> padded = Tensor<Scalar>::Zero(1, pl + n + pr);
  padded.row(0).segment(pl, n) = signal.transpose();
  const Tensor<Scalar> spec = relu(
      conv1d_forward(padded, w(spec_w_), &w(spec_b_), encoder_spec(1, cfg_.n_spectral_filters)));
  const Tensor<Scalar> out = conv_transpose1d_forward<Scalar>(spec, w(dec_w_), nullptr, decoder_spec());
  return out.row(0).segment(pl, n).transpose();
}

template <typename Scalar>
Index Denoiser<Scalar>::param_count() const {
  Index n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template class Denoiser<float>;
template class Denoiser<double>;

}  // namespace percept
