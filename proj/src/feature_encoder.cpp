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

#include "percept/feature_encoder.hpp"

#include <random>

#include "percept/json_util.hpp"
#include "percept/sewf.hpp"

namespace percept {

EncoderConfig EncoderConfig::wavlm_base() {
  EncoderConfig cfg;
  const Index kernels[] = {10, 3, 3, 3, 3, 2, 2};
  const Index strides[] = {5, 2, 2, 2, 2, 2, 2};
  for (int i = 0; i < 7; ++i) cfg.layers.push_back({512, kernels[i], strides[i]});
  return cfg;
}

void EncoderConfig::validate() const {
  if (layers.empty()) throw ConfigError("encoder: at least one layer is required");
  for (const auto& l : layers) {
    if (l.out_channels <= 0 || l.kernel <= 0 || l.stride <= 0) {
      throw ConfigError("encoder: layer geometry must be positive");
    }
  }
  if (input_rate_hz <= 0) throw ConfigError("encoder: input rate must be positive");
}

Index EncoderConfig::receptive_field() const {
  Index rf = 1, jump = 1;
  for (const auto& l : layers) {
    rf += (l.kernel - 1) * jump;
    jump *= l.stride;
  }
  return rf;
}

Index EncoderConfig::hop() const {
  Index jump = 1;
  for (const auto& l : layers) jump *= l.stride;
  return jump;
}

Index EncoderConfig::frames(Index n) const {
  for (const auto& l : layers) {
    if (n < l.kernel) return 0;
    n = (n - l.kernel) / l.stride + 1;
  }
  return n;
}

nlohmann::json to_json(const EncoderConfig& cfg) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : cfg.layers) {
    layers.push_back({{"out_channels", l.out_channels}, {"kernel", l.kernel}, {"stride", l.stride}});
  }
  return {{"layers", layers},
          {"activation", "gelu"},
          {"norm", cfg.norm == EncoderNorm::kGroupNormFirstLayer ? "group_norm_first_layer" : "none"},
          {"input_rate_hz", cfg.input_rate_hz}};
}

EncoderConfig encoder_config_from_json(const nlohmann::json& j) {
  constexpr const char* where = "encoder";
  reject_unknown_keys(j, {"profile", "layers", "activation", "norm", "input_rate_hz"}, where);
  EncoderConfig cfg = EncoderConfig::wavlm_base();
  std::string profile = "wavlm-base-fe";
  read_optional(j, "profile", profile, where);
  if (profile != "wavlm-base-fe") throw ConfigError("encoder: unknown profile \"" + profile + "\"");
  if (j.contains("layers")) {
    cfg.layers.clear();
    for (const auto& l : j.at("layers")) {
      reject_unknown_keys(l, {"out_channels", "kernel", "stride"}, "encoder.layers[]");
      EncoderLayerSpec spec;
      read_optional(l, "out_channels", spec.out_channels, where);
      read_optional(l, "kernel", spec.kernel, where);
      read_optional(l, "stride", spec.stride, where);
      cfg.layers.push_back(spec);
    }
  }
  std::string activation = "gelu";
  read_optional(j, "activation", activation, where);
  if (activation != "gelu") throw ConfigError("encoder: only the gelu activation is supported");
  std::string norm = "group_norm_first_layer";
  read_optional(j, "norm", norm, where);
  if (norm == "group_norm_first_layer") {
    cfg.norm = EncoderNorm::kGroupNormFirstLayer;
  } else if (norm == "none") {
    cfg.norm = EncoderNorm::kNone;
  } else {
    throw ConfigError("encoder: unknown norm \"" + norm + "\"");
  }
  read_optional(j, "input_rate_hz", cfg.input_rate_hz, where);
  cfg.validate();
  return cfg;
}

template <typename Scalar>
FeatureEncoder<Scalar>::FeatureEncoder(EncoderConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Index in = 1;
  for (std::size_t i = 0; i < cfg_.layers.size(); ++i) {
    const auto& l = cfg_.layers[i];
    params_.emplace_back("conv." + std::to_string(i) + ".weight",
                         std::vector<Index>{l.out_channels, in, l.kernel});
    in = l.out_channels;
  }
  if (has_norm()) {
    const Index c0 = cfg_.layers.front().out_channels;
    params_.emplace_back("norm.gamma", std::vector<Index>{c0});
    params_.emplace_back("norm.beta", std::vector<Index>{c0});
    params_[cfg_.layers.size()].value.setOnes();
  }
}

template <typename Scalar>
FeatureEncoder<Scalar> FeatureEncoder<Scalar>::init_random(EncoderConfig cfg, std::uint64_t seed) {
  FeatureEncoder enc(std::move(cfg));
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < enc.cfg_.layers.size(); ++i) {
    Parameter<Scalar>& w = enc.params_[i];
    he_uniform(w.value, w.dims[1] * w.dims[2], rng);
  }
  return enc;
}

template <typename Scalar>
FeatureEncoder<Scalar> FeatureEncoder<Scalar>::load(const std::filesystem::path& path) {
  const std::vector<sewf::Entry> entries = sewf::read_file(path);
  if (entries.empty() || entries.front().name != "config") {
    throw sewf::FormatError(path.string() + ": first tensor must be the encoder config");
  }
  EncoderConfig cfg;
  try {
    cfg = encoder_config_from_json(nlohmann::json::parse(sewf::entry_text(entries.front())));
  } catch (const nlohmann::json::exception& e) {
    throw sewf::FormatError(path.string() + ": malformed config record: " + e.what());
  }
  FeatureEncoder enc(cfg);
  if (entries.size() != enc.params_.size() + 1) {
    throw sewf::FormatError(path.string() + ": config describes " +
                            std::to_string(cfg.layers.size()) + " layers (" +
                            std::to_string(enc.params_.size()) + " tensors) but the file holds " +
                            std::to_string(entries.size() - 1) + " tensors");
  }
  for (auto& p : enc.params_) {
    const sewf::Entry* e = sewf::find(entries, p.name);
    if (!e) throw sewf::FormatError(path.string() + ": missing tensor " + p.name);
    sewf::load_into(*e, p);
  }
  return enc;
}

template <typename Scalar>
void FeatureEncoder<Scalar>::save(const std::filesystem::path& path) const {
  std::vector<sewf::Entry> entries;
  entries.push_back(sewf::text_entry("config", to_json(cfg_).dump()));
  for (const auto& p : params_) entries.push_back(sewf::tensor_entry(p));
  sewf::write_file(path, entries);
}

template <typename Scalar>
ConvSpec FeatureEncoder<Scalar>::layer_spec(std::size_t i) const {
  ConvSpec spec;
  spec.in_channels = i == 0 ? 1 : cfg_.layers[i - 1].out_channels;
  spec.out_channels = cfg_.layers[i].out_channels;
  spec.kernel = cfg_.layers[i].kernel;
  spec.stride = cfg_.layers[i].stride;
  return spec;
}

template <typename Scalar>
FeatureMap<Scalar> FeatureEncoder<Scalar>::encode(const Vec<Scalar>& signal,
                                                  EncoderTrace<Scalar>* trace) const {
  if (cfg_.frames(signal.size()) < 1) {
    throw ShapeError("encoder: input of " + std::to_string(signal.size()) +
                     " samples is shorter than the receptive field of " +
                     std::to_string(cfg_.receptive_field()));
  }
  if (trace) *trace = EncoderTrace<Scalar>{};
  Tensor<Scalar> x = signal.transpose();
  const std::size_t n_layers = cfg_.layers.size();
  for (std::size_t i = 0; i < n_layers; ++i) {
    Tensor<Scalar> z = conv1d_forward<Scalar>(x, params_[i].value, nullptr, layer_spec(i));
    if (i == 0 && has_norm()) {
      z = channel_group_norm(z, params_[n_layers].value, params_[n_layers + 1].value,
                             trace ? &trace->norm : nullptr);
    }
    if (trace) trace->conv_inputs.push_back(std::move(x));
    x = gelu(z);
    if (trace) trace->activation_inputs.push_back(std::move(z));
  }
  return FeatureMap<Scalar>{std::move(x)};
}

template <typename Scalar>
FeatureMap<Scalar> FeatureEncoder<Scalar>::encode(const AudioBuffer& mono) const {
  if (mono.channels() != 1) throw ShapeError("encoder: expected a mono signal");
  require_rate(mono, cfg_.input_rate_hz, "encoder");
  return encode(mono.channel<Scalar>(0));
}

template <typename Scalar>
Vec<Scalar> FeatureEncoder<Scalar>::encode_grad(const EncoderTrace<Scalar>& trace,
                                                const Tensor<Scalar>& upstream) const {
  if (!trace.valid()) throw std::logic_error("encoder: encode_grad without a cached forward");
  const std::size_t n_layers = cfg_.layers.size();
  Tensor<Scalar> g = upstream;
  for (std::size_t i = n_layers; i-- > 0;) {
    g = gelu_backward(trace.activation_inputs[i], g);
    if (i == 0 && has_norm()) {
      g = channel_group_norm_backward(trace.norm, params_[n_layers].value, g).input;
    }
    g = conv1d_backward<Scalar>(trace.conv_inputs[i], params_[i].value, g, layer_spec(i),
                                /*has_bias=*/false, /*need_input_grad=*/true,
                                /*need_weight_grad=*/false)
            .input;
  }
  return g.row(0).transpose();
}

template class FeatureEncoder<float>;
template class FeatureEncoder<double>;

}  // namespace percept
