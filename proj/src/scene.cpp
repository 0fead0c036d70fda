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

#include "percept/scene.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <numbers>
#include <random>
#include <thread>

#include "percept/json_util.hpp"
#include "percept/wav.hpp"
#include "spectral.hpp"

namespace percept {

namespace {

constexpr double kSpeedOfSound = 343.0;
constexpr double kEarOffsetM = 0.09;
constexpr double kMicSpacingM = 0.0076;
constexpr double kBaseDelaySamples = 2.0;
constexpr Index kSincHalfWidth = 32;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double envelope(double t, double phase) {
  return 0.05 + 0.95 * 0.5 * (1.0 + std::sin(2.0 * std::numbers::pi * kAmModulationHz * t + phase));
}

void normalize_rms(Vec<double>& x) {
  const double rms = std::sqrt(x.squaredNorm() / static_cast<double>(x.size()));
  if (rms > 0.0) x *= kSourceRms / rms;
}

double sinc(double t) {
  if (t == 0.0) return 1.0;
  const double a = std::numbers::pi * t;
  return std::sin(a) / a;
}

double blackman(double t, double half_width) {
  if (std::abs(t) >= half_width) return 0.0;
  const double u = std::numbers::pi * t / half_width;
  return 0.42 + 0.5 * std::cos(u) + 0.08 * std::cos(2.0 * u);
}

bool safe_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

void check_placement(const SourcePlacement& p, int mics, const std::string& where) {
  if (p.path.empty()) throw SceneError(where + ": missing path");
  if (static_cast<int>(p.delays.size()) != mics || static_cast<int>(p.gains.size()) != mics) {
    throw SceneError(where + ": expected " + std::to_string(mics) + " delays and gains");
  }
  for (double d : p.delays) {
    if (!(d >= 0.0) || !std::isfinite(d)) throw SceneError(where + ": delays must be finite and >= 0");
  }
  for (double g : p.gains) {
    if (!std::isfinite(g)) throw SceneError(where + ": gains must be finite");
  }
}

Vec<double> read_mono(const std::filesystem::path& path, int rate, const std::string& who) {
  if (!std::filesystem::exists(path)) throw SceneError(who + ": missing source file " + path.string());
  const AudioBuffer buf = read_wav(path);
  if (buf.channels() != 1) throw SceneError(who + ": " + path.string() + " is not mono");
  require_rate(buf, rate, who.c_str());
  return buf.channel<double>(0);
}

Vec<double> fit_length(const Vec<double>& x, Index n) {
  Vec<double> y = Vec<double>::Zero(n);
  const Index m = std::min(n, x.size());
  y.head(m) = x.head(m);
  return y;
}

// Plane-wave arrival delays and level differences for a small two-ear array.
void place_source(int mics, double azimuth, int rate, SourcePlacement& p) {
  std::vector<double> tau(static_cast<std::size_t>(mics));
  std::vector<double> side(static_cast<std::size_t>(mics), 0.0);
  const double ux = std::sin(azimuth), uy = std::cos(azimuth);
  const int per_ear = std::max(1, mics / 2);
  for (int c = 0; c < mics; ++c) {
    double x = 0.0, y = 0.0;
    if (mics > 1) {
      const bool left = c < mics / 2;
      side[c] = left ? -1.0 : 1.0;
      x = left ? -kEarOffsetM : kEarOffsetM;
      const int j = left ? c : c - mics / 2;
      y = kMicSpacingM * (j - 0.5 * (per_ear - 1));
    }
    tau[c] = -(x * ux + y * uy) / kSpeedOfSound;
  }
  const double t0 = *std::min_element(tau.begin(), tau.end());
  p.delays.resize(static_cast<std::size_t>(mics));
  p.gains.resize(static_cast<std::size_t>(mics));
  for (int c = 0; c < mics; ++c) {
    p.delays[c] = kBaseDelaySamples + (tau[c] - t0) * rate;
    p.gains[c] = 1.0 + 0.2 * side[c] * ux;
  }
}

nlohmann::json placement_json(const SourcePlacement& p) {
  return {{"path", p.path}, {"delays", p.delays}, {"gains", p.gains}};
}

SourcePlacement placement_from_json(const nlohmann::json& j, const std::string& where) {
  reject_unknown_keys(j, {"path", "delays", "gains"}, where);
  SourcePlacement p;
  read_optional(j, "path", p.path, where);
  read_optional(j, "delays", p.delays, where);
  read_optional(j, "gains", p.gains, where);
  return p;
}

}  // namespace

std::string source_kind_name(SourceKind kind) {
  switch (kind) {
    case SourceKind::kAmTones:
      return "am_tones";
    case SourceKind::kChirp:
      return "chirp";
    case SourceKind::kFilteredNoise:
      return "filtered_noise";
  }
  return "unknown";
}

double am_tones_f0(std::uint64_t seed) {
  std::mt19937_64 rng(splitmix64(seed ^ 0xa5a5a5a5ULL));
  return std::uniform_real_distribution<double>(110.0, 220.0)(rng);
}

AudioBuffer synth_source(SourceKind kind, double duration_s, std::uint64_t seed,
                         int sample_rate_hz) {
  if (!(duration_s > 0.0)) throw SceneError("synth_source: duration must be positive");
  if (sample_rate_hz <= 0) throw SceneError("synth_source: sample rate must be positive");
  const Index n = std::max<Index>(1, std::lround(duration_s * sample_rate_hz));
  const double rate = sample_rate_hz;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
  Vec<double> x(n);

  switch (kind) {
    case SourceKind::kAmTones: {
      const double f0 = am_tones_f0(seed);
      const double amp[3] = {1.0, 0.5, 0.25};
      double ph[3];
      for (double& p : ph) p = phase(rng);
      const double env_phase = phase(rng);
      for (Index i = 0; i < n; ++i) {
        const double t = i / rate;
        double v = 0.0;
        for (int h = 0; h < 3; ++h) v += amp[h] * std::sin(2.0 * std::numbers::pi * (h + 1) * f0 * t + ph[h]);
        x(i) = envelope(t, env_phase) * v;
      }
      break;
    }
    case SourceKind::kChirp: {
      const double f_lo = 150.0, f_hi = std::min(3000.0, 0.45 * rate);
      const double p0 = phase(rng), env_phase = phase(rng);
      const double k = (f_hi - f_lo) / (n / rate);
      for (Index i = 0; i < n; ++i) {
        const double t = i / rate;
        x(i) = envelope(t, env_phase) *
               std::sin(2.0 * std::numbers::pi * (f_lo * t + 0.5 * k * t * t) + p0);
      }
      break;
    }
    case SourceKind::kFilteredNoise: {
      // RBJ band-pass biquad, constant 0 dB peak gain, Q = 1.
      const double fc = std::uniform_real_distribution<double>(300.0, std::min(2000.0, 0.4 * rate))(rng);
      const double w0 = 2.0 * std::numbers::pi * fc / rate;
      const double alpha = std::sin(w0) / 2.0;
      const double a0 = 1.0 + alpha;
      const double b0 = alpha / a0, b2 = -alpha / a0;
      const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
      std::normal_distribution<double> noise(0.0, 1.0);
      double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
      for (Index i = 0; i < n; ++i) {
        const double in = noise(rng);
        const double out = b0 * in + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = in;
        y2 = y1;
        y1 = out;
        x(i) = out;
      }
      break;
    }
  }
  normalize_rms(x);
  return AudioBuffer::mono(x, sample_rate_hz);
}

Tensor<double> spatialize(const Vec<double>& src, const std::vector<double>& delays,
                          const std::vector<double>& gains) {
  if (delays.size() != gains.size() || delays.empty()) {
    throw SceneError("spatialize: need one delay and one gain per channel");
  }
  const Index n = src.size();
  Tensor<double> out = Tensor<double>::Zero(static_cast<Index>(delays.size()), n);
  for (std::size_t c = 0; c < delays.size(); ++c) {
    const double d = delays[c];
    if (!(d >= 0.0)) throw SceneError("spatialize: delays must be >= 0");
    const Index di = static_cast<Index>(std::floor(d));
    const double frac = d - static_cast<double>(di);
    if (frac < 1e-12) {
      if (di < n) out.row(c).segment(di, n - di) = gains[c] * src.head(n - di).transpose();
      continue;
    }
    std::vector<double> taps;
    for (Index k = -kSincHalfWidth + 1; k <= kSincHalfWidth; ++k) {
      const double t = static_cast<double>(k) - frac;
      taps.push_back(sinc(t) * blackman(t, kSincHalfWidth));
    }
    double sum = 0.0;
    for (double v : taps) sum += v;
    for (double& v : taps) v /= sum;
    for (Index i = 0; i < n; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < taps.size(); ++j) {
        const Index k = static_cast<Index>(j) - kSincHalfWidth + 1;
        const Index m = i - di - k;
        if (m >= 0 && m < n) acc += src(m) * taps[j];
      }
      out(c, i) = gains[c] * acc;
    }
  }
  return out;
}

std::string split_name(Split s) {
  switch (s) {
    case Split::kTrain:
      return "train";
    case Split::kVal:
      return "val";
    case Split::kTest:
      return "test";
  }
  return "unknown";
}

Split split_from_name(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "val") return Split::kVal;
  if (name == "test") return Split::kTest;
  throw SceneError("unknown split \"" + name + "\"");
}

void SceneRecord::validate() const {
  const std::string where = "scene " + scene_id;
  if (!safe_id(scene_id)) throw SceneError("scene id \"" + scene_id + "\" is empty or has unsafe characters");
  if (mic_count < 1) throw SceneError(where + ": mic_count must be >= 1");
  if (sample_rate_hz <= 0) throw SceneError(where + ": sample_rate_hz must be positive");
  if (label && !(*label >= 0.0 && *label <= 1.0)) throw SceneError(where + ": label must lie in [0, 1]");
  if (prepared()) {
    if (!target_l_path || !target_r_path) {
      throw SceneError(where + ": a prepared mixture needs target_l_path and target_r_path");
    }
    return;
  }
  if (interferers.empty() || interferers.size() > 3) {
    throw SceneError(where + ": needs between 1 and 3 interferers, got " +
                     std::to_string(interferers.size()));
  }
  check_placement(target, mic_count, where + " target");
  for (std::size_t k = 0; k < interferers.size(); ++k) {
    check_placement(interferers[k].source, mic_count, where + " interferer " + std::to_string(k));
    if (!std::isfinite(interferers[k].snr_db)) throw SceneError(where + ": snr_db must be finite");
  }
  if (!(rir.decay_s > 0.0) || !std::isfinite(rir.drr_db) || !(rir.predelay_s >= 0.0)) {
    throw SceneError(where + ": invalid rir parameters");
  }
}

std::vector<const SceneRecord*> SceneManifest::split(Split s) const {
  std::vector<const SceneRecord*> out;
  for (const auto& r : scenes) {
    if (r.split == s) out.push_back(&r);
  }
  return out;
}

const SceneRecord& SceneManifest::find(const std::string& scene_id) const {
  for (const auto& r : scenes) {
    if (r.scene_id == scene_id) return r;
  }
  throw SceneError("no scene \"" + scene_id + "\" in manifest");
}

nlohmann::json to_json(const SceneManifest& m) {
  nlohmann::json scenes = nlohmann::json::array();
  for (const auto& r : m.scenes) {
    nlohmann::json j = {{"scene_id", r.scene_id},
                        {"split", split_name(r.split)},
                        {"sample_rate_hz", r.sample_rate_hz},
                        {"mic_count", r.mic_count},
                        {"geometry_seed", r.geometry_seed}};
    if (r.prepared()) {
      j["mixture_path"] = *r.mixture_path;
      j["target_l_path"] = *r.target_l_path;
      j["target_r_path"] = *r.target_r_path;
    } else {
      j["target"] = placement_json(r.target);
      nlohmann::json ints = nlohmann::json::array();
      for (const auto& i : r.interferers) {
        nlohmann::json ij = placement_json(i.source);
        ij["snr_db"] = i.snr_db;
        ints.push_back(ij);
      }
      j["interferers"] = ints;
      j["rir"] = {{"decay_s", r.rir.decay_s},
                  {"drr_db", r.rir.drr_db},
                  {"predelay_s", r.rir.predelay_s},
                  {"seed", r.rir.seed}};
    }
    if (r.label) j["label"] = *r.label;
    scenes.push_back(j);
  }
  return {{"schema_version", m.schema_version}, {"scenes", scenes}};
}

SceneManifest manifest_from_json(const nlohmann::json& j) {
  reject_unknown_keys(j, {"schema_version", "scenes"}, "manifest");
  SceneManifest m;
  if (!j.contains("schema_version")) throw ConfigError("manifest: missing schema_version");
  read_optional(j, "schema_version", m.schema_version, "manifest");
  if (m.schema_version != kManifestSchemaVersion) {
    throw ConfigError("manifest: unsupported schema_version " + std::to_string(m.schema_version));
  }
  if (!j.contains("scenes") || !j.at("scenes").is_array()) {
    throw ConfigError("manifest: scenes must be an array");
  }
  for (const auto& s : j.at("scenes")) {
    const std::string where = "manifest.scenes[]";
    reject_unknown_keys(s,
                        {"scene_id", "split", "sample_rate_hz", "mic_count", "geometry_seed",
                         "target", "interferers", "rir", "label", "mixture_path", "target_l_path",
                         "target_r_path"},
                        where);
    SceneRecord r;
    read_optional(s, "scene_id", r.scene_id, where);
    std::string split = "train";
    read_optional(s, "split", split, where);
    r.split = split_from_name(split);
    read_optional(s, "sample_rate_hz", r.sample_rate_hz, where);
    read_optional(s, "mic_count", r.mic_count, where);
    read_optional(s, "geometry_seed", r.geometry_seed, where);
    if (s.contains("target")) r.target = placement_from_json(s.at("target"), where + ".target");
    if (s.contains("interferers")) {
      for (const auto& ij : s.at("interferers")) {
        nlohmann::json placement = ij;
        InterfererRecord rec;
        if (!ij.contains("snr_db")) throw ConfigError(where + ".interferers[]: missing snr_db");
        read_optional(ij, "snr_db", rec.snr_db, where);
        placement.erase("snr_db");
        rec.source = placement_from_json(placement, where + ".interferers[]");
        r.interferers.push_back(rec);
      }
    }
    if (s.contains("rir")) {
      const auto& rj = s.at("rir");
      reject_unknown_keys(rj, {"decay_s", "drr_db", "predelay_s", "seed"}, where + ".rir");
      read_optional(rj, "decay_s", r.rir.decay_s, where);
      read_optional(rj, "drr_db", r.rir.drr_db, where);
      read_optional(rj, "predelay_s", r.rir.predelay_s, where);
      read_optional(rj, "seed", r.rir.seed, where);
    }
    if (s.contains("label")) {
      double label = 0.0;
      read_optional(s, "label", label, where);
      r.label = label;
    }
    for (auto [key, slot] : {std::pair{"mixture_path", &r.mixture_path},
                             std::pair{"target_l_path", &r.target_l_path},
                             std::pair{"target_r_path", &r.target_r_path}}) {
      if (s.contains(key)) {
        std::string v;
        read_optional(s, key, v, where);
        *slot = v;
      }
    }
    r.validate();
    for (const auto& other : m.scenes) {
      if (other.scene_id == r.scene_id) throw ConfigError("manifest: duplicate scene id " + r.scene_id);
    }
    m.scenes.push_back(std::move(r));
  }
  return m;
}

SceneManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SceneError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j);
}

void write_manifest(const SceneManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw SceneError("cannot write manifest " + path.string());
  out << to_json(m).dump(2) << '\n';
  if (!out) throw SceneError("failed writing manifest " + path.string());
}

std::vector<double> reverb_tail(const RirParams& rir, int sample_rate_hz, Index mic) {
  const Index pre = std::lround(rir.predelay_s * sample_rate_hz);
  const Index len = pre + static_cast<Index>(std::ceil(1.5 * rir.decay_s * sample_rate_hz));
  std::vector<double> h(static_cast<std::size_t>(len), 0.0);
  std::mt19937_64 rng(splitmix64(rir.seed + 0x1000193ULL * static_cast<std::uint64_t>(mic + 1)));
  std::normal_distribution<double> noise(0.0, 1.0);
  // 60 dB of amplitude decay over decay_s.
  const double k = 3.0 * std::log(10.0) / (rir.decay_s * sample_rate_hz);
  double energy = 0.0;
  for (Index i = pre; i < len; ++i) {
    h[i] = noise(rng) * std::exp(-k * static_cast<double>(i - pre));
    energy += h[i] * h[i];
  }
  const double scale = std::sqrt(std::pow(10.0, -rir.drr_db / 10.0) / energy);
  for (double& v : h) v *= scale;
  return h;
}

SceneAudio mix_scene(const SceneRecord& scene, const std::filesystem::path& base_dir) {
  scene.validate();
  const std::string who = "scene " + scene.scene_id;
  const int rate = scene.sample_rate_hz;
  SceneAudio out;

  if (scene.prepared()) {
    const auto mix_path = base_dir / *scene.mixture_path;
    if (!std::filesystem::exists(mix_path)) throw SceneError(who + ": missing " + mix_path.string());
    out.mixture = read_wav(mix_path);
    require_rate(out.mixture, rate, who.c_str());
    if (out.mixture.channels() != scene.mic_count) {
      throw SceneError(who + ": mixture has " + std::to_string(out.mixture.channels()) +
                       " channels, manifest says " + std::to_string(scene.mic_count));
    }
    const Vec<double> l = read_mono(base_dir / *scene.target_l_path, rate, who);
    const Vec<double> r = read_mono(base_dir / *scene.target_r_path, rate, who);
    if (l.size() != out.mixture.frames() || r.size() != out.mixture.frames()) {
      throw SceneError(who + ": target and mixture lengths differ");
    }
    out.target_l = AudioBuffer::mono(l, rate);
    out.target_r = AudioBuffer::mono(r, rate);
    return out;
  }

  const Vec<double> target = read_mono(base_dir / scene.target.path, rate, who);
  const Index n = target.size();
  out.dry_target = spatialize(target, scene.target.delays, scene.target.gains);
  const double target_energy = out.dry_target.row(0).squaredNorm();
  if (!(target_energy > 0.0)) throw SceneError(who + ": target is silent at the reference mic");

  Tensor<double> dry_sum = out.dry_target;
  for (const auto& rec : scene.interferers) {
    const Vec<double> src = fit_length(read_mono(base_dir / rec.source.path, rate, who), n);
    Tensor<double> img = spatialize(src, rec.source.delays, rec.source.gains);
    const double energy = img.row(0).squaredNorm();
    if (!(energy > 0.0)) throw SceneError(who + ": interferer is silent at the reference mic");
    const double gain = std::sqrt(target_energy / (energy * std::pow(10.0, rec.snr_db / 10.0)));
    img *= gain;
    dry_sum += img;
    out.interferer_gains.push_back(gain);
    out.dry_interferers.push_back(std::move(img));
  }

  out.reverb = Tensor<double>::Zero(scene.mic_count, n);
  for (int c = 0; c < scene.mic_count; ++c) {
    const std::vector<double> h = reverb_tail(scene.rir, rate, c);
    std::vector<double> row(dry_sum.row(c).data(), dry_sum.row(c).data() + n);
    const std::vector<double> wet = detail::fft_convolve(row, h, n);
    for (Index i = 0; i < n; ++i) out.reverb(c, i) = wet[i];
  }
  out.mixture = AudioBuffer(dry_sum + out.reverb, rate);
  out.target_l = AudioBuffer::mono(out.dry_target.row(0).transpose(), rate);
  out.target_r = AudioBuffer::mono(out.dry_target.row(scene.right_reference()).transpose(), rate);
  return out;
}

std::string difficulty_name(Difficulty d) {
  return d == Difficulty::kCec1Like ? "cec1_like" : "cec2_like";
}

Difficulty difficulty_from_name(const std::string& name) {
  if (name == "cec1_like") return Difficulty::kCec1Like;
  if (name == "cec2_like") return Difficulty::kCec2Like;
  throw ConfigError("unknown difficulty \"" + name + "\"");
}

std::pair<double, double> snr_range(Difficulty d) {
  return d == Difficulty::kCec1Like ? std::pair{0.0, 10.0} : std::pair{-3.0, 7.0};
}

void GenerateSpec::validate() const {
  int total = 0;
  for (const auto& [split, count] : counts) {
    if (count < 0) throw ConfigError("generate: negative scene count for " + split_name(split));
    total += count;
  }
  if (total == 0) throw ConfigError("generate: no scenes requested");
  if (!(duration_s > 0.0)) throw ConfigError("generate: duration_s must be positive");
  if (sample_rate_hz <= 0) throw ConfigError("generate: sample_rate_hz must be positive");
  if (mic_count < 1) throw ConfigError("generate: mic_count must be >= 1");
  if (!(decay_s > 0.0)) throw ConfigError("generate: decay_s must be positive");
}

nlohmann::json to_json(const GenerateSpec& spec) {
  nlohmann::json counts;
  for (const auto& [split, count] : spec.counts) counts[split_name(split)] = count;
  return {{"counts", counts},
          {"difficulty", difficulty_name(spec.difficulty)},
          {"duration_s", spec.duration_s},
          {"sample_rate_hz", spec.sample_rate_hz},
          {"mic_count", spec.mic_count},
          {"decay_s", spec.decay_s},
          {"drr_db", spec.drr_db}};
}

GenerateSpec generate_spec_from_json(const nlohmann::json& j) {
  constexpr const char* where = "generate";
  reject_unknown_keys(j, {"counts", "difficulty", "duration_s", "sample_rate_hz", "mic_count", "decay_s", "drr_db"},
                      where);
  GenerateSpec spec;
  if (j.contains("counts")) {
    const auto& c = j.at("counts");
    reject_unknown_keys(c, {"train", "val", "test"}, "generate.counts");
    spec.counts.clear();
    for (Split s : {Split::kTrain, Split::kVal, Split::kTest}) {
      int count = 0;
      read_optional(c, split_name(s).c_str(), count, where);
      spec.counts[s] = count;
    }
  }
  std::string difficulty = difficulty_name(spec.difficulty);
  read_optional(j, "difficulty", difficulty, where);
  spec.difficulty = difficulty_from_name(difficulty);
  read_optional(j, "duration_s", spec.duration_s, where);
  read_optional(j, "sample_rate_hz", spec.sample_rate_hz, where);
  read_optional(j, "mic_count", spec.mic_count, where);
  read_optional(j, "decay_s", spec.decay_s, where);
  read_optional(j, "drr_db", spec.drr_db, where);
  spec.validate();
  return spec;
}

std::uint64_t scene_seed(std::uint64_t global_seed, const std::string& scene_id) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : scene_id) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(global_seed ^ splitmix64(h));
}

std::filesystem::path generate_dataset(const GenerateSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir, int workers) {
  spec.validate();
  std::filesystem::create_directories(out_dir / "sources");

  std::vector<SceneRecord> records;
  for (Split split : {Split::kTrain, Split::kVal, Split::kTest}) {
    const auto it = spec.counts.find(split);
    const int count = it == spec.counts.end() ? 0 : it->second;
    for (int i = 0; i < count; ++i) {
      char id[64];
      std::snprintf(id, sizeof(id), "%s_%04d", split_name(split).c_str(), i);
      SceneRecord r;
      r.scene_id = id;
      r.split = split;
      r.sample_rate_hz = spec.sample_rate_hz;
      r.mic_count = spec.mic_count;
      records.push_back(std::move(r));
    }
  }

  auto build = [&](SceneRecord& r) {
    std::mt19937_64 rng(scene_seed(seed, r.scene_id));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    r.geometry_seed = rng();
    r.rir = RirParams{spec.decay_s, spec.drr_db, 0.003, rng()};
    std::mt19937_64 geometry(r.geometry_seed);
    const double deg = std::numbers::pi / 180.0;

    const std::uint64_t target_seed = rng();
    r.target.path = "sources/" + r.scene_id + "_target.wav";
    place_source(r.mic_count, (unit(geometry) * 60.0 - 30.0) * deg, r.sample_rate_hz, r.target);
    write_wav(synth_source(SourceKind::kAmTones, spec.duration_s, target_seed, r.sample_rate_hz),
              out_dir / r.target.path);

    const int n_int = spec.difficulty == Difficulty::kCec1Like ? 1 : (unit(rng) < 0.5 ? 2 : 3);
    const auto [snr_lo, snr_hi] = snr_range(spec.difficulty);
    for (int k = 0; k < n_int; ++k) {
      InterfererRecord rec;
      const auto kind = static_cast<SourceKind>(std::min<int>(2, static_cast<int>(unit(rng) * 3.0)));
      const std::uint64_t src_seed = rng();
      rec.snr_db = snr_lo + (snr_hi - snr_lo) * unit(rng);
      rec.source.path = "sources/" + r.scene_id + "_interferer" + std::to_string(k) + ".wav";
      place_source(r.mic_count, (unit(geometry) * 360.0 - 180.0) * deg, r.sample_rate_hz, rec.source);
      write_wav(synth_source(kind, spec.duration_s, src_seed, r.sample_rate_hz), out_dir / rec.source.path);
      r.interferers.push_back(std::move(rec));
    }
    r.validate();
  };

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(std::max(1, workers)));
  auto worker = [&](std::size_t w) {
    try {
      for (std::size_t i = next++; i < records.size(); i = next++) build(records[i]);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers <= 1) {
    worker(0);
  } else {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker, static_cast<std::size_t>(w));
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SceneManifest m;
  m.scenes = std::move(records);
  const auto path = out_dir / "manifest.json";
  write_manifest(m, path);
  return path;
}

}  // namespace percept
