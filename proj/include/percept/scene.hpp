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
/// Synthetic multi-microphone scenes: deterministic pseudo-speech sources,
/// far-field fractional-delay spatialization, interferers mixed at a given
/// reference-channel SNR and an exponentially decaying noise reverb tail.
/// The manifest format also indexes externally prepared recordings.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "percept/audio.hpp"

namespace percept {

class SceneError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SourceKind { kAmTones, kChirp, kFilteredNoise };

std::string source_kind_name(SourceKind kind);

inline constexpr double kSourceRms = 0.1;
inline constexpr double kAmModulationHz = 4.0;

/// Fundamental used by synth_source(kAmTones, ..., seed, ...); the three
/// harmonics sit at 1, 2 and 3 times this frequency.
double am_tones_f0(std::uint64_t seed);

/// Deterministic mono pseudo-source normalized to an RMS of 0.1.
///   am_tones        three harmonics of am_tones_f0(seed), 4 Hz amplitude modulation
///   chirp           linear sweep with the same modulation
///   filtered_noise  Gaussian noise through a seed-dependent band-pass
AudioBuffer synth_source(SourceKind kind, double duration_s, std::uint64_t seed,
                         int sample_rate_hz = 16000);

/// Per-channel windowed-sinc fractional delay and gain. The output has the
/// input's length; channel 0 is the reference.
Tensor<double> spatialize(const Vec<double>& src, const std::vector<double>& delays,
                          const std::vector<double>& gains);

enum class Split { kTrain, kVal, kTest };
std::string split_name(Split s);
Split split_from_name(const std::string& name);

struct SourcePlacement {
  std::string path;  // relative to the manifest
  std::vector<double> delays;  // samples, one per mic
  std::vector<double> gains;

  bool operator==(const SourcePlacement&) const = default;
};

struct InterfererRecord {
  SourcePlacement source;
  double snr_db = 0.0;

  bool operator==(const InterfererRecord&) const = default;
};

struct RirParams {
  double decay_s = 0.2;  // T60 of the tail
  double drr_db = 8.0;   // direct-to-reverberant energy ratio per mic
  double predelay_s = 0.003;
  std::uint64_t seed = 0;

  bool operator==(const RirParams&) const = default;
};

/// One scene. A scene either refers to dry sources that mix_scene renders,
/// or (for external data) to a prepared mixture and its two targets.
struct SceneRecord {
  std::string scene_id;
  Split split = Split::kTrain;
  int sample_rate_hz = 16000;
  int mic_count = 6;
  std::uint64_t geometry_seed = 0;
  SourcePlacement target;
  std::vector<InterfererRecord> interferers;
  RirParams rir;
  std::optional<double> label;
  std::optional<std::string> mixture_path;
  std::optional<std::string> target_l_path;
  std::optional<std::string> target_r_path;

  bool prepared() const { return mixture_path.has_value(); }
  /// Index of the right-ear reference mic (left is always 0).
  Index right_reference() const { return mic_count / 2; }
  void validate() const;

  bool operator==(const SceneRecord&) const = default;
};

inline constexpr int kManifestSchemaVersion = 1;

struct SceneManifest {
  int schema_version = kManifestSchemaVersion;
  std::vector<SceneRecord> scenes;

  std::vector<const SceneRecord*> split(Split s) const;
  const SceneRecord& find(const std::string& scene_id) const;

  bool operator==(const SceneManifest&) const = default;
};

nlohmann::json to_json(const SceneManifest& m);
/// Strict parser; validates every record.
SceneManifest manifest_from_json(const nlohmann::json& j);
SceneManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const SceneManifest& m, const std::filesystem::path& path);

struct SceneAudio {
  AudioBuffer mixture;   // C × N
  AudioBuffer target_l;  // 1 × N, anechoic target at mic 0
  AudioBuffer target_r;  // 1 × N, anechoic target at the right reference mic
  // Components of the mixture: mixture = dry_target + Σ dry_interferers + reverb.
  // Empty for prepared scenes.
  Tensor<double> dry_target;
  std::vector<Tensor<double>> dry_interferers;
  std::vector<double> interferer_gains;
  Tensor<double> reverb;
};

/// Renders a scene; sources are resolved relative to `base_dir`.
SceneAudio mix_scene(const SceneRecord& scene, const std::filesystem::path& base_dir);

/// Exponential-decay noise tail for one mic (no direct path).
std::vector<double> reverb_tail(const RirParams& rir, int sample_rate_hz, Index mic);

enum class Difficulty { kCec1Like, kCec2Like };
std::string difficulty_name(Difficulty d);
Difficulty difficulty_from_name(const std::string& name);

struct GenerateSpec {
  std::map<Split, int> counts = {{Split::kTrain, 8}, {Split::kVal, 2}, {Split::kTest, 2}};
  Difficulty difficulty = Difficulty::kCec1Like;
  double duration_s = 2.0;
  int sample_rate_hz = 16000;
  int mic_count = 6;
  double decay_s = 0.2;
  double drr_db = 8.0;

  void validate() const;
};

nlohmann::json to_json(const GenerateSpec& spec);
GenerateSpec generate_spec_from_json(const nlohmann::json& j);

/// SNR range (dB) drawn per interferer.
std::pair<double, double> snr_range(Difficulty d);

/// Deterministic per-scene seed from the global seed and the scene id.
std::uint64_t scene_seed(std::uint64_t global_seed, const std::string& scene_id);

/// Writes the source WAVs (float32) and manifest.json into `out_dir` and
/// returns the manifest path. Output bytes depend only on (spec, seed).
std::filesystem::path generate_dataset(const GenerateSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir, int workers = 1);

}  // namespace percept
