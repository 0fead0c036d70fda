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
/// Central finite-difference checks of every backward pass, in f64.
///
/// Each check reduces the op output to a scalar with a fixed random
/// projection and compares every analytic gradient entry a with the
/// numeric estimate n using |a - n| / max(|a|, |n|, 1e-3 · max|n|).

#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace percept {

struct GradCheckOptions {
  int seeds = 20;
  std::uint64_t base_seed = 1;
  double step = 1e-6;
  double tolerance = 1e-4;
  /// Test fixture: perturbs every analytic gradient so the suite must fail.
  bool corrupt_backward = false;
};

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;
  long long entries = 0;
  bool passed = true;
};

/// Modules: "layers", "encoder", "losses", "denoiser", or "all".
bool is_gradcheck_module(std::string_view module);

/// Throws std::invalid_argument for an unknown module.
std::vector<GradCheckResult> run_gradcheck(std::string_view module,
                                           const GradCheckOptions& options = {});

}  // namespace percept
