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

#include <gtest/gtest.h>

#include "percept/gradcheck.hpp"

namespace percept {
namespace {

class GradCheckModule : public ::testing::TestWithParam<const char*> {};

TEST_P(GradCheckModule, AllChecksPass) {
  GradCheckOptions opts;
  opts.seeds = 5;
  const auto results = run_gradcheck(GetParam(), opts);
  ASSERT_FALSE(results.empty());
  for (const auto& r : results) {
    EXPECT_TRUE(r.passed) << r.name << " max_rel_error " << r.max_rel_error;
    EXPECT_GT(r.entries, 0) << r.name;
  }
}

TEST_P(GradCheckModule, CorruptedBackwardIsDetected) {
  GradCheckOptions opts;
  opts.seeds = 1;
  opts.corrupt_backward = true;
  for (const auto& r : run_gradcheck(GetParam(), opts)) EXPECT_FALSE(r.passed) << r.name;
}

INSTANTIATE_TEST_SUITE_P(Modules, GradCheckModule,
                         ::testing::Values("layers", "encoder", "losses", "denoiser"));

TEST(GradCheck, UnknownModuleRejected) {
  EXPECT_FALSE(is_gradcheck_module("optimizer"));
  EXPECT_TRUE(is_gradcheck_module("all"));
  EXPECT_THROW(run_gradcheck("optimizer"), std::invalid_argument);
}

TEST(GradCheck, AllCoversEveryModule) {
  GradCheckOptions opts;
  opts.seeds = 1;
  std::size_t sum = 0;
  for (const char* m : {"layers", "encoder", "losses", "denoiser"}) sum += run_gradcheck(m, opts).size();
  EXPECT_EQ(run_gradcheck("all", opts).size(), sum);
}

}  // namespace
}  // namespace percept
