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

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "test_util.hpp"

namespace percept {
namespace {

using testing::file_bytes;
using testing::TempDir;

int run(const std::string& args) {
  const std::string cmd = std::string(PERCEPT_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void write(const std::filesystem::path& p, const nlohmann::json& j) { std::ofstream(p) << j.dump(); }

nlohmann::json read(const std::filesystem::path& p) { return nlohmann::json::parse(std::ifstream(p)); }

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(run("--help"), 0);
  EXPECT_EQ(run(""), 2);
  EXPECT_EQ(run("frobnicate"), 2);
  EXPECT_EQ(run("train --out x"), 2);
  EXPECT_EQ(run("gradcheck --module optimizer"), 2);
  EXPECT_EQ(run("gradcheck --seeds 0"), 2);
}

TEST(Cli, GradcheckExitCodes) {
  EXPECT_EQ(run("gradcheck --module losses --seeds 2"), 0);
  EXPECT_EQ(run("gradcheck --module losses --seeds 1 --corrupt-backward"), 1);
}

TEST(Cli, BadConfigExitsTwo) {
  TempDir dir;
  write(dir / "gen.json", {{"counts", {{"train", 1}}}, {"mystery", 1}});
  EXPECT_EQ(run("generate --spec " + (dir / "gen.json").string() + " --out " + (dir / "d").string()), 2);
}

class CliPipeline : public ::testing::Test {
 protected:
  void SetUp() override {
    write(dir_ / "gen.json", {{"counts", {{"train", 2}, {"val", 1}, {"test", 2}}},
                              {"duration_s", 0.5},
                              {"mic_count", 2}});
    ASSERT_EQ(run("generate --spec " + p("gen.json") + " --seed 3 --out " + p("data")), 0);
    nlohmann::json enc = {{"layers", {{{"out_channels", 8}, {"kernel", 10}, {"stride", 5}},
                                      {{"out_channels", 8}, {"kernel", 3}, {"stride", 2}}}},
                          {"seed", 2}};
    write(dir_ / "run.json", {{"manifest", "data/manifest.json"},
                              {"denoiser", {{"profile", "tiny"}, {"sample_rate_hz", 16000}}},
                              {"encoder", enc},
                              {"train", {{"epochs", 3}, {"batch_size", 2}, {"segment_s", 0.5}, {"seed", 4}}}});
  }

  std::string p(const std::string& rel) const { return (dir_ / rel).string(); }

  TempDir dir_;
};

TEST_F(CliPipeline, GenerateIsReproducibleAndRecordsConfig) {
  ASSERT_EQ(run("generate --spec " + p("gen.json") + " --seed 3 --out " + p("again") + " --workers 2"), 0);
  EXPECT_EQ(file_bytes(dir_ / "data" / "manifest.json"), file_bytes(dir_ / "again" / "manifest.json"));
  EXPECT_EQ(read(dir_ / "data" / "resolved_config.json").at("seed"), 3);
  ASSERT_EQ(setenv("PERCEPT_SEED", "3", 1), 0);
  ASSERT_EQ(run("generate --spec " + p("gen.json") + " --out " + p("env")), 0);
  unsetenv("PERCEPT_SEED");
  EXPECT_EQ(file_bytes(dir_ / "data" / "manifest.json"), file_bytes(dir_ / "env" / "manifest.json"));
}

TEST_F(CliPipeline, TrainEvaluateAnalyze) {
  ASSERT_EQ(run("train --config " + p("run.json") + " --ear l --out " + p("l")), 0);
  ASSERT_EQ(run("train --config " + p("run.json") + " --ear r --strategy joint_scheduled --out " + p("r")), 0);
  for (const char* f : {"history.csv", "steps.csv", "model.sewf", "best.sewf", "resolved_config.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir_ / "l" / f)) << f;
  }
  EXPECT_EQ(read(dir_ / "r" / "resolved_config.json")["train"]["strategy"], "joint_scheduled");
  std::ifstream hist(dir_ / "l" / "history.csv");
  int lines = 0;
  for (std::string line; std::getline(hist, line);) ++lines;
  EXPECT_EQ(lines, 1 + 3);

  ASSERT_EQ(run("evaluate --manifest " + p("data/manifest.json") + " --model-l " + p("l/best.sewf") +
                " --model-r " + p("r/best.sewf") + " --out " + p("ev")),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "ev" / "report.csv"));
  EXPECT_EQ(read(dir_ / "ev" / "report.json")["rows"].size(), 2u);

  write(dir_ / "enc.json", {{"layers", {{{"out_channels", 8}, {"kernel", 10}, {"stride", 5}}}}});
  ASSERT_EQ(run("init-encoder --config " + p("enc.json") + " --seed 1 --out " + p("enc.sewf")), 0);
  ASSERT_EQ(run("analyze --manifest " + p("data/manifest.json") + " --enhanced " + p("ev/enhanced") +
                " --encoder " + p("enc.sewf") + " --out " + p("an")),
            0);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "an" / "correlation_matrix.csv"));
}

TEST_F(CliPipeline, ResumeMatchesUninterruptedRun) {
  ASSERT_EQ(run("train --config " + p("run.json") + " --epochs 2 --out " + p("a")), 0);
  ASSERT_EQ(run("train --config " + p("run.json") + " --epochs 4 --resume --out " + p("a")), 0);
  ASSERT_EQ(run("train --config " + p("run.json") + " --epochs 4 --out " + p("b")), 0);
  EXPECT_EQ(file_bytes(dir_ / "a" / "model.sewf"), file_bytes(dir_ / "b" / "model.sewf"));
  EXPECT_EQ(file_bytes(dir_ / "a" / "history.csv"), file_bytes(dir_ / "b" / "history.csv"));
  EXPECT_EQ(file_bytes(dir_ / "a" / "steps.csv"), file_bytes(dir_ / "b" / "steps.csv"));
}

TEST_F(CliPipeline, DivergenceExitsThree) {
  nlohmann::json cfg = read(dir_ / "run.json");
  cfg["train"]["lr_init"] = 1e300;
  write(dir_ / "nan.json", cfg);
  EXPECT_EQ(run("train --config " + p("nan.json") + " --out " + p("n")), 3);
  EXPECT_TRUE(std::filesystem::exists(dir_ / "n" / "history.csv"));
}

}  // namespace
}  // namespace percept
