/*
 * Copyright 2026 The gsnas Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Runs the gsnas executable as a subprocess.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace {

namespace fs = std::filesystem;

const fs::path kDir = fs::temp_directory_path() / "gsnas_cli_test";

struct CliRun {
  int code;
  std::string output;
};

CliRun Cli(const std::string& args) {
  const fs::path log = kDir / "log.txt";
  const std::string cmd =
      std::string(GSNAS_CLI) + " " + args + " > " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  std::ifstream in(log);
  std::stringstream s;
  s << in.rdbuf();
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, s.str()};
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

class CliTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kDir);
    fs::create_directories(kDir);
    std::ofstream(kDir / "tiny.json") << R"({
      "seed": 3, "dataset": {"num_samples": 300}, "train": {"epochs": 3},
      "space": {"cell_width": 8}, "bench": {"num_archs": 12},
      "metric": {"batch_size": 16}, "select": {"n": 4, "runs": 10},
      "search": {"runs": 1, "budget": 3}, "verify": {"instances": 4}})";
    std::ofstream(kDir / "bad.json") << R"({"train": {"lr": -1, "bogus": 1}})";
  }
  static std::string Config() { return "--config " + (kDir / "tiny.json").string(); }
};

TEST_F(CliTest, PipelineSmokeAndRerunSkips) {
  const std::string out = " --out " + (kDir / "run").string();
  ASSERT_EQ(Cli("bench build " + Config() + out).code, 0);
  const CliRun corr = Cli("correlate --metric gradsign " + Config() + out);
  ASSERT_EQ(corr.code, 0) << corr.output;
  const std::string csv = Slurp(kDir / "run" / "correlation.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_NE(csv.find("\ngradsign,"), std::string::npos);
  const CliRun again = Cli("bench build " + Config() + out);
  EXPECT_EQ(again.code, 0);
  EXPECT_NE(again.output.find("up to date"), std::string::npos);
  EXPECT_EQ(Cli("bench build --force --workers 2 " + Config() + out).code, 0);
}

TEST_F(CliTest, VerifyInstancesFlag) {
  const std::string out = " --out " + (kDir / "verify").string();
  ASSERT_EQ(Cli("verify --instances 5 " + Config() + out).code, 0);
  const std::string csv = Slurp(kDir / "verify" / "verify.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 6);
}

TEST_F(CliTest, SeedOverrideChangesArtifacts) {
  const std::string a = " --out " + (kDir / "seed_a").string();
  const std::string b = " --out " + (kDir / "seed_b").string();
  ASSERT_EQ(Cli("verify --instances 3 " + Config() + a).code, 0);
  ASSERT_EQ(Cli("verify --instances 3 --seed 99 " + Config() + b).code, 0);
  EXPECT_NE(Slurp(kDir / "seed_a" / "verify.csv"),
            Slurp(kDir / "seed_b" / "verify.csv"));
}

TEST_F(CliTest, ConfigErrorsExitWithTwo) {
  const CliRun bad =
      Cli("bench build --config " + (kDir / "bad.json").string() + " --out " +
          (kDir / "bad").string());
  EXPECT_EQ(bad.code, 2);
  EXPECT_NE(bad.output.find("train.lr"), std::string::npos);
  EXPECT_NE(bad.output.find("train.bogus"), std::string::npos);
  EXPECT_EQ(Cli("bench build " + Config()).code, 2);  // --out missing
  EXPECT_EQ(Cli("frobnicate --out x").code, 2);
  EXPECT_EQ(Cli("bench build --config /nonexistent.json --out " +
                (kDir / "none").string())
                .code,
            2);
}

TEST_F(CliTest, RuntimeFailureExitsWithThreeAndMarks) {
  const fs::path dir = kDir / "fail";
  const CliRun r = Cli("select " + Config() + " --out " + dir.string());
  EXPECT_EQ(r.code, 3);
  EXPECT_TRUE(fs::exists(dir / "select.FAILED"));
}

}  // namespace
