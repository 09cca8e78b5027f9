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

// gsnas: command-line front end for the GradSign NAS toolkit.
//
//   gsnas bench build --config exp.json --out runs/exp
//   gsnas correlate --config exp.json --out runs/exp --metric gradsign
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "gsnas/experiment.h"
#include "gsnas/io.h"
#include "gsnas/metrics.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct CommonFlags {
  std::string config;
  std::string out;
  int workers = 1;
  bool force = false;
  std::optional<std::uint64_t> seed;
};

void AddCommonFlags(CLI::App* app, CommonFlags* flags) {
  app->add_option("--config", flags->config, "Experiment config (JSON)")
      ->check(CLI::ExistingFile);
  app->add_option("--out", flags->out, "Output directory")->required();
  app->add_option("--workers", flags->workers, "Worker threads")
      ->check(CLI::PositiveNumber);
  app->add_flag("--force", flags->force, "Recompute even if outputs exist");
  app->add_option("--seed", flags->seed, "Override the config's root seed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GradSign zero-cost NAS toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gsnas::kToolkitVersion);

  CommonFlags flags;
  std::string metric_override;
  int instances_override = -1;

  CLI::App* bench = app.add_subcommand("bench", "Benchmark table");
  bench->require_subcommand(1);
  CLI::App* bench_build =
      bench->add_subcommand("build", "Train the architecture sample");
  AddCommonFlags(bench_build, &flags);
  CLI::App* score = app.add_subcommand("score", "Zero-cost scores");
  AddCommonFlags(score, &flags);
  CLI::App* correlate =
      app.add_subcommand("correlate", "Rank correlation with test accuracy");
  AddCommonFlags(correlate, &flags);
  correlate->add_option("--metric", metric_override,
                        "Only this metric (default: the config's list)");
  CLI::App* select = app.add_subcommand("select", "Best-of-N selection");
  AddCommonFlags(select, &flags);
  CLI::App* search = app.add_subcommand("search", "Architecture search runs");
  AddCommonFlags(search, &flags);
  CLI::App* verify = app.add_subcommand("verify", "Theory bound sweep");
  AddCommonFlags(verify, &flags);
  verify->add_option("--instances", instances_override,
                     "Number of instances (default: the config's)")
      ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  gsnas::ExperimentConfig config;
  try {
    if (!flags.config.empty()) {
      config = gsnas::ConfigFromJson(gsnas::ReadFile(flags.config));
    }
    if (flags.seed) config.seed = *flags.seed;
    if (!metric_override.empty()) {
      config.metric.metrics = {gsnas::ParseMetric(metric_override)};
    }
    if (instances_override >= 0) config.verify.instances = instances_override;
    const auto issues = gsnas::ValidateConfig(config);
    if (!issues.empty()) throw gsnas::ConfigError(issues);
  } catch (const gsnas::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return kExitConfig;
  }

  const gsnas::RunOptions options{flags.out, flags.workers, flags.force};
  try {
    gsnas::CommandResult result;
    if (bench_build->parsed()) {
      result = gsnas::RunBenchCommand(config, options);
    } else if (score->parsed()) {
      result = gsnas::RunScoreCommand(config, options);
    } else if (correlate->parsed()) {
      result = gsnas::RunCorrelateCommand(config, options);
    } else if (select->parsed()) {
      result = gsnas::RunSelectCommand(config, options);
    } else if (search->parsed()) {
      result = gsnas::RunSearchCommand(config, options);
    } else {
      result = gsnas::RunVerifyCommand(config, options);
    }
    std::printf("%s\n", result.summary.c_str());
  } catch (const gsnas::ConfigError& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return 0;
}
