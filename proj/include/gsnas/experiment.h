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

#ifndef GSNAS_EXPERIMENT_H_
#define GSNAS_EXPERIMENT_H_

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnas/archspace.h"
#include "gsnas/metrics.h"
#include "gsnas/search.h"
#include "gsnas/theory.h"
#include "gsnas/trainer.h"

namespace gsnas {

inline constexpr char kToolkitVersion[] = "0.1.0";

struct BenchSettings {
  int num_archs = 400;
};

struct MetricSettings {
  std::vector<MetricKind> metrics = {MetricKind::kGradSign,
                                     MetricKind::kGradNorm};
  int batch_size = 64;
  double zero_tol = 0.0;
  int num_inits = 1;
  LossKind loss = LossKind::kCrossEntropy;
};

struct SelectSettings {
  int n = 50;
  int runs = 500;
};

struct SearchSettings {
  std::vector<SearchAlgorithm> algorithms = {
      SearchAlgorithm::kRandom, SearchAlgorithm::kEvolution,
      SearchAlgorithm::kReinforce, SearchAlgorithm::kHyperband};
  std::vector<bool> assisted = {false, true};
  int runs = 50;
  // `algorithm` and `assisted` are ignored; the lists above drive the runs.
  SearchConfig params;
};

struct VerifySettings {
  int instances = 200;
  SweepOptions options;
};

// Everything an experiment needs. Dataset, train and per-purpose seeds are
// all derived from `seed`, so the seed fields of `dataset` and `train` are
// not part of the file format.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  DatasetSpec dataset;
  SearchSpaceSpec space;
  TrainConfig train;
  BenchSettings bench;
  MetricSettings metric;
  SelectSettings select;
  SearchSettings search;
  VerifySettings verify;
};

// Invalid configuration; `issues` holds one "field: problem" line each.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<std::string> issues);
  const std::vector<std::string>& issues() const { return issues_; }

 private:
  std::vector<std::string> issues_;
};

// Missing keys take their defaults; unknown keys and bad values are errors.
ExperimentConfig ConfigFromJson(const std::string& text);
// Canonical form: every key, fixed order. Round-trips through
// ConfigFromJson.
std::string ConfigToJson(const ExperimentConfig& config);
std::vector<std::string> ValidateConfig(const ExperimentConfig& config);
std::string ConfigHash(const ExperimentConfig& config);

// Seeds are DeriveSeed(root, label) with these labels.
struct Seeds {
  std::uint64_t root = 0;
  std::uint64_t dataset = 0;     // "dataset"
  std::uint64_t train = 0;       // "train"
  std::uint64_t bench_ids = 0;   // "bench/ids"
  std::uint64_t metric_batch = 0;  // "metric/batch"
  std::uint64_t metric_init = 0;   // "metric/init"
  std::uint64_t select = 0;      // "select"
  std::uint64_t verify = 0;      // "verify"
  // "search/<algorithm>/<run>"; shared by the plain and assisted variants.
  std::uint64_t SearchRun(SearchAlgorithm algorithm, int run) const;
};
Seeds DeriveSeeds(std::uint64_t root);

// The dataset, train config and bench architecture ids of an experiment.
DatasetSpec ResolvedDataset(const ExperimentConfig& config);
TrainConfig ResolvedTrain(const ExperimentConfig& config);
std::vector<int> BenchIds(const ExperimentConfig& config);

struct RunOptions {
  std::filesystem::path out_dir;
  int workers = 1;
  bool force = false;
};

struct CommandResult {
  bool skipped = false;  // outputs already matched the config
  std::vector<std::string> artifacts;
  std::string summary;
};

// Each command writes its artifacts into out_dir together with
// `<command>.manifest.json`. A command whose manifest matches is skipped
// unless options.force. On failure `<command>.FAILED` is left next to any
// partial outputs and the exception propagates.
CommandResult RunBenchCommand(const ExperimentConfig& config,
                              const RunOptions& options);
CommandResult RunScoreCommand(const ExperimentConfig& config,
                              const RunOptions& options);
CommandResult RunCorrelateCommand(const ExperimentConfig& config,
                                  const RunOptions& options);
CommandResult RunSelectCommand(const ExperimentConfig& config,
                               const RunOptions& options);
CommandResult RunSearchCommand(const ExperimentConfig& config,
                               const RunOptions& options);
CommandResult RunVerifyCommand(const ExperimentConfig& config,
                               const RunOptions& options);

}  // namespace gsnas

#endif  // GSNAS_EXPERIMENT_H_
