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

#ifndef GSNAS_TRAINER_H_
#define GSNAS_TRAINER_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsnas/archspace.h"
#include "gsnas/network.h"
#include "gsnas/tensor.h"

namespace gsnas {

enum class DatasetKind { kGaussianBlobs, kTwoSpirals };

std::string DatasetKindName(DatasetKind kind);
DatasetKind ParseDatasetKind(const std::string& name);

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kTwoSpirals;
  int num_samples = 2000;
  int dim = 2;
  int num_classes = 2;
  double noise = 0.1;
  // two_spirals: full turns each arm sweeps from the origin to radius 1.
  double spiral_turns = 1.25;
  std::uint64_t seed = 0;
};

// Labelled points with a fixed 70/15/15 train/val/test split.
struct Dataset {
  DatasetSpec spec;
  Tensor inputs;  // [N, d]
  std::vector<int> labels;
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;

  Batch Subset(std::span<const std::size_t> rows) const;
  // The first `count` training rows of a permutation drawn from `seed`.
  // Throws std::invalid_argument unless 1 <= count <= train.size().
  Batch TrainSample(std::size_t count, std::uint64_t seed) const;
  // Hash of every input bit, label and split index.
  std::string Fingerprint() const;
};

// Classes are assigned round-robin, so counts differ by at most one.
// Throws std::invalid_argument when num_samples < 10 * num_classes.
Dataset MakeSyntheticDataset(const DatasetSpec& spec);

struct TrainConfig {
  double lr = 0.05;
  double momentum = 0.9;
  int epochs = 60;
  int batch_size = 32;
  double weight_decay = 5e-4;
  std::uint64_t seed = 0;
};

std::string TrainFingerprint(const TrainConfig& config,
                             const SearchSpaceSpec& space);

struct EpochRecord {
  double train_loss = 0.0;
  double val_acc = 0.0;
  double test_acc = 0.0;
};

struct TrainedResult {
  int arch_id = -1;
  double train_loss = 0.0;  // mean training loss of the last epoch run
  double val_acc = 0.0;     // at the best validation epoch
  double test_acc = 0.0;    // at the best validation epoch
  double cost_seconds = 0.0;
  bool diverged = false;
  int best_epoch = 0;
  std::vector<EpochRecord> curve;
  double wall_seconds = 0.0;  // measured; not persisted

  // Best-validation-epoch accuracies using only the first `epochs` epochs.
  EpochRecord AtBudget(int epochs) const;
};

// Fraction of rows whose argmax logit equals the label.
double Accuracy(const Network& net, const ParamVector& theta,
                const Batch& batch);

// Deterministic stand-in for training wall-clock: forward+backward
// multiply-accumulates over the training split plus evaluation passes,
// divided by a fixed reference throughput.
double SimulatedTrainingCost(const Network& net, const Dataset& data,
                             int epochs);
// Cost of one per-sample-gradient pass over `batch_size` samples.
double SimulatedScoringCost(const Network& net, std::size_t batch_size);

// Minibatch SGD with momentum on cross-entropy. Stops early and sets
// `diverged` on a non-finite loss or parameter.
TrainedResult Train(const Network& net, ParamVector theta0,
                    const Dataset& data, const TrainConfig& config);

// Trains `arch` from InitParams(net, config.seed).
TrainedResult TrainArch(const CellArch& arch, const SearchSpaceSpec& space,
                        const Dataset& data, const TrainConfig& config);

// Arch id -> trained result, tagged with the dataset and training
// fingerprints it was produced under.
class BenchTable {
 public:
  BenchTable() = default;
  BenchTable(std::string dataset_fingerprint, std::string train_fingerprint)
      : dataset_fp_(std::move(dataset_fingerprint)),
        train_fp_(std::move(train_fingerprint)) {}

  const std::string& dataset_fingerprint() const { return dataset_fp_; }
  const std::string& train_fingerprint() const { return train_fp_; }

  void Insert(TrainedResult result);
  const TrainedResult* Find(int arch_id) const;
  bool Contains(int arch_id) const { return entries_.count(arch_id) > 0; }
  std::size_t size() const { return entries_.size(); }
  std::vector<int> Ids() const;  // ascending

  // `csv` holds one row per arch; `<stem>.json` the fingerprints and
  // `<stem>.curves.csv` the per-epoch curves.
  void Save(const std::filesystem::path& csv) const;
  static BenchTable Load(const std::filesystem::path& csv);

  static std::filesystem::path SidecarPath(const std::filesystem::path& csv);
  static std::filesystem::path CurvesPath(const std::filesystem::path& csv);

 private:
  std::string dataset_fp_;
  std::string train_fp_;
  std::unordered_map<int, TrainedResult> entries_;
};

std::string BenchCsvHeader();
std::string BenchCsvRow(const TrainedResult& r);

// Trains every id with `workers` threads. With `persist_csv`, rows are
// appended as they finish and ids already present in a matching file are
// skipped, so an interrupted build resumes where it stopped. The result does
// not depend on the worker count.
BenchTable BuildBench(const SearchSpaceSpec& space, std::span<const int> ids,
                      const Dataset& data, const TrainConfig& config,
                      int workers,
                      const std::optional<std::filesystem::path>& persist_csv =
                          std::nullopt);

}  // namespace gsnas

#endif  // GSNAS_TRAINER_H_
