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

#ifndef GSNAS_STATS_H_
#define GSNAS_STATS_H_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsnas/metrics.h"
#include "gsnas/trainer.h"

namespace gsnas {

// A coefficient is undefined for the input (constant ranks, too few pairs).
class UndefinedStatisticError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// 1-based ranks; tied values share the mean of the ranks they span.
std::vector<double> AverageRanks(std::span<const double> xs);

// Pearson correlation of the average ranks.
double SpearmanRho(std::span<const double> xs, std::span<const double> ys);

struct KendallResult {
  double tau = 0.0;
  std::int64_t concordant = 0;
  std::int64_t discordant = 0;
  std::int64_t x_ties = 0;  // pairs tied in x only
  std::int64_t y_ties = 0;  // pairs tied in y only
  std::int64_t joint_ties = 0;
};

// Tau-b in O(n log n) (sort plus merge-sort inversion count).
KendallResult KendallTauDetailed(std::span<const double> xs,
                                 std::span<const double> ys);
double KendallTau(std::span<const double> xs, std::span<const double> ys);

struct CorrelationReport {
  std::string metric;
  std::size_t n = 0;
  double spearman_rho = 0.0;
  double kendall_tau = 0.0;
  std::int64_t score_tied_pairs = 0;     // includes joint ties
  std::int64_t accuracy_tied_pairs = 0;  // includes joint ties
  std::size_t excluded = 0;  // diverged entries and failed scores
};

// Pairs (score, test accuracy). Throws std::invalid_argument for ids not in
// the bench and UndefinedStatisticError for fewer than two usable pairs.
CorrelationReport Correlate(const BenchTable& bench,
                            std::span<const MetricScore> scores);

std::string CorrelationCsvHeader();
std::string CorrelationCsvRow(const CorrelationReport& r);

struct SelectionStats {
  double val_mean = 0.0;
  double val_std = 0.0;  // sample std; 0 for a single run
  double test_mean = 0.0;
  double test_std = 0.0;
};

struct SelectionReport {
  std::string metric;
  int n = 0;
  int runs = 0;
  SelectionStats selected;
  SelectionStats random;
  SelectionStats optimal;
  // Per-run test accuracy of each pick, in run order.
  std::vector<double> selected_test;
  std::vector<double> random_test;
  std::vector<double> optimal_test;
};

// Each run samples `n` bench ids without replacement, picks the highest
// score (first sampled on ties; failed scores rank last), a uniformly random
// member, and the member with the best test accuracy. Every bench id needs a
// score.
SelectionReport BestOfNSelection(const BenchTable& bench,
                                 std::span<const MetricScore> scores, int n,
                                 int runs, std::uint64_t seed);

// Scores the whole bench with `spec` on `batch`, then selects.
SelectionReport BestOfNSelection(const MetricSpec& spec,
                                 const BenchTable& bench, const Batch& batch,
                                 int n, int runs, std::uint64_t seed,
                                 int workers = 1);

// One row per comparator: metric, random, optimal.
std::string SelectionCsvHeader();
std::string SelectionCsvRows(const SelectionReport& r);

}  // namespace gsnas

#endif  // GSNAS_STATS_H_
