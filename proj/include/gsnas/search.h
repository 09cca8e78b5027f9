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

#ifndef GSNAS_SEARCH_H_
#define GSNAS_SEARCH_H_

#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "gsnas/archspace.h"
#include "gsnas/metrics.h"
#include "gsnas/trainer.h"

namespace gsnas {

struct Evaluation {
  double val_acc = 0.0;
  double test_acc = 0.0;
  double cost = 0.0;  // simulated seconds
};

struct ScoreResult {
  double value = 0.0;
  double cost = 0.0;
};

// What a search may ask about an architecture: its accuracy after a number
// of training epochs, or its zero-cost score.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual int max_epochs() const = 0;
  // 1 <= epochs <= max_epochs().
  virtual Evaluation Evaluate(const CellArch& arch, int epochs) = 0;
  virtual ScoreResult Score(const CellArch& arch) = 0;
};

// Accuracies come from a BenchTable; architectures missing from it are
// trained on demand with the same data and config, then kept. Scores are
// GradSign on a fixed batch. Partial budgets read the stored learning
// curve.
class BenchEvaluator : public Evaluator {
 public:
  BenchEvaluator(BenchTable bench, const Dataset& data, SearchSpaceSpec space,
                 TrainConfig config, MetricSpec metric, Batch batch,
                 std::uint64_t score_seed);

  int max_epochs() const override { return config_.epochs; }
  Evaluation Evaluate(const CellArch& arch, int epochs) override;
  ScoreResult Score(const CellArch& arch) override;

  const BenchTable& bench() const { return bench_; }
  std::size_t trained() const { return trained_; }

 private:
  const TrainedResult& Lookup(const CellArch& arch);

  BenchTable bench_;
  const Dataset& data_;
  SearchSpaceSpec space_;
  TrainConfig config_;
  MetricSpec metric_;
  Batch batch_;
  std::uint64_t score_seed_;
  std::size_t trained_ = 0;
  std::unordered_map<int, double> scores_;
};

// Closed-form landscapes for testing: accuracy(arch, epochs) and score(arch)
// are supplied directly.
class FunctionEvaluator : public Evaluator {
 public:
  using AccuracyFn = std::function<double(const CellArch&, int epochs)>;
  using ScoreFn = std::function<double(const CellArch&)>;

  FunctionEvaluator(AccuracyFn accuracy, ScoreFn score, int max_epochs = 1,
                    double cost_per_epoch = 1.0, double score_cost = 0.0);

  int max_epochs() const override { return max_epochs_; }
  Evaluation Evaluate(const CellArch& arch, int epochs) override;
  ScoreResult Score(const CellArch& arch) override;

  int evaluations() const { return evaluations_; }
  int scorings() const { return scorings_; }

 private:
  AccuracyFn accuracy_;
  ScoreFn score_;
  int max_epochs_;
  double cost_per_epoch_;
  double score_cost_;
  int evaluations_ = 0;
  int scorings_ = 0;
};

class Budget {
 public:
  explicit Budget(double total);
  double total() const { return total_; }
  double consumed() const { return consumed_; }
  bool exhausted() const { return consumed_ >= total_; }
  void Charge(double cost) { consumed_ += cost; }

 private:
  double total_;
  double consumed_ = 0.0;
};

struct TraceEvent {
  int step = 0;
  // sampled: drawn from the REINFORCE policy (value = its probability);
  // scored: zero-cost score; evaluated: full-budget accuracy;
  // partial: accuracy after `epochs` < max epochs.
  std::string action;
  int arch_id = -1;
  double value = 0.0;
  double cum_budget = 0.0;
  int epochs = 0;
};

struct SearchTrace {
  std::vector<TraceEvent> events;
  int final_arch = -1;  // best full-budget val accuracy; first on ties
  double final_val = 0.0;
  double final_test = 0.0;
  // The budget ran out before the search could run as designed (REA's
  // initial population, HB's first full-budget rung).
  bool partial = false;
  int score_cache_hits = 0;  // HB only
  int score_cache_misses = 0;
};

enum class SearchAlgorithm { kRandom, kEvolution, kReinforce, kHyperband };
std::string SearchAlgorithmName(SearchAlgorithm algorithm);
SearchAlgorithm ParseSearchAlgorithm(const std::string& name);

struct SearchConfig {
  SearchAlgorithm algorithm = SearchAlgorithm::kRandom;
  bool assisted = false;
  double budget = 600.0;  // simulated seconds
  int pool_size = 8;
  int population_size = 20;
  int sample_size = 10;
  double lr = 0.5;
  double baseline_decay = 0.9;
  int b_min = 1;  // epochs; 0 means max_epochs / 9
  int b_max = 0;  // epochs; 0 means max_epochs
  int eta = 3;
};

// With assisted == false or pool_size == 1 nothing is scored, so the two
// produce identical traces.
SearchTrace RunRS(Evaluator& evaluator, double budget, bool assisted,
                  int pool_size, std::uint64_t seed);
SearchTrace RunREA(Evaluator& evaluator, double budget, bool assisted,
                   int population_size, int sample_size, int pool_size,
                   std::uint64_t seed);

struct PolicyState {
  std::array<std::array<double, kNumCellOps>, kCellEdges> logits{};
  double ema = 0.0;  // biased moving average of rewards
  int updates = 0;

  std::array<double, kNumCellOps> Probabilities(int edge) const;
  // Bias-corrected moving average; 0 before the first update.
  double baseline(double decay) const;
};

SearchTrace RunReinforce(Evaluator& evaluator, double budget, bool assisted,
                         int pool_size, double lr, double baseline_decay,
                         std::uint64_t seed, PolicyState* final_policy = nullptr);

struct Bracket {
  int s = 0;
  int configs = 0;
  std::vector<int> rung_epochs;
  std::vector<int> rung_sizes;
};

// Successive-halving brackets s = s_max..0 for budgets in epochs.
std::vector<Bracket> HyperbandBrackets(int b_min, int b_max, int eta);

SearchTrace RunHB(Evaluator& evaluator, double budget, bool assisted,
                  int b_min, int b_max, int eta, int pool_size,
                  std::uint64_t seed);

SearchTrace RunSearch(const SearchConfig& config, Evaluator& evaluator,
                      std::uint64_t seed);

std::string TraceCsvHeader();
std::string TraceCsv(const SearchTrace& trace);

struct SearchSummary {
  std::string algorithm;
  bool assisted = false;
  int runs = 0;
  double val_mean = 0.0;
  double val_std = 0.0;
  double test_mean = 0.0;
  double test_std = 0.0;
  int partial_runs = 0;
};

SearchSummary Summarize(const std::string& algorithm, bool assisted,
                        const std::vector<SearchTrace>& traces);
// JSON array of summaries.
std::string SummaryJson(const std::vector<SearchSummary>& summaries);

}  // namespace gsnas

#endif  // GSNAS_SEARCH_H_
