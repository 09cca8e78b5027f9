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

#include "gsnas/search.h"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "gsnas/io.h"
#include "gsnas/random.h"
#include "json.hpp"

namespace gsnas {
namespace {

// Event log plus the running best full-budget evaluation.
class Recorder {
 public:
  explicit Recorder(const Budget& budget, int max_epochs)
      : budget_(budget), max_epochs_(max_epochs) {}

  void Sampled(const CellArch& arch, double probability) {
    Add("sampled", arch, probability, 0);
  }

  double Scored(Evaluator& ev, Budget& budget, const CellArch& arch) {
    const ScoreResult s = ev.Score(arch);
    budget.Charge(s.cost);
    Add("scored", arch, s.value, 0);
    return s.value;
  }

  Evaluation Evaluated(Evaluator& ev, Budget& budget, const CellArch& arch,
                       int epochs) {
    const Evaluation e = ev.Evaluate(arch, epochs);
    budget.Charge(e.cost);
    const bool full = epochs == max_epochs_;
    Add(full ? "evaluated" : "partial", arch, e.val_acc, epochs);
    if (full && (trace_.final_arch < 0 || e.val_acc > trace_.final_val)) {
      trace_.final_arch = arch.id();
      trace_.final_val = e.val_acc;
      trace_.final_test = e.test_acc;
    }
    if (!full && (best_partial_ < 0 || e.val_acc > partial_val_)) {
      best_partial_ = arch.id();
      partial_val_ = e.val_acc;
      partial_test_ = e.test_acc;
    }
    return e;
  }

  SearchTrace Finish() {
    if (trace_.final_arch < 0) {
      trace_.partial = true;
      trace_.final_arch = best_partial_;
      trace_.final_val = partial_val_;
      trace_.final_test = partial_test_;
    }
    return std::move(trace_);
  }

  SearchTrace& trace() { return trace_; }

 private:
  void Add(const char* action, const CellArch& arch, double value,
           int epochs) {
    trace_.events.push_back({static_cast<int>(trace_.events.size()), action,
                             arch.id(), value, budget_.consumed(), epochs});
  }

  const Budget& budget_;
  int max_epochs_;
  SearchTrace trace_;
  int best_partial_ = -1;
  double partial_val_ = 0.0;
  double partial_test_ = 0.0;
};

void CheckBudget(double budget) {
  if (!(budget > 0.0)) throw std::invalid_argument("budget must be > 0");
}

void CheckPool(int pool_size) {
  if (pool_size < 1) throw std::invalid_argument("pool_size must be >= 1");
}

// Index of the highest score; first on ties.
std::size_t ArgMax(const std::vector<double>& values) {
  return static_cast<std::size_t>(
      std::max_element(values.begin(), values.end()) - values.begin());
}

// Scores every candidate and returns the best one. Empty when the budget
// runs out first, so no action starts on an exhausted budget.
std::optional<CellArch> PickByScore(const std::vector<CellArch>& pool,
                                    Evaluator& ev, Budget& budget,
                                    Recorder& rec) {
  std::vector<double> scores;
  for (const CellArch& a : pool) {
    if (budget.exhausted()) return std::nullopt;
    scores.push_back(rec.Scored(ev, budget, a));
  }
  if (budget.exhausted()) return std::nullopt;
  return pool[ArgMax(scores)];
}

double Mean(const std::vector<double>& v) {
  return v.empty() ? 0.0
                   : std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double SampleStd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1));
}

}  // namespace

BenchEvaluator::BenchEvaluator(BenchTable bench, const Dataset& data,
                               SearchSpaceSpec space, TrainConfig config,
                               MetricSpec metric, Batch batch,
                               std::uint64_t score_seed)
    : bench_(std::move(bench)),
      data_(data),
      space_(space),
      config_(config),
      metric_(metric),
      batch_(std::move(batch)),
      score_seed_(score_seed) {}

const TrainedResult& BenchEvaluator::Lookup(const CellArch& arch) {
  if (const TrainedResult* r = bench_.Find(arch.id())) return *r;
  bench_.Insert(TrainArch(arch, space_, data_, config_));
  ++trained_;
  return *bench_.Find(arch.id());
}

Evaluation BenchEvaluator::Evaluate(const CellArch& arch, int epochs) {
  if (epochs < 1 || epochs > config_.epochs) {
    throw std::invalid_argument("epochs out of range");
  }
  const TrainedResult& r = Lookup(arch);
  Evaluation e;
  if (epochs == config_.epochs) {
    e = {r.val_acc, r.test_acc, r.cost_seconds};
  } else {
    const EpochRecord at = r.AtBudget(epochs);
    const ExecutableArch exec =
        Materialize(arch, space_, data_.spec.dim, data_.spec.num_classes);
    e = {at.val_acc, at.test_acc,
         SimulatedTrainingCost(exec.network, data_, epochs)};
  }
  return e;
}

ScoreResult BenchEvaluator::Score(const CellArch& arch) {
  const ExecutableArch exec =
      Materialize(arch, space_, data_.spec.dim, data_.spec.num_classes);
  const double cost = SimulatedScoringCost(exec.network, batch_.size());
  auto it = scores_.find(arch.id());
  if (it == scores_.end()) {
    const MetricScore s = ScoreArch(metric_, arch, batch_, score_seed_);
    const double value =
        s.ok() ? s.value : -std::numeric_limits<double>::infinity();
    it = scores_.emplace(arch.id(), value).first;
  }
  return {it->second, cost};
}

FunctionEvaluator::FunctionEvaluator(AccuracyFn accuracy, ScoreFn score,
                                     int max_epochs, double cost_per_epoch,
                                     double score_cost)
    : accuracy_(std::move(accuracy)),
      score_(std::move(score)),
      max_epochs_(max_epochs),
      cost_per_epoch_(cost_per_epoch),
      score_cost_(score_cost) {}

Evaluation FunctionEvaluator::Evaluate(const CellArch& arch, int epochs) {
  ++evaluations_;
  const double acc = accuracy_(arch, epochs);
  return {acc, acc, cost_per_epoch_ * epochs};
}

ScoreResult FunctionEvaluator::Score(const CellArch& arch) {
  ++scorings_;
  return {score_(arch), score_cost_};
}

Budget::Budget(double total) : total_(total) { CheckBudget(total); }

std::string SearchAlgorithmName(SearchAlgorithm algorithm) {
  switch (algorithm) {
    case SearchAlgorithm::kRandom:
      return "rs";
    case SearchAlgorithm::kEvolution:
      return "rea";
    case SearchAlgorithm::kReinforce:
      return "reinforce";
    case SearchAlgorithm::kHyperband:
      return "hb";
  }
  return "unknown";
}

SearchAlgorithm ParseSearchAlgorithm(const std::string& name) {
  for (SearchAlgorithm a :
       {SearchAlgorithm::kRandom, SearchAlgorithm::kEvolution,
        SearchAlgorithm::kReinforce, SearchAlgorithm::kHyperband}) {
    if (SearchAlgorithmName(a) == name) return a;
  }
  throw std::invalid_argument("unknown search algorithm '" + name + "'");
}

SearchTrace RunRS(Evaluator& ev, double total, bool assisted, int pool_size,
                  std::uint64_t seed) {
  CheckPool(pool_size);
  Budget budget(total);
  Recorder rec(budget, ev.max_epochs());
  Rng rng(seed);
  const int pool = assisted ? pool_size : 1;
  while (!budget.exhausted()) {
    std::vector<CellArch> candidates;
    for (int i = 0; i < pool; ++i) candidates.push_back(RandomArch(rng));
    const std::optional<CellArch> pick =
        pool == 1 ? candidates.front()
                  : PickByScore(candidates, ev, budget, rec);
    if (!pick) break;
    rec.Evaluated(ev, budget, *pick, ev.max_epochs());
  }
  return rec.Finish();
}

SearchTrace RunREA(Evaluator& ev, double total, bool assisted,
                   int population_size, int sample_size, int pool_size,
                   std::uint64_t seed) {
  CheckPool(pool_size);
  if (sample_size < 1 || population_size < sample_size) {
    throw std::invalid_argument(
        "need population_size >= sample_size >= 1");
  }
  Budget budget(total);
  Recorder rec(budget, ev.max_epochs());
  Rng rng(seed);
  struct Member {
    CellArch arch;
    double val;
  };
  std::deque<Member> population;
  while (static_cast<int>(population.size()) < population_size &&
         !budget.exhausted()) {
    const CellArch a = RandomArch(rng);
    population.push_back({a, rec.Evaluated(ev, budget, a, ev.max_epochs()).val_acc});
  }
  if (static_cast<int>(population.size()) < population_size) {
    SearchTrace t = rec.Finish();
    t.partial = true;
    return t;
  }
  const int pool = assisted ? pool_size : 1;
  std::vector<std::size_t> index(population.size());
  while (!budget.exhausted()) {
    // Tournament over distinct members.
    std::iota(index.begin(), index.end(), 0);
    for (int i = 0; i < sample_size; ++i) {
      const std::size_t j = i + UniformIndex(rng, index.size() - i);
      std::swap(index[i], index[j]);
    }
    std::size_t parent = index[0];
    for (int i = 1; i < sample_size; ++i) {
      if (population[index[i]].val > population[parent].val) parent = index[i];
    }
    std::vector<CellArch> children;
    for (int i = 0; i < pool; ++i) {
      children.push_back(MutateArch(population[parent].arch, rng));
    }
    const std::optional<CellArch> child =
        pool == 1 ? children.front() : PickByScore(children, ev, budget, rec);
    if (!child) break;
    const double val =
        rec.Evaluated(ev, budget, *child, ev.max_epochs()).val_acc;
    population.push_back({*child, val});
    population.pop_front();
  }
  return rec.Finish();
}

std::array<double, kNumCellOps> PolicyState::Probabilities(int edge) const {
  const auto& l = logits[edge];
  const double top = *std::max_element(l.begin(), l.end());
  std::array<double, kNumCellOps> p{};
  double z = 0.0;
  for (int k = 0; k < kNumCellOps; ++k) z += p[k] = std::exp(l[k] - top);
  for (double& v : p) v /= z;
  return p;
}

double PolicyState::baseline(double decay) const {
  if (updates == 0) return 0.0;
  return ema / (1.0 - std::pow(decay, updates));
}

SearchTrace RunReinforce(Evaluator& ev, double total, bool assisted,
                         int pool_size, double lr, double baseline_decay,
                         std::uint64_t seed, PolicyState* final_policy) {
  CheckPool(pool_size);
  if (!(lr >= 0.0)) throw std::invalid_argument("lr must be >= 0");
  if (!(baseline_decay >= 0.0 && baseline_decay < 1.0)) {
    throw std::invalid_argument("baseline_decay must be in [0, 1)");
  }
  Budget budget(total);
  Recorder rec(budget, ev.max_epochs());
  Rng rng(seed);
  PolicyState policy;
  const int pool = assisted ? pool_size : 1;
  while (!budget.exhausted()) {
    std::array<std::uint8_t, kCellEdges> ops{};
    std::array<std::array<double, kNumCellOps>, kCellEdges> probs{};
    double probability = 1.0;
    for (int e = 0; e < kCellEdges; ++e) {
      probs[e] = policy.Probabilities(e);
      const double u = Uniform01(rng);
      double acc = 0.0;
      int k = 0;
      for (; k < kNumCellOps - 1; ++k) {
        acc += probs[e][k];
        if (u < acc) break;
      }
      ops[e] = static_cast<std::uint8_t>(k);
      probability *= probs[e][k];
    }
    const CellArch sampled(ops);
    rec.Sampled(sampled, probability);
    CellArch child = sampled;
    if (pool > 1) {
      std::vector<CellArch> mutants;
      for (int i = 0; i < pool; ++i) mutants.push_back(MutateArch(sampled, rng));
      const std::optional<CellArch> pick =
          PickByScore(mutants, ev, budget, rec);
      if (!pick) break;
      child = *pick;
    }
    const double reward =
        rec.Evaluated(ev, budget, child, ev.max_epochs()).val_acc;
    policy.ema = baseline_decay * policy.ema + (1.0 - baseline_decay) * reward;
    ++policy.updates;
    const double advantage = reward - policy.baseline(baseline_decay);
    // d log pi(sampled) / d logit[e][k] = 1[k == op] - p[e][k].
    for (int e = 0; e < kCellEdges; ++e) {
      for (int k = 0; k < kNumCellOps; ++k) {
        const double g = (k == ops[e] ? 1.0 : 0.0) - probs[e][k];
        policy.logits[e][k] += lr * advantage * g;
      }
    }
  }
  if (final_policy != nullptr) *final_policy = policy;
  return rec.Finish();
}

std::vector<Bracket> HyperbandBrackets(int b_min, int b_max, int eta) {
  if (b_min < 1 || b_min > b_max) {
    throw std::invalid_argument("need 1 <= b_min <= b_max");
  }
  if (eta < 2) throw std::invalid_argument("eta must be >= 2");
  int s_max = 0;
  for (long long scale = eta; static_cast<long long>(b_min) * scale <= b_max;
       scale *= eta) {
    ++s_max;
  }
  std::vector<Bracket> brackets;
  for (int s = s_max; s >= 0; --s) {
    Bracket b;
    b.s = s;
    const double eta_s = std::pow(eta, s);
    b.configs = static_cast<int>(
        std::ceil((s_max + 1.0) / (s + 1.0) * eta_s - 1e-9));
    for (int i = 0; i <= s; ++i) {
      const double epochs = b_max / std::pow(eta, s - i);
      b.rung_epochs.push_back(std::max(1, static_cast<int>(std::lround(epochs))));
      b.rung_sizes.push_back(std::max(
          1, static_cast<int>(std::floor(b.configs / std::pow(eta, i) + 1e-9))));
    }
    brackets.push_back(std::move(b));
  }
  return brackets;
}

SearchTrace RunHB(Evaluator& ev, double total, bool assisted, int b_min,
                  int b_max, int eta, int pool_size, std::uint64_t seed) {
  CheckPool(pool_size);
  if (b_max > ev.max_epochs()) {
    throw std::invalid_argument("b_max exceeds the evaluator's epochs");
  }
  const std::vector<Bracket> brackets = HyperbandBrackets(b_min, b_max, eta);
  Budget budget(total);
  // Only b_max-epoch results count as final.
  Recorder rec(budget, b_max);
  Rng rng(seed);
  const int pool = assisted ? pool_size : 1;
  std::unordered_map<int, double> score_cache;
  SearchTrace& trace = rec.trace();
  for (std::size_t bi = 0; !budget.exhausted(); bi = (bi + 1) % brackets.size()) {
    const Bracket& b = brackets[bi];
    std::vector<CellArch> configs;
    const int draws = b.configs * pool;
    for (int i = 0; i < draws; ++i) configs.push_back(RandomArch(rng));
    if (pool > 1) {
      std::vector<double> scores;
      for (const CellArch& a : configs) {
        auto it = score_cache.find(a.id());
        if (it != score_cache.end()) {
          ++trace.score_cache_hits;
          scores.push_back(it->second);
          continue;
        }
        if (budget.exhausted()) break;
        ++trace.score_cache_misses;
        const double v = rec.Scored(ev, budget, a);
        score_cache.emplace(a.id(), v);
        scores.push_back(v);
      }
      if (budget.exhausted()) break;
      std::vector<std::size_t> order(configs.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) {
                         return scores[x] > scores[y];
                       });
      std::vector<CellArch> top;
      for (int i = 0; i < b.configs; ++i) top.push_back(configs[order[i]]);
      configs = std::move(top);
    }
    for (std::size_t rung = 0; rung < b.rung_epochs.size(); ++rung) {
      std::vector<double> vals;
      for (const CellArch& a : configs) {
        if (budget.exhausted()) break;
        vals.push_back(rec.Evaluated(ev, budget, a, b.rung_epochs[rung]).val_acc);
      }
      if (vals.size() < configs.size() || rung + 1 == b.rung_epochs.size()) break;
      std::vector<std::size_t> order(configs.size());
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t x, std::size_t y) {
                         return vals[x] > vals[y];
                       });
      std::vector<CellArch> keep;
      const int k = std::min<int>(b.rung_sizes[rung + 1], configs.size());
      for (int i = 0; i < k; ++i) keep.push_back(configs[order[i]]);
      configs = std::move(keep);
    }
  }
  return rec.Finish();
}

SearchTrace RunSearch(const SearchConfig& c, Evaluator& ev,
                      std::uint64_t seed) {
  switch (c.algorithm) {
    case SearchAlgorithm::kRandom:
      return RunRS(ev, c.budget, c.assisted, c.pool_size, seed);
    case SearchAlgorithm::kEvolution:
      return RunREA(ev, c.budget, c.assisted, c.population_size,
                    c.sample_size, c.pool_size, seed);
    case SearchAlgorithm::kReinforce:
      return RunReinforce(ev, c.budget, c.assisted, c.pool_size, c.lr,
                          c.baseline_decay, seed);
    case SearchAlgorithm::kHyperband: {
      const int b_max = c.b_max > 0 ? c.b_max : ev.max_epochs();
      const int b_min = c.b_min > 0 ? c.b_min : std::max(1, b_max / 9);
      return RunHB(ev, c.budget, c.assisted, b_min, b_max, c.eta,
                   c.pool_size, seed);
    }
  }
  throw std::invalid_argument("unknown algorithm");
}

std::string TraceCsvHeader() { return "step,action,arch_id,value,cum_budget\n"; }

std::string TraceCsv(const SearchTrace& trace) {
  std::ostringstream os;
  for (const TraceEvent& e : trace.events) {
    os << e.step << ',' << e.action << ',' << e.arch_id << ','
       << FormatDouble(e.value) << ',' << FormatDouble(e.cum_budget) << '\n';
  }
  return os.str();
}

SearchSummary Summarize(const std::string& algorithm, bool assisted,
                        const std::vector<SearchTrace>& traces) {
  SearchSummary s;
  s.algorithm = algorithm;
  s.assisted = assisted;
  s.runs = static_cast<int>(traces.size());
  std::vector<double> val, test;
  for (const SearchTrace& t : traces) {
    val.push_back(t.final_val);
    test.push_back(t.final_test);
    s.partial_runs += t.partial;
  }
  s.val_mean = Mean(val);
  s.val_std = SampleStd(val);
  s.test_mean = Mean(test);
  s.test_std = SampleStd(test);
  return s;
}

std::string SummaryJson(const std::vector<SearchSummary>& summaries) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const SearchSummary& s : summaries) {
    out.push_back({{"algorithm", s.algorithm},
                   {"assisted", s.assisted},
                   {"runs", s.runs},
                   {"val_mean", s.val_mean},
                   {"val_std", s.val_std},
                   {"test_mean", s.test_mean},
                   {"test_std", s.test_std},
                   {"partial_runs", s.partial_runs}});
  }
  return out.dump(2) + "\n";
}

}  // namespace gsnas
