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

#include "gsnas/stats.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "gsnas/io.h"
#include "gsnas/random.h"

namespace gsnas {
namespace {

void CheckPair(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) {
    throw std::invalid_argument("length mismatch: " +
                                std::to_string(xs.size()) + " vs " +
                                std::to_string(ys.size()));
  }
  if (xs.size() < 2) {
    throw UndefinedStatisticError("need at least 2 pairs");
  }
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (std::isnan(xs[i]) || std::isnan(ys[i])) {
      throw std::invalid_argument("NaN at index " + std::to_string(i));
    }
  }
}

// Number of pairs inside runs of equal values of a sorted sequence.
template <typename Eq>
std::int64_t TiedPairs(std::size_t n, Eq equal) {
  std::int64_t pairs = 0;
  std::size_t start = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    if (i == n || !equal(i - 1, i)) {
      const auto t = static_cast<std::int64_t>(i - start);
      pairs += t * (t - 1) / 2;
      start = i;
    }
  }
  return pairs;
}

// Sorts v ascending and returns the number of strict inversions.
std::int64_t MergeCount(std::vector<double>& v, std::vector<double>& buf,
                        std::size_t lo, std::size_t hi) {
  if (hi - lo < 2) return 0;
  const std::size_t mid = lo + (hi - lo) / 2;
  std::int64_t swaps = MergeCount(v, buf, lo, mid) + MergeCount(v, buf, mid, hi);
  std::size_t i = lo, j = mid, k = lo;
  while (i < mid && j < hi) {
    if (v[j] < v[i]) {
      swaps += static_cast<std::int64_t>(mid - i);
      buf[k++] = v[j++];
    } else {
      buf[k++] = v[i++];
    }
  }
  while (i < mid) buf[k++] = v[i++];
  while (j < hi) buf[k++] = v[j++];
  std::copy(buf.begin() + lo, buf.begin() + hi, v.begin() + lo);
  return swaps;
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / v.size();
}

double SampleStd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / (v.size() - 1));
}

SelectionStats Summarize(const std::vector<double>& val,
                         const std::vector<double>& test) {
  return {Mean(val), SampleStd(val), Mean(test), SampleStd(test)};
}

}  // namespace

std::vector<double> AverageRanks(std::span<const double> xs) {
  std::vector<std::size_t> order(xs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return xs[a] < xs[b]; });
  std::vector<double> ranks(xs.size());
  std::size_t start = 0;
  for (std::size_t i = 1; i <= order.size(); ++i) {
    if (i == order.size() || xs[order[i]] != xs[order[start]]) {
      // Positions start..i-1 hold ranks start+1..i.
      const double r = 0.5 * static_cast<double>(start + 1 + i);
      for (std::size_t k = start; k < i; ++k) ranks[order[k]] = r;
      start = i;
    }
  }
  return ranks;
}

double SpearmanRho(std::span<const double> xs, std::span<const double> ys) {
  CheckPair(xs, ys);
  const std::vector<double> rx = AverageRanks(xs);
  const std::vector<double> ry = AverageRanks(ys);
  const double mx = Mean(rx), my = Mean(ry);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedStatisticError("spearman: zero rank variance");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

KendallResult KendallTauDetailed(std::span<const double> xs,
                                 std::span<const double> ys) {
  CheckPair(xs, ys);
  const std::size_t n = xs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return xs[a] < xs[b] || (xs[a] == xs[b] && ys[a] < ys[b]);
  });
  const std::int64_t tied_x = TiedPairs(n, [&](std::size_t a, std::size_t b) {
    return xs[order[a]] == xs[order[b]];
  });
  const std::int64_t tied_xy =
      TiedPairs(n, [&](std::size_t a, std::size_t b) {
        return xs[order[a]] == xs[order[b]] && ys[order[a]] == ys[order[b]];
      });
  std::vector<double> y(n), buf(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = ys[order[i]];
  const std::int64_t swaps = MergeCount(y, buf, 0, n);
  const std::int64_t tied_y = TiedPairs(
      n, [&](std::size_t a, std::size_t b) { return y[a] == y[b]; });

  const auto total = static_cast<std::int64_t>(n) * (n - 1) / 2;
  KendallResult r;
  r.discordant = swaps;
  r.concordant = total - tied_x - tied_y + tied_xy - swaps;
  r.x_ties = tied_x - tied_xy;
  r.y_ties = tied_y - tied_xy;
  r.joint_ties = tied_xy;
  const double denom = std::sqrt(static_cast<double>(total - tied_x) *
                                 static_cast<double>(total - tied_y));
  if (denom == 0.0) throw UndefinedStatisticError("kendall: all pairs tied");
  r.tau = std::clamp(
      static_cast<double>(r.concordant - r.discordant) / denom, -1.0, 1.0);
  return r;
}

double KendallTau(std::span<const double> xs, std::span<const double> ys) {
  return KendallTauDetailed(xs, ys).tau;
}

CorrelationReport Correlate(const BenchTable& bench,
                            std::span<const MetricScore> scores) {
  CorrelationReport report;
  if (!scores.empty()) report.metric = scores.front().metric;
  std::vector<double> xs, ys;
  for (const MetricScore& s : scores) {
    const TrainedResult* r = bench.Find(s.arch_id);
    if (r == nullptr) {
      throw std::invalid_argument("arch " + std::to_string(s.arch_id) +
                                  " is not in the bench");
    }
    if (r->diverged || !s.ok()) {
      ++report.excluded;
      continue;
    }
    xs.push_back(s.value);
    ys.push_back(r->test_acc);
  }
  if (xs.size() < 2) {
    throw UndefinedStatisticError("fewer than 2 usable pairs");
  }
  report.n = xs.size();
  report.spearman_rho = SpearmanRho(xs, ys);
  const KendallResult k = KendallTauDetailed(xs, ys);
  report.kendall_tau = k.tau;
  report.score_tied_pairs = k.x_ties + k.joint_ties;
  report.accuracy_tied_pairs = k.y_ties + k.joint_ties;
  return report;
}

std::string CorrelationCsvHeader() {
  return "metric,n,spearman_rho,kendall_tau,score_tied_pairs,"
         "accuracy_tied_pairs,excluded\n";
}

std::string CorrelationCsvRow(const CorrelationReport& r) {
  std::ostringstream os;
  os << r.metric << ',' << r.n << ',' << FormatDouble(r.spearman_rho) << ','
     << FormatDouble(r.kendall_tau) << ',' << r.score_tied_pairs << ','
     << r.accuracy_tied_pairs << ',' << r.excluded << '\n';
  return os.str();
}

SelectionReport BestOfNSelection(const BenchTable& bench,
                                 std::span<const MetricScore> scores, int n,
                                 int runs, std::uint64_t seed) {
  if (runs < 1) throw std::invalid_argument("runs must be >= 1");
  if (n < 1 || static_cast<std::size_t>(n) > bench.size()) {
    throw std::invalid_argument("N must be in [1, bench size]");
  }
  std::unordered_map<int, const MetricScore*> by_id;
  for (const MetricScore& s : scores) by_id[s.arch_id] = &s;
  const std::vector<int> ids = bench.Ids();
  for (int id : ids) {
    if (!by_id.count(id)) {
      throw std::invalid_argument("no score for arch " + std::to_string(id));
    }
  }
  SelectionReport report;
  if (!scores.empty()) report.metric = scores.front().metric;
  report.n = n;
  report.runs = runs;
  std::vector<double> sel_val, rnd_val, opt_val;
  std::vector<int> pool(ids.size());
  for (int run = 0; run < runs; ++run) {
    Rng rng(DeriveSeed(seed, "best_of_n/run/" + std::to_string(run)));
    std::copy(ids.begin(), ids.end(), pool.begin());
    // Partial Fisher-Yates: the first n entries are the sample.
    for (int i = 0; i < n; ++i) {
      const std::size_t j = i + UniformIndex(rng, pool.size() - i);
      std::swap(pool[i], pool[j]);
    }
    const TrainedResult* best = nullptr;
    const MetricScore* best_score = nullptr;
    const TrainedResult* oracle = nullptr;
    for (int i = 0; i < n; ++i) {
      const TrainedResult* r = bench.Find(pool[i]);
      const MetricScore* s = by_id.at(pool[i]);
      const bool better =
          best == nullptr ||
          (s->ok() && (!best_score->ok() || s->value > best_score->value));
      if (better) {
        best = r;
        best_score = s;
      }
      if (oracle == nullptr || r->test_acc > oracle->test_acc) oracle = r;
    }
    const TrainedResult* pick = bench.Find(pool[UniformIndex(rng, n)]);
    sel_val.push_back(best->val_acc);
    report.selected_test.push_back(best->test_acc);
    rnd_val.push_back(pick->val_acc);
    report.random_test.push_back(pick->test_acc);
    opt_val.push_back(oracle->val_acc);
    report.optimal_test.push_back(oracle->test_acc);
  }
  report.selected = Summarize(sel_val, report.selected_test);
  report.random = Summarize(rnd_val, report.random_test);
  report.optimal = Summarize(opt_val, report.optimal_test);
  return report;
}

SelectionReport BestOfNSelection(const MetricSpec& spec,
                                 const BenchTable& bench, const Batch& batch,
                                 int n, int runs, std::uint64_t seed,
                                 int workers) {
  std::vector<CellArch> archs;
  for (int id : bench.Ids()) archs.push_back(DecodeArch(id));
  const std::vector<MetricScore> scores =
      ScorePool(spec, archs, batch, DeriveSeed(seed, "best_of_n/init"),
                workers);
  return BestOfNSelection(bench, scores, n, runs, seed);
}

std::string SelectionCsvHeader() {
  return "metric,selector,n,runs,val_mean,val_std,test_mean,test_std\n";
}

std::string SelectionCsvRows(const SelectionReport& r) {
  std::ostringstream os;
  const auto row = [&](const std::string& selector, const SelectionStats& s) {
    os << r.metric << ',' << selector << ',' << r.n << ',' << r.runs << ','
       << FormatDouble(s.val_mean) << ',' << FormatDouble(s.val_std) << ','
       << FormatDouble(s.test_mean) << ',' << FormatDouble(s.test_std) << '\n';
  };
  row(r.metric, r.selected);
  row("random", r.random);
  row("optimal", r.optimal);
  return os.str();
}

}  // namespace gsnas
