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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "gsnas/random.h"
#include "oracles.h"

namespace gsnas {
namespace {

double PearsonOfAverageRanks(const std::vector<double>& x,
                             const std::vector<double>& y) {
  // Average ranks by counting: rank = #less + (#equal + 1) / 2.
  const auto ranks = [](const std::vector<double>& v) {
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      double less = 0, equal = 0;
      for (double w : v) {
        less += w < v[i];
        equal += w == v[i];
      }
      r[i] = less + (equal + 1) / 2;
    }
    return r;
  };
  const auto rx = ranks(x), ry = ranks(y);
  const double n = x.size();
  const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
  const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mx) * (ry[i] - my);
    sxx += (rx[i] - mx) * (rx[i] - mx);
    syy += (ry[i] - my) * (ry[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

TEST(RanksTest, TiesShareMeanRank) {
  const std::vector<double> xs = {10, 20, 20, 5, 20};
  EXPECT_EQ(AverageRanks(xs), (std::vector<double>{2, 4, 4, 1, 4}));
}

TEST(SpearmanTest, Examples) {
  const std::vector<double> a = {1, 2, 3}, b = {1, 3, 2};
  EXPECT_NEAR(SpearmanRho(a, b), 0.5, 1e-15);
  const std::vector<double> c = {3, 2, 1};
  EXPECT_NEAR(SpearmanRho(a, c), -1.0, 1e-15);
  EXPECT_NEAR(SpearmanRho(a, a), 1.0, 1e-15);
}

TEST(SpearmanTest, MatchesOracles) {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    const int n = 2 + static_cast<int>(UniformIndex(rng, 200));
    std::vector<double> x(n), y(n), xi(n), yi(n);
    for (int i = 0; i < n; ++i) {
      x[i] = StandardNormal(rng);
      y[i] = x[i] + StandardNormal(rng);
      xi[i] = static_cast<double>(UniformIndex(rng, 10));
      yi[i] = static_cast<double>(UniformIndex(rng, 10)) + xi[i];
    }
    EXPECT_NEAR(SpearmanRho(x, y), oracle::SpearmanNoTies(x, y), 1e-12);
    bool constant = std::all_of(xi.begin(), xi.end(),
                                [&](double v) { return v == xi[0]; });
    if (!constant) {
      EXPECT_NEAR(SpearmanRho(xi, yi), PearsonOfAverageRanks(xi, yi), 1e-12);
    }
  }
}

TEST(SpearmanTest, UndefinedInputs) {
  const std::vector<double> one = {1}, flat = {2, 2, 2}, xs = {1, 2, 3};
  EXPECT_THROW(SpearmanRho(one, one), UndefinedStatisticError);
  EXPECT_THROW(SpearmanRho(flat, xs), UndefinedStatisticError);
  const std::vector<double> two = {1, 2};
  EXPECT_THROW(SpearmanRho(two, xs), std::invalid_argument);
  const std::vector<double> nan = {1, NAN, 3};
  EXPECT_THROW(SpearmanRho(nan, xs), std::invalid_argument);
}

TEST(KendallTest, FastPathMatchesQuadraticOracle) {
  Rng rng(10);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(500), y(500);
    // Mix of continuous and heavily tied inputs.
    const int levels = t % 2 == 0 ? 0 : 5 + static_cast<int>(t);
    for (int i = 0; i < 500; ++i) {
      if (levels == 0) {
        x[i] = StandardNormal(rng);
        y[i] = 0.5 * x[i] + StandardNormal(rng);
      } else {
        x[i] = static_cast<double>(UniformIndex(rng, levels));
        y[i] = static_cast<double>(UniformIndex(rng, levels)) + x[i] / 2;
      }
    }
    ASSERT_NEAR(KendallTau(x, y), oracle::KendallTauB(x, y), 1e-12);
  }
}

TEST(KendallTest, PairCountsAddUp) {
  const std::vector<double> x = {1, 2, 2, 3, 3, 3, 4};
  const std::vector<double> y = {1, 1, 2, 3, 3, 0, 5};
  const KendallResult r = KendallTauDetailed(x, y);
  EXPECT_EQ(r.concordant + r.discordant + r.x_ties + r.y_ties + r.joint_ties,
            21);
  EXPECT_EQ(r.joint_ties, 1);  // (3,3) twice
  EXPECT_EQ(r.x_ties, 3);
  EXPECT_EQ(r.y_ties, 1);
  EXPECT_NEAR(r.tau, oracle::KendallTauB(x, y), 1e-15);
}

TEST(KendallTest, Examples) {
  const std::vector<double> a = {1, 2, 3, 4}, b = {4, 3, 2, 1};
  EXPECT_EQ(KendallTau(a, a), 1.0);
  EXPECT_EQ(KendallTau(a, b), -1.0);
  const std::vector<double> flat = {1, 1, 1, 1};
  EXPECT_THROW(KendallTau(a, flat), UndefinedStatisticError);
  const std::vector<double> swapped = {1, 3, 2, 4};
  EXPECT_NEAR(KendallTau(a, swapped), 4.0 / 6.0, 1e-15);
}

BenchTable SyntheticBench(int n, std::vector<double>* acc) {
  BenchTable bench("d", "t");
  Rng rng(3);
  for (int i = 0; i < n; ++i) {
    TrainedResult r;
    r.arch_id = i * 7;
    r.test_acc = 0.5 + 0.4 * Uniform01(rng);
    r.val_acc = r.test_acc + 0.01 * StandardNormal(rng);
    acc->push_back(r.test_acc);
    bench.Insert(r);
  }
  return bench;
}

MetricScore Score(int id, double v, std::string error = "") {
  MetricScore s;
  s.metric = "gradsign";
  s.arch_id = id;
  s.value = v;
  s.error = std::move(error);
  return s;
}

TEST(CorrelateTest, ExcludesFailuresAndDivergedEntries) {
  std::vector<double> acc;
  BenchTable bench = SyntheticBench(30, &acc);
  TrainedResult diverged;
  diverged.arch_id = 1000;
  diverged.diverged = true;
  bench.Insert(diverged);
  std::vector<MetricScore> scores;
  std::vector<double> used_s, used_a;
  Rng rng(5);
  for (int i = 0; i < 30; ++i) {
    const double v = acc[i] + 0.1 * StandardNormal(rng);
    if (i % 10 == 3) {
      scores.push_back(Score(i * 7, 0.0, "boom"));
      continue;
    }
    scores.push_back(Score(i * 7, v));
    used_s.push_back(v);
    used_a.push_back(acc[i]);
  }
  scores.push_back(Score(1000, 5.0));
  const CorrelationReport r = Correlate(bench, scores);
  EXPECT_EQ(r.n, used_s.size());
  EXPECT_EQ(r.excluded, 4u);
  EXPECT_NEAR(r.spearman_rho, oracle::SpearmanNoTies(used_s, used_a), 1e-12);
  EXPECT_NEAR(r.kendall_tau, oracle::KendallTauB(used_s, used_a), 1e-12);
  EXPECT_EQ(r.metric, "gradsign");
  EXPECT_EQ(CorrelationCsvHeader().back(), '\n');
  EXPECT_EQ(CorrelationCsvRow(r).rfind("gradsign,", 0), 0u);
}

TEST(CorrelateTest, PerfectAndIndependentScores) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(400, &acc);
  std::vector<MetricScore> perfect, noise;
  Rng rng(12);
  for (int i = 0; i < 400; ++i) {
    perfect.push_back(Score(i * 7, acc[i]));
    noise.push_back(Score(i * 7, StandardNormal(rng)));
  }
  const CorrelationReport p = Correlate(bench, perfect);
  EXPECT_EQ(p.spearman_rho, 1.0);
  EXPECT_EQ(p.kendall_tau, 1.0);
  const CorrelationReport r = Correlate(bench, noise);
  EXPECT_LT(std::abs(r.spearman_rho), 0.15);
}

TEST(CorrelateTest, Errors) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(5, &acc);
  const std::vector<MetricScore> unknown = {Score(3, 1.0), Score(0, 2.0)};
  EXPECT_THROW(Correlate(bench, unknown), std::invalid_argument);
  const std::vector<MetricScore> one = {Score(0, 1.0)};
  EXPECT_THROW(Correlate(bench, one), UndefinedStatisticError);
}

TEST(BestOfNTest, PerfectMetricPicksOptimal) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(200, &acc);
  std::vector<MetricScore> scores;
  for (int i = 0; i < 200; ++i) scores.push_back(Score(i * 7, acc[i]));
  const SelectionReport r = BestOfNSelection(bench, scores, 10, 300, 1);
  EXPECT_EQ(r.selected_test, r.optimal_test);
  EXPECT_EQ(r.runs, 300);
  EXPECT_EQ(r.selected_test.size(), 300u);
  // The random pick averages to the population mean.
  const double mean = std::accumulate(acc.begin(), acc.end(), 0.0) / 200;
  EXPECT_NEAR(r.random.test_mean, mean, 4 * r.random.test_std / std::sqrt(300));
  for (int k = 0; k < 300; ++k) {
    EXPECT_LE(r.random_test[k], r.optimal_test[k]);
  }
}

TEST(BestOfNTest, FailedScoresRankLastAndResultIsDeterministic) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(20, &acc);
  std::vector<MetricScore> scores;
  for (int i = 0; i < 20; ++i) {
    scores.push_back(i == 0 ? Score(0, 1e9, "failed") : Score(i * 7, -acc[i]));
  }
  const SelectionReport a = BestOfNSelection(bench, scores, 20, 5, 9);
  const SelectionReport b = BestOfNSelection(bench, scores, 20, 5, 9);
  EXPECT_EQ(a.selected_test, b.selected_test);
  EXPECT_EQ(a.random_test, b.random_test);
  // Every run sees the whole bench, so the pick is the worst non-failed arch.
  double worst = 1.0;
  for (int i = 1; i < 20; ++i) worst = std::min(worst, acc[i]);
  for (double v : a.selected_test) EXPECT_EQ(v, worst);
  EXPECT_THROW(BestOfNSelection(bench, scores, 21, 5, 9),
               std::invalid_argument);
  scores.pop_back();
  EXPECT_THROW(BestOfNSelection(bench, scores, 5, 5, 9), std::invalid_argument);
}

TEST(BestOfNTest, SingletonSampleMakesAllPicksCoincide) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(30, &acc);
  std::vector<MetricScore> scores;
  Rng rng(2);
  for (int i = 0; i < 30; ++i) scores.push_back(Score(i * 7, Uniform01(rng)));
  const SelectionReport r = BestOfNSelection(bench, scores, 1, 50, 3);
  EXPECT_EQ(r.selected_test, r.random_test);
  EXPECT_EQ(r.selected_test, r.optimal_test);
}

TEST(BestOfNTest, ConstantMetricMatchesRandomComparator) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(200, &acc);
  std::vector<MetricScore> scores;
  for (int i = 0; i < 200; ++i) scores.push_back(Score(i * 7, 1.0));
  const SelectionReport r = BestOfNSelection(bench, scores, 20, 500, 4);
  const double se = std::sqrt(
      (r.selected.test_std * r.selected.test_std +
       r.random.test_std * r.random.test_std) / 500);
  EXPECT_LT(std::abs(r.selected.test_mean - r.random.test_mean), 2 * se);
}

TEST(BestOfNTest, CsvHasThreeComparators) {
  std::vector<double> acc;
  const BenchTable bench = SyntheticBench(10, &acc);
  std::vector<MetricScore> scores;
  for (int i = 0; i < 10; ++i) scores.push_back(Score(i * 7, acc[i]));
  const std::string rows =
      SelectionCsvRows(BestOfNSelection(bench, scores, 3, 4, 2));
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), 3);
  EXPECT_NE(rows.find("gradsign,"), std::string::npos);
  EXPECT_NE(rows.find("random,"), std::string::npos);
  EXPECT_NE(rows.find("optimal,"), std::string::npos);
}

}  // namespace
}  // namespace gsnas
