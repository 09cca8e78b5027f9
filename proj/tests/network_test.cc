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

#include "gsnas/network.h"

#include <gmock/gmock.h>
#include <gtest/gtest.h>

#include <cmath>

#include "gsnas/random.h"
#include "oracles.h"

namespace gsnas {
namespace {

using ::testing::HasSubstr;

Network Linear1D() {
  return Network(NetworkSpec{1, 1, {{1, Activation::kIdentity, true}}});
}

Batch Regression(std::vector<double> x, std::vector<double> y, int d = 1) {
  const std::size_t n = y.size() / 1;
  return Batch{Tensor({n, static_cast<std::size_t>(d)}, std::move(x)),
               Tensor({n, 1}, std::move(y))};
}

TEST(TensorTest, RejectsShapeMismatchAndNonFinite) {
  EXPECT_THROW(Tensor({2, 2}, {1, 2, 3}), DimensionError);
  EXPECT_THROW(Tensor({0, 2}, {}), DimensionError);
  EXPECT_THROW(Tensor({1, 2}, {1, NAN}), NonFiniteError);
  EXPECT_THROW(Tensor({1, 1}, {INFINITY}), NonFiniteError);
  const Tensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_EQ(t.at(1, 2), 6.0);
}

TEST(TensorTest, LossKindNamesRoundTrip) {
  for (LossKind k : {LossKind::kMse, LossKind::kCrossEntropy}) {
    EXPECT_EQ(ParseLossKind(LossKindName(k)), k);
  }
  EXPECT_THROW(ParseLossKind("hinge"), std::invalid_argument);
}

TEST(TensorTest, BatchSelectKeepsRowsAndLabels) {
  const Batch b{Tensor({3, 1}, {10, 20, 30}), std::vector<int>{0, 1, 0}};
  const std::vector<std::size_t> rows = {2, 0};
  const Batch s = b.Select(rows);
  EXPECT_EQ(s.inputs.at(0, 0), 30);
  EXPECT_EQ(s.inputs.at(1, 0), 10);
  EXPECT_EQ(std::get<std::vector<int>>(s.labels), (std::vector<int>{0, 0}));
  EXPECT_EQ(b.Sample(1).inputs.at(0, 0), 20);
}

TEST(NetworkSpecTest, LastLayerMustBeDenseWithBias) {
  EXPECT_THROW(Network(NetworkSpec{2, 2, {{2, Activation::kRelu, false}}}),
               DimensionError);
  EXPECT_THROW(Network(NetworkSpec{2, 3, {{2, Activation::kRelu, true}}}),
               DimensionError);
  const Network net(NetworkSpec{3, 2,
                                {{4, Activation::kRelu, true},
                                 {2, Activation::kIdentity, true}}});
  EXPECT_EQ(net.num_params(), 3u * 4 + 4 + 4 * 2 + 2);
}

TEST(NetworkBuilderTest, RejectsEdgesIntoSealedNodes) {
  NetworkBuilder b(2);
  const int a = b.AddNode(3);
  b.AddDense(0, a, Activation::kRelu);
  const int c = b.AddNode(3);
  b.AddDense(a, c, Activation::kRelu);
  EXPECT_THROW(b.AddDense(0, a, Activation::kRelu), DimensionError);
  EXPECT_THROW(b.AddSkip(0, c), DimensionError);  // widths differ
}

TEST(NetworkBuilderTest, OutputNeedsDenseBias) {
  NetworkBuilder b(2);
  const int h = b.AddNode(2);
  b.AddSkip(0, h);
  EXPECT_THROW(std::move(b).Build(), DimensionError);
}

TEST(InitParamsTest, DeterministicAndBoundedByFanIn) {
  const Network net(NetworkSpec{4, 2,
                                {{3, Activation::kTanh, true},
                                 {2, Activation::kIdentity, true}}});
  const ParamVector a = InitParams(net, 1);
  EXPECT_EQ(a, InitParams(net, 1));
  EXPECT_NE(a, InitParams(net, 2));
  // The first layer has fan-in 4.
  for (std::size_t k = 0; k < 4 * 3 + 3; ++k) {
    EXPECT_LE(std::abs(a[k]), 0.5);
  }
  for (std::size_t k = 15; k < a.size(); ++k) {
    EXPECT_LE(std::abs(a[k]), 1.0 / std::sqrt(3.0));
  }
}

TEST(ForwardTest, IdentityLayerPassesInputThrough) {
  const Network net(NetworkSpec{2, 2, {{2, Activation::kIdentity, true}}});
  const ParamVector theta{{1, 0, 0, 1, 0, 0}};
  const Tensor y = Forward(net, theta, Tensor({1, 2}, {1, 2}));
  EXPECT_EQ(y.at(0, 0), 1.0);
  EXPECT_EQ(y.at(0, 1), 2.0);
}

TEST(ForwardTest, NegativeReluPreactivationsGiveZeroHidden) {
  NetworkBuilder b(1);
  const int h = b.AddNode(2);
  b.AddDense(0, h, Activation::kRelu);
  const int out = b.AddNode(1);
  b.AddDense(h, out, Activation::kIdentity);
  const Network net = std::move(b).Build();
  // Hidden weights -1, -2 with bias -1: pre-activations are negative for x>0.
  const ParamVector theta{{-1, -2, -1, -1, 5, 7, 0.25}};
  const ForwardTape tape = RunForward(net, theta, Tensor({1, 1}, {3}));
  EXPECT_THAT(tape.nodes[h], ::testing::ElementsAre(0.0, 0.0));
  EXPECT_EQ(tape.output()[0], 0.25);
}

TEST(ForwardTest, MatchesStraightLineEvaluation) {
  Rng rng(11);
  const oracle::Mlp mlp{3, {5, 4, 2}, {0, 1, 2}, {true, false, true}};
  const Network net(NetworkSpec{3, 2,
                                {{5, Activation::kRelu, true},
                                 {4, Activation::kTanh, false},
                                 {2, Activation::kIdentity, true}}});
  const ParamVector theta = InitParams(net, 3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x = {StandardNormal(rng), StandardNormal(rng),
                             StandardNormal(rng)};
    const Tensor y = Forward(net, theta, Tensor({1, 3}, x));
    const std::vector<double> expect = oracle::MlpForward(mlp, theta.values, x);
    for (int k = 0; k < 2; ++k) EXPECT_NEAR(y.at(0, k), expect[k], 1e-12);
  }
}

TEST(ForwardTest, DimensionErrorNamesLayer) {
  const Network net(NetworkSpec{3, 1, {{1, Activation::kIdentity, true}}});
  try {
    Forward(net, InitParams(net, 0), Tensor({1, 2}, {1, 2}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    EXPECT_THAT(e.what(), HasSubstr("layer 0"));
  }
  EXPECT_THROW(Forward(net, ParamVector{{1, 2}}, Tensor({1, 3}, {1, 2, 3})),
               DimensionError);
}

TEST(LossTest, ClosedFormValues) {
  EXPECT_EQ(PerSampleLosses(Tensor({1, 2}, {0.3, -1}),
                            Tensor({1, 2}, {0.3, -1}), LossKind::kMse)[0],
            0.0);
  EXPECT_NEAR(PerSampleLosses(Tensor({1, 2}, {0, 0}), std::vector<int>{0},
                              LossKind::kCrossEntropy)[0],
              std::log(2.0), 1e-15);
  EXPECT_DOUBLE_EQ(PerSampleLosses(Tensor({1, 2}, {1, 0}),
                                   Tensor({1, 2}, {0, 0}), LossKind::kMse)[0],
                   0.5);
}

TEST(LossTest, LabelErrors) {
  EXPECT_THROW(PerSampleLosses(Tensor({1, 2}, {0, 0}), std::vector<int>{2},
                               LossKind::kCrossEntropy),
               std::out_of_range);
  EXPECT_THROW(PerSampleLosses(Tensor({1, 2}, {0, 0}), Tensor({1, 2}, {0, 1}),
                               LossKind::kCrossEntropy),
               DimensionError);
  EXPECT_THROW(PerSampleLosses(Tensor({2, 2}, {0, 0, 0, 0}),
                               std::vector<int>{0}, LossKind::kMse),
               DimensionError);
}

TEST(LossTest, LargeLogitsStayFinite) {
  const auto l = PerSampleLosses(Tensor({1, 2}, {1000, -1000}),
                                 std::vector<int>{1}, LossKind::kCrossEntropy);
  EXPECT_NEAR(l[0], 2000.0, 1e-9);
}

TEST(GradientTest, OneParameterModel) {
  // y_hat = w x with the bias pinned at 0: w = 3, x = 1, y = 1.
  const Network net = Linear1D();
  const GradMatrix g = PerSampleGradients(net, ParamVector{{3, 0}},
                                          Regression({1}, {1}), LossKind::kMse);
  EXPECT_DOUBLE_EQ(g.at(0, 0), 4.0);
  EXPECT_DOUBLE_EQ(g.at(0, 1), 4.0);
}

TEST(GradientTest, ZeroAtPerSampleOptimum) {
  const Network net(NetworkSpec{2, 1,
                                {{3, Activation::kTanh, true},
                                 {1, Activation::kIdentity, true}}});
  ParamVector theta = InitParams(net, 5);
  const Tensor x({1, 2}, {0.4, -0.7});
  const double fit = Forward(net, theta, x).at(0, 0);
  const GradMatrix g = PerSampleGradients(
      net, theta, Batch{x, Tensor({1, 1}, {fit})}, LossKind::kMse);
  for (std::size_t k = 0; k < g.cols(); ++k) EXPECT_EQ(g.at(0, k), 0.0);
}

TEST(GradientTest, RowsMatchIndependentFiniteDifferences) {
  Rng rng(2024);
  const Activation kActs[] = {Activation::kRelu, Activation::kTanh,
                              Activation::kIdentity};
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 1 + static_cast<int>(UniformIndex(rng, 8));
    const int depth = 1 + static_cast<int>(UniformIndex(rng, 3));
    oracle::Mlp mlp{d, {}, {}, {}};
    NetworkSpec spec{d, 0, {}};
    for (int l = 0; l < depth; ++l) {
      const bool last = l + 1 == depth;
      const int w = 1 + static_cast<int>(UniformIndex(rng, 8));
      const int act = last ? 2 : static_cast<int>(UniformIndex(rng, 3));
      const bool bias = last || UniformIndex(rng, 2) == 0;
      spec.layers.push_back({w, kActs[act], bias});
      mlp.widths.push_back(w);
      mlp.acts.push_back(act);
      mlp.bias.push_back(bias);
    }
    spec.output_dim = spec.layers.back().width;
    const int o = spec.output_dim;
    const Network net(spec);
    const ParamVector theta = InitParams(net, trial);
    std::vector<double> x(2 * d);
    for (double& v : x) v = StandardNormal(rng);
    const bool ce = o >= 2 && trial % 2 == 0;
    Labels labels;
    std::vector<double> targets(2 * o);
    std::vector<int> classes(2);
    if (ce) {
      for (int& c : classes) c = static_cast<int>(UniformIndex(rng, o));
      labels = classes;
    } else {
      for (double& v : targets) v = StandardNormal(rng);
      labels = Tensor({2, static_cast<std::size_t>(o)}, targets);
    }
    const Batch batch{Tensor({2, static_cast<std::size_t>(d)}, x), labels};
    const GradMatrix g = PerSampleGradients(
        net, theta, batch, ce ? LossKind::kCrossEntropy : LossKind::kMse);
    for (int i = 0; i < 2; ++i) {
      const std::vector<double> xi(x.begin() + i * d, x.begin() + (i + 1) * d);
      const auto loss = [&](const std::vector<double>& t) {
        const std::vector<double> y = oracle::MlpForward(mlp, t, xi);
        if (ce) {
          double mx = *std::max_element(y.begin(), y.end()), z = 0.0;
          for (double v : y) z += std::exp(v - mx);
          return -(y[classes[i]] - mx - std::log(z));
        }
        double s = 0.0;
        for (int k = 0; k < o; ++k) {
          s += (y[k] - targets[i * o + k]) * (y[k] - targets[i * o + k]);
        }
        return s / o;
      };
      for (std::size_t k = 0; k < theta.size(); ++k) {
        const double fd =
            oracle::CentralDifference(loss, theta.values, k, 1e-5);
        const double a = g.at(i, k);
        if (std::abs(a) <= 1e-8) continue;
        worst = std::max(worst, std::abs(a - fd) / std::max(std::abs(a), std::abs(fd)));
      }
    }
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(GradientTest, MeanGradientIsRowAverage) {
  const Network net(NetworkSpec{2, 3,
                                {{4, Activation::kTanh, true},
                                 {3, Activation::kIdentity, true}}});
  const ParamVector theta = InitParams(net, 8);
  const Batch batch{Tensor({3, 2}, {1, 2, -1, 0.5, 0.3, 0.1}),
                    std::vector<int>{0, 2, 1}};
  const GradMatrix g =
      PerSampleGradients(net, theta, batch, LossKind::kCrossEntropy);
  const LossAndGradient mean =
      MeanLossGradient(net, theta, batch, LossKind::kCrossEntropy);
  const auto losses = PerSampleLosses(Forward(net, theta, batch),
                                      batch.labels, LossKind::kCrossEntropy);
  EXPECT_NEAR(mean.loss, (losses[0] + losses[1] + losses[2]) / 3, 1e-14);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    EXPECT_NEAR(mean.gradient[k], (g.at(0, k) + g.at(1, k) + g.at(2, k)) / 3,
                1e-14);
  }
}

TEST(HessianVectorTest, MatchesDifferenceOfGradients) {
  const Network net(NetworkSpec{2, 2,
                                {{5, Activation::kTanh, true},
                                 {2, Activation::kIdentity, true}}});
  const ParamVector theta = InitParams(net, 4);
  const Batch batch{Tensor({2, 2}, {0.3, -1.2, 0.8, 0.4}),
                    std::vector<int>{1, 0}};
  std::vector<double> v(theta.size());
  Rng rng(1);
  for (double& x : v) x = StandardNormal(rng);
  const auto hv =
      HessianVectorProduct(net, theta, batch, LossKind::kCrossEntropy, v);
  const double eps = 1e-5;
  ParamVector up = theta, down = theta;
  for (std::size_t k = 0; k < v.size(); ++k) {
    up[k] += eps * v[k];
    down[k] -= eps * v[k];
  }
  const auto gu =
      MeanLossGradient(net, up, batch, LossKind::kCrossEntropy).gradient;
  const auto gd =
      MeanLossGradient(net, down, batch, LossKind::kCrossEntropy).gradient;
  for (std::size_t k = 0; k < v.size(); ++k) {
    EXPECT_NEAR(hv[k], (gu[k] - gd[k]) / (2 * eps), 1e-6);
  }
}

TEST(FiniteDiffTest, Examples) {
  const auto square = [](std::span<const double> t) { return t[0] * t[0]; };
  const std::vector<double> three = {3.0};
  EXPECT_NEAR(FiniteDiffGradient(square, three, 1e-5)[0], 6.0, 1e-6);
  const auto constant = [](std::span<const double>) { return 1.5; };
  const std::vector<double> point = {1, 2, 3};
  EXPECT_THAT(FiniteDiffGradient(constant, point, 1e-5),
              ::testing::Each(0.0));
  EXPECT_THROW(FiniteDiffGradient(square, three, 0.0), std::invalid_argument);
}

TEST(FiniteDiffTest, NetworkVersionAgreesWithReverseMode) {
  const Network net(NetworkSpec{3, 2,
                                {{4, Activation::kTanh, true},
                                 {2, Activation::kIdentity, true}}});
  const ParamVector theta = InitParams(net, 9);
  const Batch sample{Tensor({1, 3}, {0.1, 0.2, -0.3}), std::vector<int>{1}};
  const auto fd =
      FiniteDiffGradient(net, theta, sample, LossKind::kCrossEntropy, 1e-5);
  const GradMatrix g =
      PerSampleGradients(net, theta, sample, LossKind::kCrossEntropy);
  for (std::size_t k = 0; k < theta.size(); ++k) {
    EXPECT_NEAR(fd[k], g.at(0, k), 1e-8);
  }
}

TEST(DeterminismTest, RepeatedCallsAreBitIdentical) {
  const Network net(NetworkSpec{2, 2,
                                {{6, Activation::kRelu, true},
                                 {2, Activation::kIdentity, true}}});
  const ParamVector theta = InitParams(net, 3);
  const Batch batch{Tensor({2, 2}, {1, -1, 0.5, 2}), std::vector<int>{0, 1}};
  const GradMatrix a =
      PerSampleGradients(net, theta, batch, LossKind::kCrossEntropy);
  const GradMatrix b =
      PerSampleGradients(net, theta, batch, LossKind::kCrossEntropy);
  for (std::size_t k = 0; k < a.cols(); ++k) {
    EXPECT_EQ(a.at(0, k), b.at(0, k));
    EXPECT_EQ(a.at(1, k), b.at(1, k));
  }
}

}  // namespace
}  // namespace gsnas
