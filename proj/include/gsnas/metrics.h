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

#ifndef GSNAS_METRICS_H_
#define GSNAS_METRICS_H_

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gsnas/archspace.h"
#include "gsnas/network.h"
#include "gsnas/tensor.h"

namespace gsnas {

enum class MetricKind {
  kGradSign,
  kGradNorm,
  kSnip,
  kGrasp,
  kSynflow,
  kFisher,
  kNaswot,
};

// Stable lowercase identifiers: gradsign, grad_norm, snip, grasp, synflow,
// fisher, naswot.
std::string MetricName(MetricKind kind);
MetricKind ParseMetric(const std::string& name);
const std::array<MetricKind, 7>& AllMetrics();

// The metric cannot be computed for this network (e.g. naswot without relu).
class UnsupportedMetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One metric value for one architecture. Higher is better for every metric.
struct MetricScore {
  std::string metric;
  double value = 0.0;
  int arch_id = -1;
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  // naswot only: the kernel was singular and eps * I was added.
  bool regularized = false;
  // Non-empty when the score could not be computed; `value` is then 0.
  std::string error;

  bool ok() const { return error.empty(); }
};

// Entry (i, k) is +1, -1 or 0 for G[i, k] > tol, < -tol, or in between.
class SignMatrix {
 public:
  SignMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  int at(std::size_t i, std::size_t k) const { return data_[i * cols_ + k]; }
  void set(std::size_t i, std::size_t k, int s) {
    data_[i * cols_ + k] = static_cast<std::int8_t>(s);
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::int8_t> data_;
};

// Throws NonFiniteError on NaN/inf entries, std::invalid_argument on a
// negative tolerance.
SignMatrix ComputeSignMatrix(const GradMatrix& grads, double zero_tol);

// sum_k | sum_i s[i, k] |
double GradSignFromSigns(const SignMatrix& signs);

// GradSign of a network at theta0 on one batch (n >= 2).
MetricScore GradSignScore(const Network& net, const ParamVector& theta0,
                          const Batch& batch, LossKind loss,
                          double zero_tol = 0.0);

// Full-batch baselines on the mean loss; `kind` must not be kGradSign.
MetricScore BaselineScore(MetricKind kind, const Network& net,
                          const ParamVector& theta0, const Batch& batch,
                          LossKind loss);

// Dispatches to GradSignScore or BaselineScore.
MetricScore ComputeMetric(MetricKind kind, const Network& net,
                          const ParamVector& theta0, const Batch& batch,
                          LossKind loss, double zero_tol = 0.0);

struct MetricSpec {
  MetricKind metric = MetricKind::kGradSign;
  LossKind loss = LossKind::kCrossEntropy;
  double zero_tol = 0.0;
  // Scores are averaged over this many initializations; the first one is
  // InitParams(net, seed).
  int num_inits = 1;
  SearchSpaceSpec space;
  int num_classes = 2;
};

// Scores each architecture on the same batch from InitParams(net, seed).
// Output order follows `archs`; failures are recorded per entry. The result
// does not depend on `workers`.
std::vector<MetricScore> ScorePool(const MetricSpec& spec,
                                   std::span<const CellArch> archs,
                                   const Batch& batch, std::uint64_t seed,
                                   int workers = 1);

// Scores one architecture the way ScorePool does.
MetricScore ScoreArch(const MetricSpec& spec, const CellArch& arch,
                      const Batch& batch, std::uint64_t seed);

}  // namespace gsnas

#endif  // GSNAS_METRICS_H_
