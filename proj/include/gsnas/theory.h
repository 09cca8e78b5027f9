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

#ifndef GSNAS_THEORY_H_
#define GSNAS_THEORY_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsnas/network.h"
#include "gsnas/random.h"
#include "gsnas/tensor.h"

namespace gsnas {

// Gradient-descent limits from a shared starting point: one run per sample
// on its own loss, plus one run on the mean loss.
struct SampleOptima {
  std::vector<std::vector<double>> per_sample;  // n x m
  std::vector<bool> converged;
  std::vector<bool> diverged;
  std::vector<double> final_losses;
  std::vector<int> steps;
  ParamVector joint;
  bool joint_converged = false;
  bool joint_diverged = false;
  double joint_loss = 0.0;  // J: mean training loss at `joint`
  int joint_steps = 0;

  std::size_t num_converged() const;
};

struct DescentResult {
  std::vector<double> theta;
  double loss = 0.0;
  int steps = 0;
  bool converged = false;  // max |grad| < tol
  bool diverged = false;   // loss grew past 10x its starting value
};

// Plain gradient descent on the mean loss of `batch`.
DescentResult GradientDescent(const Network& net, const ParamVector& theta0,
                              const Batch& batch, LossKind kind, double lr,
                              int max_steps, double tol);

SampleOptima FindSampleOptima(const Network& net, const ParamVector& theta0,
                              const Batch& samples, LossKind kind, double lr,
                              int max_steps, double tol);

using ScalarFn = std::function<double(std::span<const double>)>;

// Step of the central second differences used by EstimateSmoothness.
inline constexpr double kCurvatureStep = 1e-4;

// Largest central second difference over coordinates of each function at
// `theta`.
double MaxDiagonalCurvature(std::span<const ScalarFn> losses,
                            std::span<const double> theta);

// Max of MaxDiagonalCurvature over the centre plus `probes` - 1 points drawn
// uniformly from the l-inf ball of `radius`. This is a sampled lower bound
// of the true supremum, and it never decreases as probes are added.
double EstimateSmoothness(std::span<const ScalarFn> losses,
                          std::span<const double> center, double radius,
                          int probes, std::uint64_t seed);

// Same, with one function per sample of `samples`.
double EstimateSmoothness(const Network& net, const ParamVector& center,
                          const Batch& samples, LossKind kind, double radius,
                          int probes, std::uint64_t seed);

struct PsiReport {
  double psi = 0.0;
  double h = 0.0;
  std::size_t n = 0;         // samples used
  std::size_t excluded = 0;  // unconverged samples left out
  std::vector<double> distances;  // n x n ordered-pair l1 distances
  double j = 0.0;
};

// psi = sqrt(H) / n^2 * sum over ordered pairs (i, j) of |theta_i - theta_j|_1
// over converged samples.
PsiReport ComputePsi(const SampleOptima& optima, double h);

struct BoundReport {
  double bound_n3 = 0.0;       // n^3 psi^2
  double bound_n3_half = 0.0;  // n^3 psi^2 / 2
  bool holds_n3 = false;
  bool holds_half = false;
  double sigma = 0.0;
  double delta = 0.0;
  double holdout_mean = 0.0;
  double pop_bound = 0.0;  // n^3 psi^2 + sigma / sqrt(n delta)
  bool pop_holds = false;
};

// Comparisons allow `slack` of absolute error so that an exactly shared
// optimum, reached only to numerical precision, still counts as tight.
BoundReport CheckBounds(const PsiReport& report,
                        std::span<const double> holdout_losses, double sigma,
                        double delta, double slack = 1e-12);

// Per-dimension frequency over theta0 ~ U[-a, a]^m of
// sign(theta_i - theta0) == sign(theta_j - theta0).
std::vector<double> SignAgreementMC(std::span<const double> theta_i,
                                    std::span<const double> theta_j, double a,
                                    int trials, Rng& rng);

struct AgreementCheck {
  double lhs = 0.0;  // ordered-pair same-sign fraction
  double rhs = 0.0;  // 1/2 + (n - 2p)^2 / (2 n^2)
  bool equal = false;
};

// Entries must be +1 or -1.
AgreementCheck AgreementIdentityCheck(std::span<const int> signs);

// Instance sweep.

enum class InstanceKind { kLinear, kTanhHidden };
std::string InstanceKindName(InstanceKind kind);

struct TheoryInstance {
  int id = 0;
  InstanceKind kind = InstanceKind::kLinear;
  Network network{NetworkSpec{1, 1, {{1, Activation::kIdentity, true}}}};
  ParamVector theta0;
  Batch train;
  Batch holdout;
  bool planted = false;  // every training sample is the same point
};

struct SweepOptions {
  int max_samples = 8;
  std::size_t max_params = 12;
  int holdout = 16;
  int max_steps = 50000;
  double tol = 1e-9;
  int probes = 8;
  double delta = 0.1;
};

TheoryInstance MakeTheoryInstance(int id, std::uint64_t seed,
                                  const SweepOptions& options);
// Psi is exactly zero here: all per-sample optima are the same run.
TheoryInstance MakePlantedInstance(int id, std::uint64_t seed,
                                   const SweepOptions& options);

struct InstanceResult {
  int instance_id = 0;
  InstanceKind kind = InstanceKind::kLinear;
  bool planted = false;
  std::size_t n = 0;
  std::size_t m = 0;
  // Every per-sample run hit tol and the joint run did not diverge. The
  // joint run descends monotonically, so J at its last iterate bounds the
  // loss at its limit from above even when it stopped early.
  bool converged = false;
  bool joint_converged = false;
  double max_sample_loss = 0.0;
  PsiReport psi;
  BoundReport bounds;
};

InstanceResult RunInstance(const TheoryInstance& instance,
                           const SweepOptions& options);

// Instances 0..count-1 with seeds derived from `seed`; order is by id and
// does not depend on `workers`.
std::vector<InstanceResult> VerifySweep(int count, std::uint64_t seed,
                                        const SweepOptions& options,
                                        int workers = 1);

std::string VerifyCsvHeader();
std::string VerifyCsvRow(const InstanceResult& r);

}  // namespace gsnas

#endif  // GSNAS_THEORY_H_
