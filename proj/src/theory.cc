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

#include "gsnas/theory.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "gsnas/io.h"

namespace gsnas {
namespace {

constexpr double kDivergenceFactor = 10.0;

double MaxAbs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

double L1Distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) d += std::abs(a[k] - b[k]);
  return d;
}

Tensor RandomInputs(std::size_t n, int d, Rng& rng) {
  std::vector<double> x(n * d);
  for (double& v : x) v = StandardNormal(rng);
  return Tensor({n, static_cast<std::size_t>(d)}, std::move(x));
}

Batch Regression(const Network& net, const ParamVector& teacher,
                 Tensor inputs, Rng& rng) {
  const Tensor clean = Forward(net, teacher, inputs);
  std::vector<double> y(clean.data().begin(), clean.data().end());
  for (double& v : y) v += 0.1 * StandardNormal(rng);
  Tensor targets(clean.shape(), std::move(y));
  return Batch{std::move(inputs), std::move(targets)};
}

// Random linear or one-hidden-layer tanh regression net with at most
// `max_params` parameters.
NetworkSpec RandomSpec(Rng& rng, std::size_t max_params, InstanceKind* kind) {
  for (;;) {
    *kind = UniformIndex(rng, 2) == 0 ? InstanceKind::kLinear
                                      : InstanceKind::kTanhHidden;
    const int d = 1 + static_cast<int>(UniformIndex(rng, 3));
    const int o = 1 + static_cast<int>(UniformIndex(rng, 2));
    NetworkSpec spec{d, o, {}};
    std::size_t m = 0;
    if (*kind == InstanceKind::kLinear) {
      spec.layers = {{o, Activation::kIdentity, true}};
      m = (d + 1) * o;
    } else {
      const int h = 1 + static_cast<int>(UniformIndex(rng, 3));
      spec.layers = {{h, Activation::kTanh, true},
                     {o, Activation::kIdentity, true}};
      m = (d + 1) * h + (h + 1) * o;
    }
    if (m <= max_params) return spec;
  }
}

TheoryInstance MakeInstance(int id, std::uint64_t seed,
                            const SweepOptions& options, bool planted) {
  Rng rng(DeriveSeed(seed, "theory/instance"));
  TheoryInstance inst;
  inst.id = id;
  inst.planted = planted;
  inst.network = Network(RandomSpec(rng, options.max_params, &inst.kind));
  inst.theta0 = InitParams(inst.network, DeriveSeed(seed, "theory/init"));
  ParamVector teacher = inst.theta0;
  for (double& v : teacher.values) v += 0.5 * StandardNormal(rng);
  const std::size_t n =
      2 + UniformIndex(rng, static_cast<std::uint64_t>(options.max_samples - 1));
  const int d = inst.network.input_dim();
  Batch train = Regression(inst.network, teacher, RandomInputs(n, d, rng), rng);
  if (planted) {
    const std::vector<std::size_t> same(n, 0);
    train = train.Select(same);
  }
  inst.train = std::move(train);
  inst.holdout = Regression(
      inst.network, teacher,
      RandomInputs(static_cast<std::size_t>(options.holdout), d, rng), rng);
  return inst;
}

}  // namespace

std::size_t SampleOptima::num_converged() const {
  return static_cast<std::size_t>(
      std::count(converged.begin(), converged.end(), true));
}

DescentResult GradientDescent(const Network& net, const ParamVector& theta0,
                              const Batch& batch, LossKind kind, double lr,
                              int max_steps, double tol) {
  if (!(lr > 0.0)) throw std::invalid_argument("lr must be > 0");
  DescentResult out;
  ParamVector theta = theta0;
  LossAndGradient lg = MeanLossGradient(net, theta, batch, kind);
  const double start = lg.loss;
  for (;;) {
    if (MaxAbs(lg.gradient) < tol) {
      out.converged = true;
      break;
    }
    if (!std::isfinite(lg.loss) ||
        lg.loss > kDivergenceFactor * std::max(start, 1e-12)) {
      out.diverged = true;
      break;
    }
    if (out.steps >= max_steps) break;
    for (std::size_t k = 0; k < theta.values.size(); ++k) {
      theta.values[k] -= lr * lg.gradient[k];
    }
    ++out.steps;
    try {
      lg = MeanLossGradient(net, theta, batch, kind);
    } catch (const NonFiniteError&) {
      out.diverged = true;
      break;
    }
  }
  out.theta = std::move(theta.values);
  out.loss = lg.loss;
  return out;
}

SampleOptima FindSampleOptima(const Network& net, const ParamVector& theta0,
                              const Batch& samples, LossKind kind, double lr,
                              int max_steps, double tol) {
  SampleOptima out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    DescentResult r = GradientDescent(net, theta0, samples.Sample(i), kind, lr,
                                      max_steps, tol);
    out.per_sample.push_back(std::move(r.theta));
    out.converged.push_back(r.converged);
    out.diverged.push_back(r.diverged);
    out.final_losses.push_back(r.loss);
    out.steps.push_back(r.steps);
  }
  DescentResult joint =
      GradientDescent(net, theta0, samples, kind, lr, max_steps, tol);
  out.joint.values = std::move(joint.theta);
  out.joint_converged = joint.converged;
  out.joint_diverged = joint.diverged;
  out.joint_loss = joint.loss;
  out.joint_steps = joint.steps;
  return out;
}

double MaxDiagonalCurvature(std::span<const ScalarFn> losses,
                            std::span<const double> theta) {
  constexpr double eps = kCurvatureStep;
  std::vector<double> probe(theta.begin(), theta.end());
  double best = -std::numeric_limits<double>::infinity();
  for (const ScalarFn& f : losses) {
    const double mid = f(probe);
    for (std::size_t k = 0; k < probe.size(); ++k) {
      const double saved = probe[k];
      probe[k] = saved + eps;
      const double up = f(probe);
      probe[k] = saved - eps;
      const double down = f(probe);
      probe[k] = saved;
      best = std::max(best, (up - 2.0 * mid + down) / (eps * eps));
    }
  }
  return best;
}

double EstimateSmoothness(std::span<const ScalarFn> losses,
                          std::span<const double> center, double radius,
                          int probes, std::uint64_t seed) {
  if (probes < 1) throw std::invalid_argument("probes must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("radius must be > 0");
  double h = MaxDiagonalCurvature(losses, center);
  Rng rng(seed);
  std::vector<double> point(center.size());
  for (int p = 1; p < probes; ++p) {
    for (std::size_t k = 0; k < point.size(); ++k) {
      point[k] = center[k] + Uniform(rng, -radius, radius);
    }
    h = std::max(h, MaxDiagonalCurvature(losses, point));
  }
  return h;
}

double EstimateSmoothness(const Network& net, const ParamVector& center,
                          const Batch& samples, LossKind kind, double radius,
                          int probes, std::uint64_t seed) {
  std::vector<ScalarFn> losses;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    losses.push_back([&net, kind, sample = samples.Sample(i)](
                         std::span<const double> theta) {
      ParamVector p{std::vector<double>(theta.begin(), theta.end())};
      return MeanLoss(net, p, sample, kind);
    });
  }
  return EstimateSmoothness(losses, center.values, radius, probes, seed);
}

PsiReport ComputePsi(const SampleOptima& optima, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("H must be > 0");
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < optima.per_sample.size(); ++i) {
    if (optima.converged[i]) used.push_back(i);
  }
  if (used.empty()) throw std::invalid_argument("no converged samples");
  PsiReport report;
  report.h = h;
  report.n = used.size();
  report.excluded = optima.per_sample.size() - used.size();
  report.j = optima.joint_loss;
  report.distances.assign(report.n * report.n, 0.0);
  double total = 0.0;
  for (std::size_t a = 0; a < report.n; ++a) {
    for (std::size_t b = 0; b < report.n; ++b) {
      const double d = L1Distance(optima.per_sample[used[a]],
                                  optima.per_sample[used[b]]);
      report.distances[a * report.n + b] = d;
      total += d;
    }
  }
  const double n = static_cast<double>(report.n);
  report.psi = std::sqrt(h) / (n * n) * total;
  return report;
}

BoundReport CheckBounds(const PsiReport& report,
                        std::span<const double> holdout_losses, double sigma,
                        double delta, double slack) {
  if (!(delta > 0.0 && delta < 1.0)) {
    throw std::invalid_argument("delta must be in (0, 1)");
  }
  const double n = static_cast<double>(report.n);
  BoundReport b;
  b.sigma = sigma;
  b.delta = delta;
  b.bound_n3 = n * n * n * report.psi * report.psi;
  b.bound_n3_half = 0.5 * b.bound_n3;
  b.holds_n3 = report.j <= b.bound_n3 + slack;
  b.holds_half = report.j <= b.bound_n3_half + slack;
  double sum = 0.0;
  for (double l : holdout_losses) sum += l;
  b.holdout_mean =
      holdout_losses.empty() ? 0.0 : sum / static_cast<double>(holdout_losses.size());
  b.pop_bound = b.bound_n3 + sigma / std::sqrt(n * delta);
  b.pop_holds = b.holdout_mean <= b.pop_bound + slack;
  return b;
}

std::vector<double> SignAgreementMC(std::span<const double> theta_i,
                                    std::span<const double> theta_j, double a,
                                    int trials, Rng& rng) {
  if (theta_i.size() != theta_j.size()) {
    throw std::invalid_argument("optima differ in length");
  }
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (std::max(MaxAbs(theta_i), MaxAbs(theta_j)) > a) {
    throw std::invalid_argument("optimum outside the hypercube");
  }
  const auto sign = [](double v) { return (v > 0.0) - (v < 0.0); };
  std::vector<long long> agree(theta_i.size(), 0);
  for (int t = 0; t < trials; ++t) {
    for (std::size_t k = 0; k < theta_i.size(); ++k) {
      const double t0 = Uniform(rng, -a, a);
      agree[k] += sign(theta_i[k] - t0) == sign(theta_j[k] - t0);
    }
  }
  std::vector<double> freq(agree.size());
  for (std::size_t k = 0; k < agree.size(); ++k) {
    freq[k] = static_cast<double>(agree[k]) / trials;
  }
  return freq;
}

AgreementCheck AgreementIdentityCheck(std::span<const int> signs) {
  if (signs.empty()) throw std::invalid_argument("empty sign column");
  long long p = 0;
  for (int s : signs) {
    if (s != 1 && s != -1) throw std::invalid_argument("entries must be +-1");
    p += s == 1;
  }
  long long same = 0;
  for (int a : signs) {
    for (int b : signs) same += a == b;
  }
  const double n = static_cast<double>(signs.size());
  AgreementCheck c;
  c.lhs = static_cast<double>(same) / (n * n);
  const double gap = n - 2.0 * static_cast<double>(p);
  c.rhs = 0.5 + gap * gap / (2.0 * n * n);
  c.equal = std::abs(c.lhs - c.rhs) <= 1e-12;
  return c;
}

std::string InstanceKindName(InstanceKind kind) {
  return kind == InstanceKind::kLinear ? "linear" : "tanh_hidden";
}

TheoryInstance MakeTheoryInstance(int id, std::uint64_t seed,
                                  const SweepOptions& options) {
  return MakeInstance(id, seed, options, false);
}

TheoryInstance MakePlantedInstance(int id, std::uint64_t seed,
                                   const SweepOptions& options) {
  return MakeInstance(id, seed, options, true);
}

InstanceResult RunInstance(const TheoryInstance& inst,
                           const SweepOptions& options) {
  const Network& net = inst.network;
  const std::size_t m = net.num_params();
  InstanceResult r;
  r.instance_id = inst.id;
  r.kind = inst.kind;
  r.planted = inst.planted;
  r.m = m;
  const std::uint64_t seed = Fnv1a64(std::to_string(inst.id));
  // Step size from the curvature around theta0: the largest Hessian
  // eigenvalue is at most m times the largest diagonal entry.
  const double h0 = EstimateSmoothness(net, inst.theta0, inst.train,
                                       LossKind::kMse, 0.5, options.probes,
                                       DeriveSeed(seed, "theory/h0"));
  const double lr = 1.0 / (static_cast<double>(m) * std::max(h0, 1e-6));
  const SampleOptima optima =
      FindSampleOptima(net, inst.theta0, inst.train, LossKind::kMse, lr,
                       options.max_steps, options.tol);
  double radius = 0.0;
  for (const auto& t : optima.per_sample) {
    for (std::size_t k = 0; k < m; ++k) {
      radius = std::max(radius, std::abs(t[k] - inst.theta0[k]));
    }
  }
  for (std::size_t k = 0; k < m; ++k) {
    radius = std::max(radius, std::abs(optima.joint[k] - inst.theta0[k]));
  }
  const double h = std::max(
      h0, EstimateSmoothness(net, inst.theta0, inst.train, LossKind::kMse,
                             std::max(radius, 1e-3), options.probes,
                             DeriveSeed(seed, "theory/h")));
  r.n = optima.num_converged();
  r.converged = !optima.joint_diverged && r.n == inst.train.size();
  r.joint_converged = optima.joint_converged;
  for (double l : optima.final_losses) {
    r.max_sample_loss = std::max(r.max_sample_loss, l);
  }
  if (r.n == 0) return r;
  r.psi = ComputePsi(optima, h);

  // Holdout: loss at the joint optimum and the spread of |theta* - theta_u|^2.
  std::vector<double> holdout_losses, spread;
  for (std::size_t u = 0; u < inst.holdout.size(); ++u) {
    const Batch sample = inst.holdout.Sample(u);
    holdout_losses.push_back(MeanLoss(net, optima.joint, sample, LossKind::kMse));
    const DescentResult d = GradientDescent(net, inst.theta0, sample,
                                            LossKind::kMse, lr,
                                            options.max_steps, options.tol);
    if (!d.converged) continue;
    const double dist = L1Distance(optima.joint.values, d.theta);
    spread.push_back(dist * dist);
  }
  double sigma = 0.0;
  if (spread.size() >= 2) {
    double mean = 0.0;
    for (double s : spread) mean += s;
    mean /= spread.size();
    for (double s : spread) sigma += (s - mean) * (s - mean);
    sigma = std::sqrt(sigma / (spread.size() - 1));
  }
  r.bounds = CheckBounds(r.psi, holdout_losses, sigma, options.delta);
  return r;
}

std::vector<InstanceResult> VerifySweep(int count, std::uint64_t seed,
                                        const SweepOptions& options,
                                        int workers) {
  if (count < 0) throw std::invalid_argument("count must be >= 0");
  std::vector<InstanceResult> results(count);
  std::atomic<int> next{0};
  auto work = [&] {
    for (int i = next++; i < count; i = next++) {
      const TheoryInstance inst = MakeTheoryInstance(
          i, DeriveSeed(seed, "theory/" + std::to_string(i)), options);
      results[i] = RunInstance(inst, options);
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < workers; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return results;
}

std::string VerifyCsvHeader() {
  return "instance_id,n,m,psi,H,J,bound_n3,bound_n3_half,holds_n3,holds_half,"
         "pop_bound,pop_holds,kind,planted,converged,joint_converged,"
         "holdout_loss,sigma\n";
}

std::string VerifyCsvRow(const InstanceResult& r) {
  const auto flag = [](bool b) { return b ? "1" : "0"; };
  return std::to_string(r.instance_id) + "," + std::to_string(r.n) + "," +
         std::to_string(r.m) + "," + FormatDouble(r.psi.psi) + "," +
         FormatDouble(r.psi.h) + "," + FormatDouble(r.psi.j) + "," +
         FormatDouble(r.bounds.bound_n3) + "," +
         FormatDouble(r.bounds.bound_n3_half) + "," + flag(r.bounds.holds_n3) +
         "," + flag(r.bounds.holds_half) + "," +
         FormatDouble(r.bounds.pop_bound) + "," + flag(r.bounds.pop_holds) +
         "," + InstanceKindName(r.kind) + "," + flag(r.planted) + "," +
         flag(r.converged) + "," + flag(r.joint_converged) + "," +
         FormatDouble(r.bounds.holdout_mean) + "," +
         FormatDouble(r.bounds.sigma) + "\n";
}

}  // namespace gsnas
