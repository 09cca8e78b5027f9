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

#include "gsnas/metrics.h"

#include <Eigen/Dense>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <thread>

#include "gsnas/random.h"

namespace gsnas {
namespace {

constexpr double kNaswotRidge = 1e-6;

class FisherSink : public GradientSink {
 public:
  explicit FisherSink(int output_node) : output_node_(output_node) {}

  void OnDense(const Connection& c, std::size_t batch, const double* output,
               const double* output_grad, const double*,
               const double*) override {
    // Logits are not activations.
    if (c.dst == output_node_) return;
    const std::size_t count = batch * c.out_width;
    for (std::size_t k = 0; k < count; ++k) {
      const double s = output[k] * output_grad[k];
      total_ += s * s;
    }
  }

  double total() const { return total_; }

 private:
  int output_node_;
  double total_ = 0.0;
};

MetricScore MakeScore(MetricKind kind, double value, std::size_t n) {
  MetricScore s;
  s.metric = MetricName(kind);
  s.value = value;
  s.batch_size = n;
  return s;
}

double Dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) acc += a[k] * b[k];
  return acc;
}

MetricScore Synflow(const Network& net, const ParamVector& theta0) {
  ParamVector abs_theta = theta0;
  for (double& v : abs_theta.values) v = std::abs(v);
  const std::size_t d = net.input_dim();
  const Tensor ones({1, d}, std::vector<double>(d, 1.0));
  const ForwardTape tape = RunForward(net, abs_theta, ones);
  const std::vector<double> seed(net.output_dim(), 1.0);
  const std::vector<double> grad = BackpropParams(net, abs_theta, tape, seed);
  return MakeScore(MetricKind::kSynflow, Dot(abs_theta.values, grad), 1);
}

MetricScore Naswot(const Network& net, const ParamVector& theta0,
                   const Batch& batch) {
  const ForwardTape tape = RunForward(net, theta0, batch.inputs);
  const std::size_t n = tape.batch;
  // Binary activation codes of every relu unit, one row per sample.
  std::vector<std::vector<std::uint8_t>> codes(n);
  std::size_t units = 0;
  const auto& conns = net.connections();
  for (std::size_t ci = 0; ci < conns.size(); ++ci) {
    const Connection& c = conns[ci];
    if (!c.dense || c.activation != Activation::kRelu) continue;
    const auto& out = tape.edge_outputs[ci];
    for (std::size_t i = 0; i < n; ++i) {
      for (int u = 0; u < c.out_width; ++u) {
        codes[i].push_back(out[i * c.out_width + u] > 0.0 ? 1 : 0);
      }
    }
    units += c.out_width;
  }
  if (units == 0) {
    throw UnsupportedMetricError("naswot needs at least one relu layer");
  }
  Eigen::MatrixXd kernel(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      std::size_t hamming = 0;
      for (std::size_t u = 0; u < units; ++u) {
        hamming += codes[i][u] != codes[j][u];
      }
      kernel(i, j) = kernel(j, i) = static_cast<double>(units - hamming);
    }
  }
  MetricScore score = MakeScore(MetricKind::kNaswot, 0.0, n);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(kernel);
  if (!lu.isInvertible()) {
    kernel.diagonal().array() += kNaswotRidge;
    lu.compute(kernel);
    score.regularized = true;
  }
  score.value = lu.matrixLU().diagonal().array().abs().log().sum();
  return score;
}

}  // namespace

std::string MetricName(MetricKind kind) {
  switch (kind) {
    case MetricKind::kGradSign:
      return "gradsign";
    case MetricKind::kGradNorm:
      return "grad_norm";
    case MetricKind::kSnip:
      return "snip";
    case MetricKind::kGrasp:
      return "grasp";
    case MetricKind::kSynflow:
      return "synflow";
    case MetricKind::kFisher:
      return "fisher";
    case MetricKind::kNaswot:
      return "naswot";
  }
  return "unknown";
}

MetricKind ParseMetric(const std::string& name) {
  for (MetricKind kind : AllMetrics()) {
    if (MetricName(kind) == name) return kind;
  }
  throw std::invalid_argument("unknown metric '" + name + "'");
}

const std::array<MetricKind, 7>& AllMetrics() {
  static constexpr std::array<MetricKind, 7> kAll = {
      MetricKind::kGradSign, MetricKind::kGradNorm, MetricKind::kSnip,
      MetricKind::kGrasp,    MetricKind::kSynflow,  MetricKind::kFisher,
      MetricKind::kNaswot};
  return kAll;
}

SignMatrix ComputeSignMatrix(const GradMatrix& grads, double zero_tol) {
  if (!(zero_tol >= 0.0)) {
    throw std::invalid_argument("zero_tol must be >= 0");
  }
  SignMatrix signs(grads.rows(), grads.cols());
  for (std::size_t i = 0; i < grads.rows(); ++i) {
    for (std::size_t k = 0; k < grads.cols(); ++k) {
      const double g = grads.at(i, k);
      if (!std::isfinite(g)) {
        throw NonFiniteError("non-finite gradient at (" + std::to_string(i) +
                             ", " + std::to_string(k) + ")");
      }
      signs.set(i, k, g > zero_tol ? 1 : (g < -zero_tol ? -1 : 0));
    }
  }
  return signs;
}

double GradSignFromSigns(const SignMatrix& signs) {
  std::vector<long long> column(signs.cols(), 0);
  for (std::size_t i = 0; i < signs.rows(); ++i) {
    for (std::size_t k = 0; k < signs.cols(); ++k) column[k] += signs.at(i, k);
  }
  long long total = 0;
  for (long long c : column) total += std::llabs(c);
  return static_cast<double>(total);
}

MetricScore GradSignScore(const Network& net, const ParamVector& theta0,
                          const Batch& batch, LossKind loss,
                          double zero_tol) {
  if (batch.size() < 2) {
    throw std::invalid_argument("gradsign needs a batch of at least 2");
  }
  const GradMatrix grads = PerSampleGradients(net, theta0, batch, loss);
  return MakeScore(MetricKind::kGradSign,
                   GradSignFromSigns(ComputeSignMatrix(grads, zero_tol)),
                   batch.size());
}

MetricScore BaselineScore(MetricKind kind, const Network& net,
                          const ParamVector& theta0, const Batch& batch,
                          LossKind loss) {
  if (batch.size() < 1) throw std::invalid_argument("empty batch");
  switch (kind) {
    case MetricKind::kGradSign:
      throw std::invalid_argument("gradsign is not a baseline");
    case MetricKind::kSynflow:
      return Synflow(net, theta0);
    case MetricKind::kNaswot:
      return Naswot(net, theta0, batch);
    case MetricKind::kFisher: {
      const ForwardTape tape = RunForward(net, theta0, batch.inputs);
      const Tensor pred({tape.batch, static_cast<std::size_t>(net.output_dim())},
                        std::vector<double>(tape.output().begin(),
                                            tape.output().end()));
      std::vector<double> dout = LossOutputGradients(pred, batch.labels, loss);
      for (double& g : dout) g /= static_cast<double>(batch.size());
      FisherSink sink(net.output_node());
      RunBackward(net, theta0, tape, dout, sink);
      return MakeScore(kind, sink.total(), batch.size());
    }
    default:
      break;
  }
  const LossAndGradient lg = MeanLossGradient(net, theta0, batch, loss);
  const std::vector<double>& g = lg.gradient;
  double value = 0.0;
  if (kind == MetricKind::kGradNorm) {
    value = std::sqrt(Dot(g, g));
  } else if (kind == MetricKind::kSnip) {
    for (std::size_t k = 0; k < g.size(); ++k) {
      value += std::abs(theta0[k] * g[k]);
    }
  } else {  // grasp
    const std::vector<double> hg =
        HessianVectorProduct(net, theta0, batch, loss, g);
    value = -Dot(hg, theta0.values);
  }
  return MakeScore(kind, value, batch.size());
}

MetricScore ComputeMetric(MetricKind kind, const Network& net,
                          const ParamVector& theta0, const Batch& batch,
                          LossKind loss, double zero_tol) {
  if (kind == MetricKind::kGradSign) {
    return GradSignScore(net, theta0, batch, loss, zero_tol);
  }
  return BaselineScore(kind, net, theta0, batch, loss);
}

MetricScore ScoreArch(const MetricSpec& spec, const CellArch& arch,
                      const Batch& batch, std::uint64_t seed) {
  MetricScore out;
  out.metric = MetricName(spec.metric);
  out.arch_id = arch.id();
  out.seed = seed;
  out.batch_size = batch.size();
  try {
    const ExecutableArch exec =
        Materialize(arch, spec.space, static_cast<int>(batch.inputs.cols()),
                    spec.num_classes);
    const int inits = std::max(1, spec.num_inits);
    double total = 0.0;
    for (int r = 0; r < inits; ++r) {
      const std::uint64_t s =
          r == 0 ? seed : DeriveSeed(seed, "init/" + std::to_string(r));
      const MetricScore one =
          ComputeMetric(spec.metric, exec.network,
                        InitParams(exec.network, s), batch, spec.loss,
                        spec.zero_tol);
      total += one.value;
      out.regularized = out.regularized || one.regularized;
      out.batch_size = one.batch_size;
    }
    out.value = total / inits;
    if (!std::isfinite(out.value)) {
      out.value = 0.0;
      out.error = "non-finite score";
    }
  } catch (const std::exception& e) {
    out.value = 0.0;
    out.error = e.what();
  }
  return out;
}

std::vector<MetricScore> ScorePool(const MetricSpec& spec,
                                   std::span<const CellArch> archs,
                                   const Batch& batch, std::uint64_t seed,
                                   int workers) {
  if (archs.empty()) throw std::invalid_argument("empty architecture pool");
  std::vector<MetricScore> scores(archs.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < archs.size(); i = next++) {
      scores[i] = ScoreArch(spec, archs[i], batch, seed);
    }
  };
  const int n_threads = std::max(1, workers);
  if (n_threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return scores;
}

}  // namespace gsnas
