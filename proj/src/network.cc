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

#include <algorithm>
#include <cmath>
#include <string>

#include "gsnas/random.h"
#include "graph_kernels.h"

namespace gsnas {

using internal::Dual;

namespace {

void CheckLabels(const Labels& labels, std::size_t n, std::size_t o,
                 LossKind kind) {
  if (const auto* ids = std::get_if<std::vector<int>>(&labels)) {
    if (ids->size() != n) {
      throw DimensionError("got " + std::to_string(ids->size()) +
                           " labels for " + std::to_string(n) + " samples");
    }
    for (int y : *ids) {
      if (y < 0 || static_cast<std::size_t>(y) >= o) {
        throw std::out_of_range("label " + std::to_string(y) +
                                " outside class range [0, " +
                                std::to_string(o) + ")");
      }
    }
    return;
  }
  const Tensor& y = std::get<Tensor>(labels);
  if (kind == LossKind::kCrossEntropy) {
    throw DimensionError("cross_entropy needs integer class labels");
  }
  if (y.rows() != n || y.cols() != o) {
    throw DimensionError("target tensor does not match predictions [" +
                         std::to_string(n) + ", " + std::to_string(o) + "]");
  }
}

void CheckInputs(const Network& net, const ParamVector& theta,
                 const Tensor& inputs) {
  if (theta.size() != net.num_params()) {
    throw DimensionError("parameter vector has " +
                         std::to_string(theta.size()) + " entries, network "
                         "expects " + std::to_string(net.num_params()));
  }
  if (inputs.shape().size() != 2) {
    throw DimensionError("inputs must be a [n, d] matrix");
  }
  if (inputs.cols() != static_cast<std::size_t>(net.input_dim())) {
    // The first connection reading the input is the offending layer.
    std::size_t layer = 0;
    for (const Connection& c : net.connections()) {
      if (c.src == 0) break;
      ++layer;
    }
    throw DimensionError("layer " + std::to_string(layer) + " expects " +
                         std::to_string(net.input_dim()) +
                         " input features, got " +
                         std::to_string(inputs.cols()));
  }
}

template <typename T>
std::vector<T> Lift(std::span<const double> xs) {
  return std::vector<T>(xs.begin(), xs.end());
}

}  // namespace

namespace internal {

template <typename T>
void LossGradient(std::span<const T> pred, std::size_t n, std::size_t o,
                  const Labels& labels, LossKind kind, double scale,
                  std::vector<T>& dout, std::vector<T>* losses) {
  dout.assign(n * o, T(0.0));
  if (losses) losses->assign(n, T(0.0));
  const auto* ids = std::get_if<std::vector<int>>(&labels);
  const Tensor* targets = ids ? nullptr : &std::get<Tensor>(labels);
  for (std::size_t i = 0; i < n; ++i) {
    const T* p = pred.data() + i * o;
    T* g = dout.data() + i * o;
    if (kind == LossKind::kMse) {
      T loss(0.0);
      for (std::size_t k = 0; k < o; ++k) {
        const double y = ids ? ((*ids)[i] == static_cast<int>(k) ? 1.0 : 0.0)
                             : targets->at(i, k);
        const T r = p[k] - T(y);
        loss += r * r;
        g[k] = r * T(2.0 * scale / static_cast<double>(o));
      }
      if (losses) (*losses)[i] = loss * T(1.0 / static_cast<double>(o));
      continue;
    }
    double max_logit = Primal(p[0]);
    for (std::size_t k = 1; k < o; ++k) {
      max_logit = std::max(max_logit, Primal(p[k]));
    }
    T denom(0.0);
    for (std::size_t k = 0; k < o; ++k) {
      g[k] = Exp(p[k] - T(max_logit));
      denom += g[k];
    }
    const std::size_t y = static_cast<std::size_t>((*ids)[i]);
    for (std::size_t k = 0; k < o; ++k) {
      g[k] = g[k] / denom;
      if (k == y) g[k] -= T(1.0);
      g[k] = g[k] * T(scale);
    }
    if (losses) (*losses)[i] = Log(denom) - (p[y] - T(max_logit));
  }
}

template void LossGradient<double>(std::span<const double>, std::size_t,
                                   std::size_t, const Labels&, LossKind,
                                   double, std::vector<double>&,
                                   std::vector<double>*);
template void LossGradient<Dual>(std::span<const Dual>, std::size_t,
                                 std::size_t, const Labels&, LossKind, double,
                                 std::vector<Dual>&, std::vector<Dual>*);

}  // namespace internal

Network::Network(const NetworkSpec& spec) {
  if (spec.layers.empty()) throw DimensionError("network has no layers");
  if (spec.input_dim <= 0) throw DimensionError("input_dim must be positive");
  NetworkBuilder builder(spec.input_dim);
  int prev = 0;
  for (std::size_t l = 0; l < spec.layers.size(); ++l) {
    const LayerSpec& layer = spec.layers[l];
    if (layer.width <= 0) {
      throw DimensionError("layer " + std::to_string(l) +
                           " has non-positive width");
    }
    const int node = builder.AddNode(layer.width);
    builder.AddDense(prev, node, layer.activation, layer.bias);
    prev = node;
  }
  if (!spec.layers.back().bias) {
    throw DimensionError("last layer must be dense with bias");
  }
  if (spec.layers.back().width != spec.output_dim) {
    throw DimensionError("last layer width " +
                         std::to_string(spec.layers.back().width) +
                         " does not match output_dim " +
                         std::to_string(spec.output_dim));
  }
  *this = std::move(builder).Build();
}

std::size_t Network::forward_macs() const {
  std::size_t macs = 0;
  for (const Connection& c : connections_) {
    if (c.dense) {
      macs += static_cast<std::size_t>(c.in_width) * c.out_width;
    }
  }
  return macs;
}

NetworkBuilder::NetworkBuilder(int input_dim) {
  if (input_dim <= 0) throw DimensionError("input_dim must be positive");
  net_.widths_.push_back(input_dim);
  sealed_.push_back(false);
}

int NetworkBuilder::AddNode(int width) {
  if (width <= 0) throw DimensionError("node width must be positive");
  net_.widths_.push_back(width);
  sealed_.push_back(false);
  return static_cast<int>(net_.widths_.size()) - 1;
}

void NetworkBuilder::CheckEdge(int src, int dst) const {
  const int nodes = static_cast<int>(net_.widths_.size());
  if (src < 0 || dst <= src || dst >= nodes) {
    throw DimensionError("edge " + std::to_string(src) + "->" +
                         std::to_string(dst) + " is not a forward edge");
  }
  if (sealed_[dst]) {
    throw DimensionError("node " + std::to_string(dst) +
                         " already feeds another edge");
  }
}

void NetworkBuilder::AddSkip(int src, int dst) {
  CheckEdge(src, dst);
  if (net_.widths_[src] != net_.widths_[dst]) {
    throw DimensionError("skip edge between nodes of different widths");
  }
  sealed_[src] = true;
  Connection c;
  c.src = src;
  c.dst = dst;
  c.in_width = c.out_width = net_.widths_[src];
  net_.connections_.push_back(c);
}

void NetworkBuilder::AddDense(int src, int dst, Activation activation,
                              bool bias) {
  CheckEdge(src, dst);
  sealed_[src] = true;
  Connection c;
  c.src = src;
  c.dst = dst;
  c.dense = true;
  c.activation = activation;
  c.in_width = net_.widths_[src];
  c.out_width = net_.widths_[dst];
  c.weight_offset = net_.num_params_;
  net_.num_params_ += static_cast<std::size_t>(c.in_width) * c.out_width;
  if (bias) {
    c.bias_offset = static_cast<std::ptrdiff_t>(net_.num_params_);
    net_.num_params_ += c.out_width;
  }
  net_.connections_.push_back(c);
}

Network NetworkBuilder::Build() && {
  const int out = static_cast<int>(net_.widths_.size()) - 1;
  const bool has_biased_head = std::any_of(
      net_.connections_.begin(), net_.connections_.end(),
      [&](const Connection& c) {
        return c.dst == out && c.dense && c.bias_offset >= 0;
      });
  if (out == 0 || !has_biased_head) {
    throw DimensionError("output node must be fed by a dense layer with bias");
  }
  return std::move(net_);
}

ParamVector InitParams(const Network& net, std::uint64_t seed) {
  Rng rng(seed);
  ParamVector theta;
  theta.values.assign(net.num_params(), 0.0);
  for (const Connection& c : net.connections()) {
    if (!c.dense) continue;
    const double bound = 1.0 / std::sqrt(static_cast<double>(c.in_width));
    const std::size_t nw = static_cast<std::size_t>(c.in_width) * c.out_width;
    for (std::size_t k = 0; k < nw; ++k) {
      theta[c.weight_offset + k] = Uniform(rng, -bound, bound);
    }
    if (c.bias_offset >= 0) {
      for (int u = 0; u < c.out_width; ++u) {
        theta[c.bias_offset + u] = Uniform(rng, -bound, bound);
      }
    }
  }
  return theta;
}

ForwardTape RunForward(const Network& net, const ParamVector& theta,
                       const Tensor& inputs) {
  CheckInputs(net, theta, inputs);
  auto tape = internal::ForwardPass<double>(net, theta.values, inputs.data(),
                                            inputs.rows());
  ForwardTape out;
  out.batch = tape.batch;
  out.nodes = std::move(tape.nodes);
  out.edge_outputs = std::move(tape.edges);
  return out;
}

Tensor Forward(const Network& net, const ParamVector& theta,
               const Tensor& inputs) {
  ForwardTape tape = RunForward(net, theta, inputs);
  return Tensor({tape.batch, static_cast<std::size_t>(net.output_dim())},
                std::move(tape.nodes.back()));
}

Tensor Forward(const Network& net, const ParamVector& theta,
               const Batch& batch) {
  return Forward(net, theta, batch.inputs);
}

void RunBackward(const Network& net, const ParamVector& theta,
                 const ForwardTape& tape, std::span<const double> output_grad,
                 GradientSink& sink) {
  if (output_grad.size() != tape.batch * net.output_dim()) {
    throw DimensionError("output gradient does not match [n, o]");
  }
  internal::Tape<double> t;
  t.batch = tape.batch;
  // The kernel only reads the tape; copying keeps ForwardTape a plain value.
  t.nodes = tape.nodes;
  t.edges = tape.edge_outputs;
  const auto& conns = net.connections();
  internal::BackwardPass<double>(
      net, theta.values, t,
      std::vector<double>(output_grad.begin(), output_grad.end()),
      [&](std::size_t ci, const double* g, const double* delta,
          const double* in) {
        sink.OnDense(conns[ci], t.batch, t.edges[ci].data(), g, delta, in);
      });
}

std::vector<double> BackpropParams(const Network& net, const ParamVector& theta,
                                   const ForwardTape& tape,
                                   std::span<const double> output_grad) {
  if (output_grad.size() != tape.batch * net.output_dim()) {
    throw DimensionError("output gradient does not match [n, o]");
  }
  internal::Tape<double> t;
  t.batch = tape.batch;
  t.nodes = tape.nodes;
  t.edges = tape.edge_outputs;
  std::vector<double> grad(net.num_params(), 0.0);
  internal::BackwardPass<double>(
      net, theta.values, t,
      std::vector<double>(output_grad.begin(), output_grad.end()),
      internal::SumSink<double>{&net, t.batch, &grad});
  return grad;
}

std::vector<double> PerSampleLosses(const Tensor& predictions,
                                    const Labels& labels, LossKind kind) {
  const std::size_t n = predictions.rows();
  const std::size_t o = predictions.cols();
  CheckLabels(labels, n, o, kind);
  std::vector<double> dout;
  std::vector<double> losses;
  internal::LossGradient<double>(predictions.data(), n, o, labels, kind, 1.0,
                                 dout, &losses);
  return losses;
}

std::vector<double> LossOutputGradients(const Tensor& predictions,
                                        const Labels& labels, LossKind kind) {
  const std::size_t n = predictions.rows();
  const std::size_t o = predictions.cols();
  CheckLabels(labels, n, o, kind);
  std::vector<double> dout;
  internal::LossGradient<double>(predictions.data(), n, o, labels, kind, 1.0,
                                 dout, nullptr);
  return dout;
}

GradMatrix PerSampleGradients(const Network& net, const ParamVector& theta,
                              const Batch& batch, LossKind kind) {
  CheckInputs(net, theta, batch.inputs);
  const std::size_t n = batch.size();
  const std::size_t o = net.output_dim();
  CheckLabels(batch.labels, n, o, kind);
  auto tape = internal::ForwardPass<double>(net, theta.values,
                                            batch.inputs.data(), n);
  std::vector<double> dout;
  internal::LossGradient<double>(tape.nodes.back(), n, o, batch.labels, kind,
                                 1.0, dout, nullptr);
  GradMatrix grads(n, net.num_params());
  const auto& conns = net.connections();
  internal::BackwardPass<double>(
      net, theta.values, tape, std::move(dout),
      [&](std::size_t ci, const double*, const double* delta,
          const double* in) {
        const Connection& c = conns[ci];
        const std::size_t iw = c.in_width;
        const std::size_t ow = c.out_width;
        for (std::size_t i = 0; i < n; ++i) {
          std::span<double> row = grads.row(i);
          const double* di = delta + i * ow;
          const double* xi = in + i * iw;
          double* gw = row.data() + c.weight_offset;
          for (std::size_t u = 0; u < ow; ++u) {
            for (std::size_t v = 0; v < iw; ++v) gw[u * iw + v] = di[u] * xi[v];
          }
          if (c.bias_offset >= 0) {
            std::copy(di, di + ow, row.data() + c.bias_offset);
          }
        }
      });
  return grads;
}

LossAndGradient MeanLossGradient(const Network& net, const ParamVector& theta,
                                 const Batch& batch, LossKind kind) {
  CheckInputs(net, theta, batch.inputs);
  const std::size_t n = batch.size();
  const std::size_t o = net.output_dim();
  CheckLabels(batch.labels, n, o, kind);
  auto tape = internal::ForwardPass<double>(net, theta.values,
                                            batch.inputs.data(), n);
  std::vector<double> dout;
  std::vector<double> losses;
  internal::LossGradient<double>(tape.nodes.back(), n, o, batch.labels, kind,
                                 1.0 / static_cast<double>(n), dout, &losses);
  LossAndGradient result;
  result.gradient.assign(net.num_params(), 0.0);
  for (double l : losses) result.loss += l;
  result.loss /= static_cast<double>(n);
  internal::BackwardPass<double>(
      net, theta.values, tape, std::move(dout),
      internal::SumSink<double>{&net, n, &result.gradient});
  return result;
}

double MeanLoss(const Network& net, const ParamVector& theta,
                const Batch& batch, LossKind kind) {
  const std::vector<double> losses =
      PerSampleLosses(Forward(net, theta, batch.inputs), batch.labels, kind);
  double total = 0.0;
  for (double l : losses) total += l;
  return total / static_cast<double>(losses.size());
}

std::vector<double> HessianVectorProduct(const Network& net,
                                         const ParamVector& theta,
                                         const Batch& batch, LossKind kind,
                                         std::span<const double> v) {
  CheckInputs(net, theta, batch.inputs);
  if (v.size() != theta.size()) {
    throw DimensionError("direction length does not match parameter count");
  }
  const std::size_t n = batch.size();
  const std::size_t o = net.output_dim();
  CheckLabels(batch.labels, n, o, kind);
  std::vector<Dual> th(theta.size());
  for (std::size_t k = 0; k < th.size(); ++k) th[k] = Dual(theta[k], v[k]);
  const std::vector<Dual> x = Lift<Dual>(batch.inputs.data());
  auto tape = internal::ForwardPass<Dual>(net, th, x, n);
  std::vector<Dual> dout;
  internal::LossGradient<Dual>(tape.nodes.back(), n, o, batch.labels, kind,
                               1.0 / static_cast<double>(n), dout, nullptr);
  std::vector<Dual> grad(theta.size());
  internal::BackwardPass<Dual>(net, th, tape, std::move(dout),
                               internal::SumSink<Dual>{&net, n, &grad});
  std::vector<double> hv(grad.size());
  for (std::size_t k = 0; k < grad.size(); ++k) hv[k] = grad[k].d;
  return hv;
}

std::vector<double> FiniteDiffGradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("eps must be positive");
  std::vector<double> probe(x.begin(), x.end());
  std::vector<double> grad(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    probe[k] = x[k] + eps;
    const double up = loss(probe);
    probe[k] = x[k] - eps;
    const double down = loss(probe);
    probe[k] = x[k];
    grad[k] = (up - down) / (2.0 * eps);
  }
  return grad;
}

std::vector<double> FiniteDiffGradient(const Network& net,
                                       const ParamVector& theta,
                                       const Batch& sample, LossKind kind,
                                       double eps) {
  return FiniteDiffGradient(
      [&](std::span<const double> x) {
        ParamVector p{std::vector<double>(x.begin(), x.end())};
        return MeanLoss(net, p, sample, kind);
      },
      theta.values, eps);
}

}  // namespace gsnas
