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

#ifndef GSNAS_NETWORK_H_
#define GSNAS_NETWORK_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gsnas/tensor.h"

namespace gsnas {

enum class Activation { kRelu, kTanh, kIdentity };

// One dense layer of a plain multilayer network.
struct LayerSpec {
  int width = 1;
  Activation activation = Activation::kIdentity;
  bool bias = true;
};

// A chain of dense layers mapping R^input_dim to R^output_dim. The last layer
// must carry a bias and have width output_dim.
struct NetworkSpec {
  int input_dim = 1;
  int output_dim = 1;
  std::vector<LayerSpec> layers;
};

// A directed edge of the computation graph. Skip edges copy the source node;
// dense edges apply act(W x + b). A node's value is the sum of its incoming
// edges (zeros if it has none).
struct Connection {
  int src = 0;
  int dst = 0;
  bool dense = false;
  Activation activation = Activation::kIdentity;
  std::size_t weight_offset = 0;  // W is [out_width, in_width], row-major
  std::ptrdiff_t bias_offset = -1;
  int in_width = 0;
  int out_width = 0;
};

// Immutable DAG of summing nodes. Node 0 is the input, the last node is the
// output. Parameters are laid out in connection order (weights, then bias),
// so the layout depends only on how the graph was built.
class Network {
 public:
  explicit Network(const NetworkSpec& spec);

  int input_dim() const { return widths_.front(); }
  int output_dim() const { return widths_.back(); }
  int num_nodes() const { return static_cast<int>(widths_.size()); }
  int output_node() const { return num_nodes() - 1; }
  std::size_t num_params() const { return num_params_; }
  const std::vector<int>& node_widths() const { return widths_; }
  const std::vector<Connection>& connections() const { return connections_; }

  // Multiply-accumulates of one single-sample forward pass.
  std::size_t forward_macs() const;

 private:
  friend class NetworkBuilder;
  Network() = default;

  std::vector<int> widths_;
  std::vector<Connection> connections_;
  std::size_t num_params_ = 0;
};

// Incremental construction of a Network. A node may receive connections only
// until it is first used as a source; this keeps connection order a valid
// evaluation order.
class NetworkBuilder {
 public:
  explicit NetworkBuilder(int input_dim);

  int AddNode(int width);
  void AddSkip(int src, int dst);
  void AddDense(int src, int dst, Activation activation, bool bias = true);

  // Throws DimensionError unless the last node is fed by a dense connection
  // with bias.
  Network Build() &&;

 private:
  void CheckEdge(int src, int dst) const;

  Network net_;
  std::vector<bool> sealed_;
};

// Values kept from a forward pass for the backward pass.
struct ForwardTape {
  std::size_t batch = 0;
  std::vector<std::vector<double>> nodes;         // [batch, width] per node
  std::vector<std::vector<double>> edge_outputs;  // per connection; dense only

  std::span<const double> output() const { return nodes.back(); }
};

// Receives, for every dense connection during a backward pass, its
// post-activation output, the gradient w.r.t. that output, the gradient
// w.r.t. the pre-activation (`delta`) and the connection input. All arrays are
// [batch, width] row-major.
class GradientSink {
 public:
  virtual ~GradientSink() = default;
  virtual void OnDense(const Connection& c, std::size_t batch,
                       const double* output, const double* output_grad,
                       const double* delta, const double* input) = 0;
};

// Uniform fan-in initialization: every weight and bias of a dense connection
// is drawn from U[-1/sqrt(fan_in), 1/sqrt(fan_in)).
ParamVector InitParams(const Network& net, std::uint64_t seed);

ForwardTape RunForward(const Network& net, const ParamVector& theta,
                       const Tensor& inputs);
Tensor Forward(const Network& net, const ParamVector& theta,
               const Tensor& inputs);
Tensor Forward(const Network& net, const ParamVector& theta,
               const Batch& batch);

// Backpropagates `output_grad` ([batch, output_dim]) through the tape.
void RunBackward(const Network& net, const ParamVector& theta,
                 const ForwardTape& tape, std::span<const double> output_grad,
                 GradientSink& sink);

// Parameter gradient of sum_i <output_grad_i, f(x_i)> for a recorded tape.
std::vector<double> BackpropParams(const Network& net, const ParamVector& theta,
                                   const ForwardTape& tape,
                                   std::span<const double> output_grad);

// mse: ||y_hat - y||^2 / o. cross_entropy: -log softmax(y_hat)[y].
// Integer labels are one-hot encoded for mse.
std::vector<double> PerSampleLosses(const Tensor& predictions,
                                    const Labels& labels, LossKind kind);

// Gradient of each sample's loss w.r.t. the output, [n, o].
std::vector<double> LossOutputGradients(const Tensor& predictions,
                                        const Labels& labels, LossKind kind);

GradMatrix PerSampleGradients(const Network& net, const ParamVector& theta,
                              const Batch& batch, LossKind kind);

struct LossAndGradient {
  double loss = 0.0;  // mean over the batch
  std::vector<double> gradient;
};

// Loss and gradient of the batch-mean loss.
LossAndGradient MeanLossGradient(const Network& net, const ParamVector& theta,
                                 const Batch& batch, LossKind kind);

double MeanLoss(const Network& net, const ParamVector& theta,
                const Batch& batch, LossKind kind);

// H v for the Hessian H of the batch-mean loss, computed exactly by pushing a
// tangent through the forward and backward passes.
std::vector<double> HessianVectorProduct(const Network& net,
                                         const ParamVector& theta,
                                         const Batch& batch, LossKind kind,
                                         std::span<const double> v);

// Central differences of `loss` around `x`, one coordinate at a time.
std::vector<double> FiniteDiffGradient(
    const std::function<double(std::span<const double>)>& loss,
    std::span<const double> x, double eps);

// Central differences of the (mean) loss of `sample` w.r.t. the parameters.
std::vector<double> FiniteDiffGradient(const Network& net,
                                       const ParamVector& theta,
                                       const Batch& sample, LossKind kind,
                                       double eps);

}  // namespace gsnas

#endif  // GSNAS_NETWORK_H_
