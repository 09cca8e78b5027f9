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

// Scalar-generic forward/backward kernels shared by the double API and the
// tangent-carrying Hessian-vector product.
#ifndef GSNAS_SRC_GRAPH_KERNELS_H_
#define GSNAS_SRC_GRAPH_KERNELS_H_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "gsnas/network.h"

namespace gsnas::internal {

// Value plus one directional derivative.
struct Dual {
  double v = 0.0;
  double d = 0.0;

  Dual() = default;
  Dual(double value) : v(value) {}  // NOLINT: implicit by intent
  Dual(double value, double tangent) : v(value), d(tangent) {}

  Dual& operator+=(const Dual& o) {
    v += o.v;
    d += o.d;
    return *this;
  }
  Dual& operator-=(const Dual& o) {
    v -= o.v;
    d -= o.d;
    return *this;
  }
  friend Dual operator+(Dual a, const Dual& b) { return a += b; }
  friend Dual operator-(Dual a, const Dual& b) { return a -= b; }
  friend Dual operator-(const Dual& a) { return {-a.v, -a.d}; }
  friend Dual operator*(const Dual& a, const Dual& b) {
    return {a.v * b.v, a.d * b.v + a.v * b.d};
  }
  friend Dual operator/(const Dual& a, const Dual& b) {
    return {a.v / b.v, (a.d * b.v - a.v * b.d) / (b.v * b.v)};
  }
};

inline double Primal(double x) { return x; }
inline double Primal(const Dual& x) { return x.v; }
inline double Tanh(double x) { return std::tanh(x); }
inline Dual Tanh(const Dual& x) {
  const double t = std::tanh(x.v);
  return {t, (1.0 - t * t) * x.d};
}
inline double Exp(double x) { return std::exp(x); }
inline Dual Exp(const Dual& x) {
  const double e = std::exp(x.v);
  return {e, e * x.d};
}
inline double Log(double x) { return std::log(x); }
inline Dual Log(const Dual& x) { return {std::log(x.v), x.d / x.v}; }

template <typename T>
T Activate(Activation a, const T& x) {
  switch (a) {
    case Activation::kRelu:
      return Primal(x) > 0.0 ? x : T(0.0);
    case Activation::kTanh:
      return Tanh(x);
    case Activation::kIdentity:
      break;
  }
  return x;
}

// Derivative of the activation expressed through its output.
template <typename T>
T ActivationSlope(Activation a, const T& y) {
  switch (a) {
    case Activation::kRelu:
      return Primal(y) > 0.0 ? T(1.0) : T(0.0);
    case Activation::kTanh:
      return T(1.0) - y * y;
    case Activation::kIdentity:
      break;
  }
  return T(1.0);
}

template <typename T>
struct Tape {
  std::size_t batch = 0;
  std::vector<std::vector<T>> nodes;
  std::vector<std::vector<T>> edges;
};

template <typename T>
Tape<T> ForwardPass(const Network& net, std::span<const T> theta,
                    std::span<const T> inputs, std::size_t n) {
  Tape<T> tape;
  tape.batch = n;
  const auto& widths = net.node_widths();
  tape.nodes.resize(widths.size());
  tape.nodes[0].assign(inputs.begin(), inputs.end());
  for (std::size_t j = 1; j < widths.size(); ++j) {
    tape.nodes[j].assign(n * widths[j], T(0.0));
  }
  const auto& conns = net.connections();
  tape.edges.resize(conns.size());
  std::vector<T> wt;
  for (std::size_t ci = 0; ci < conns.size(); ++ci) {
    const Connection& c = conns[ci];
    const std::vector<T>& src = tape.nodes[c.src];
    std::vector<T>& dst = tape.nodes[c.dst];
    if (!c.dense) {
      for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += src[k];
      continue;
    }
    const std::size_t iw = c.in_width;
    const std::size_t ow = c.out_width;
    std::vector<T>& out = tape.edges[ci];
    out.resize(n * ow);
    // Transposed copy so the inner loop runs over contiguous outputs.
    wt.resize(iw * ow);
    const T* w = theta.data() + c.weight_offset;
    for (std::size_t u = 0; u < ow; ++u) {
      for (std::size_t v = 0; v < iw; ++v) wt[v * ow + u] = w[u * iw + v];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const T* x = src.data() + i * iw;
      T* y = out.data() + i * ow;
      for (std::size_t u = 0; u < ow; ++u) {
        y[u] = c.bias_offset >= 0 ? theta[c.bias_offset + u] : T(0.0);
      }
      for (std::size_t v = 0; v < iw; ++v) {
        const T xv = x[v];
        const T* wv = wt.data() + v * ow;
        for (std::size_t u = 0; u < ow; ++u) y[u] += xv * wv[u];
      }
      T* z = dst.data() + i * ow;
      for (std::size_t u = 0; u < ow; ++u) {
        y[u] = Activate(c.activation, y[u]);
        z[u] += y[u];
      }
    }
  }
  return tape;
}

// Calls sink(connection_index, output_grad, delta, input) for each dense
// connection in reverse order.
template <typename T, typename Sink>
void BackwardPass(const Network& net, std::span<const T> theta,
                  const Tape<T>& tape, std::vector<T> output_grad,
                  Sink&& sink) {
  const auto& widths = net.node_widths();
  const std::size_t n = tape.batch;
  std::vector<std::vector<T>> grads(widths.size());
  grads.back() = std::move(output_grad);
  auto grad_of = [&](int node) -> std::vector<T>& {
    if (grads[node].empty()) grads[node].assign(n * widths[node], T(0.0));
    return grads[node];
  };
  const auto& conns = net.connections();
  std::vector<T> delta;
  for (std::size_t ci = conns.size(); ci-- > 0;) {
    const Connection& c = conns[ci];
    const std::vector<T>& g = grad_of(c.dst);
    if (!c.dense) {
      if (c.src != 0) {
        std::vector<T>& gs = grad_of(c.src);
        for (std::size_t k = 0; k < gs.size(); ++k) gs[k] += g[k];
      }
      continue;
    }
    const std::size_t iw = c.in_width;
    const std::size_t ow = c.out_width;
    const std::vector<T>& out = tape.edges[ci];
    delta.resize(n * ow);
    for (std::size_t k = 0; k < n * ow; ++k) {
      delta[k] = g[k] * ActivationSlope(c.activation, out[k]);
    }
    const std::vector<T>& in = tape.nodes[c.src];
    sink(ci, g.data(), delta.data(), in.data());
    if (c.src == 0) continue;
    std::vector<T>& gs = grad_of(c.src);
    const T* w = theta.data() + c.weight_offset;
    for (std::size_t i = 0; i < n; ++i) {
      T* gi = gs.data() + i * iw;
      const T* di = delta.data() + i * ow;
      for (std::size_t u = 0; u < ow; ++u) {
        const T du = di[u];
        const T* wu = w + u * iw;
        for (std::size_t v = 0; v < iw; ++v) gi[v] += du * wu[v];
      }
    }
  }
}

// Accumulates scale * sum over the batch of parameter gradients into `grad`.
template <typename T>
struct SumSink {
  const Network* net;
  std::size_t n;
  std::vector<T>* grad;

  void operator()(std::size_t ci, const T*, const T* delta, const T* in) {
    const Connection& c = net->connections()[ci];
    const std::size_t iw = c.in_width;
    const std::size_t ow = c.out_width;
    T* gw = grad->data() + c.weight_offset;
    for (std::size_t i = 0; i < n; ++i) {
      const T* di = delta + i * ow;
      const T* xi = in + i * iw;
      for (std::size_t u = 0; u < ow; ++u) {
        const T du = di[u];
        T* gwu = gw + u * iw;
        for (std::size_t v = 0; v < iw; ++v) gwu[v] += du * xi[v];
      }
    }
    if (c.bias_offset >= 0) {
      T* gb = grad->data() + c.bias_offset;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t u = 0; u < ow; ++u) gb[u] += delta[i * ow + u];
      }
    }
  }
};

// Loss gradient w.r.t. predictions, scaled by `scale`. Optionally also stores
// each sample's loss.
template <typename T>
void LossGradient(std::span<const T> pred, std::size_t n, std::size_t o,
                  const Labels& labels, LossKind kind, double scale,
                  std::vector<T>& dout, std::vector<T>* losses);

}  // namespace gsnas::internal

#endif  // GSNAS_SRC_GRAPH_KERNELS_H_
