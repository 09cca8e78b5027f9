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

// Reference implementations used only by tests. Each is written
// independently of the library code it checks: plain loops, no shared
// helpers.

#ifndef GSNAS_TESTS_ORACLES_H_
#define GSNAS_TESTS_ORACLES_H_

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace gsnas::oracle {

// Tau-b by visiting every pair.
inline double KendallTauB(std::span<const double> x,
                          std::span<const double> y) {
  long long concordant = 0, discordant = 0, tie_x = 0, tie_y = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t j = i + 1; j < x.size(); ++j) {
      const double dx = x[i] - x[j];
      const double dy = y[i] - y[j];
      if (dx == 0 && dy == 0) {
        ++tie_x;
        ++tie_y;
      } else if (dx == 0) {
        ++tie_x;
      } else if (dy == 0) {
        ++tie_y;
      } else if ((dx > 0) == (dy > 0)) {
        ++concordant;
      } else {
        ++discordant;
      }
    }
  }
  const double n0 = x.size() * (x.size() - 1) / 2.0;
  return (concordant - discordant) /
         std::sqrt((n0 - tie_x) * (n0 - tie_y));
}

// 1 - 6 sum d^2 / (n (n^2 - 1)); valid only without ties.
inline double SpearmanNoTies(std::span<const double> x,
                             std::span<const double> y) {
  const std::size_t n = x.size();
  double d2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    int rx = 1, ry = 1;
    for (std::size_t j = 0; j < n; ++j) {
      rx += x[j] < x[i];
      ry += y[j] < y[i];
    }
    d2 += static_cast<double>(rx - ry) * (rx - ry);
  }
  return 1.0 - 6.0 * d2 / (n * (static_cast<double>(n) * n - 1.0));
}

// sum_k |(#positive in column k) - (#negative in column k)|, with the sign
// taken directly from the raw values.
inline double SignCountScore(const std::vector<std::vector<double>>& g) {
  double total = 0.0;
  for (std::size_t k = 0; k < g.front().size(); ++k) {
    int pos = 0, neg = 0;
    for (const auto& row : g) {
      if (row[k] > 0) ++pos;
      if (row[k] < 0) ++neg;
    }
    total += std::abs(pos - neg);
  }
  return total;
}

// A chain of dense layers: W is [out, in] row-major, then the bias, per
// layer, in order. act: 0 relu, 1 tanh, 2 identity.
struct Mlp {
  int input_dim;
  std::vector<int> widths;
  std::vector<int> acts;
  std::vector<bool> bias;
};

inline std::vector<double> MlpForward(const Mlp& mlp,
                                      const std::vector<double>& theta,
                                      const std::vector<double>& x) {
  std::vector<double> h = x;
  std::size_t offset = 0;
  int in = mlp.input_dim;
  for (std::size_t l = 0; l < mlp.widths.size(); ++l) {
    const int out = mlp.widths[l];
    std::vector<double> z(out, 0.0);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) z[r] += theta[offset + r * in + c] * h[c];
    }
    offset += static_cast<std::size_t>(out) * in;
    if (mlp.bias[l]) {
      for (int r = 0; r < out; ++r) z[r] += theta[offset + r];
      offset += out;
    }
    for (double& v : z) {
      if (mlp.acts[l] == 0) v = v > 0 ? v : 0.0;
      if (mlp.acts[l] == 1) v = std::tanh(v);
    }
    h = std::move(z);
    in = out;
  }
  return h;
}

inline double CentralDifference(const std::function<double(
                                    const std::vector<double>&)>& f,
                                std::vector<double> x, std::size_t k,
                                double eps) {
  const double saved = x[k];
  x[k] = saved + eps;
  const double up = f(x);
  x[k] = saved - eps;
  const double down = f(x);
  return (up - down) / (2 * eps);
}

// Least squares solution of min |X w - y|^2 via the normal equations.
inline std::vector<double> LeastSquares(const std::vector<std::vector<double>>& x,
                                        const std::vector<double>& y) {
  const int n = static_cast<int>(x.size());
  const int p = static_cast<int>(x.front().size());
  Eigen::MatrixXd a(n, p);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) a(i, j) = x[i][j];
    b(i) = y[i];
  }
  const Eigen::VectorXd w = (a.transpose() * a).ldlt().solve(a.transpose() * b);
  return {w.data(), w.data() + p};
}

}  // namespace gsnas::oracle

#endif  // GSNAS_TESTS_ORACLES_H_
