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

#include "gsnas/tensor.h"

#include <cmath>
#include <functional>
#include <numeric>

namespace gsnas {
namespace {

void CheckFinite(std::span<const double> values, const char* what) {
  for (double v : values) {
    if (!std::isfinite(v)) {
      throw NonFiniteError(std::string(what) + " contains a non-finite entry");
    }
  }
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  std::size_t expected = 1;
  for (std::size_t extent : shape_) {
    if (extent == 0) throw DimensionError("tensor extents must be positive");
    expected *= extent;
  }
  if (shape_.empty()) expected = 0;
  if (expected != data_.size()) {
    throw DimensionError("tensor shape holds " + std::to_string(expected) +
                         " entries but data has " +
                         std::to_string(data_.size()));
  }
  CheckFinite(data_, "tensor");
}

Tensor Tensor::Zeros(std::vector<std::size_t> shape) {
  std::size_t n = std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                                  std::multiplies<>());
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return shape_.empty() ? 0 : 1;
  return std::accumulate(shape_.begin() + 1, shape_.end(), std::size_t{1},
                         std::multiplies<>());
}

GradMatrix::GradMatrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw DimensionError("gradient matrix data does not match its dims");
  }
  CheckFinite(data_, "gradient matrix");
}

Batch Batch::Sample(std::size_t i) const {
  const std::size_t row = i;
  return Select(std::span<const std::size_t>(&row, 1));
}

Batch Batch::Select(std::span<const std::size_t> rows) const {
  const std::size_t d = inputs.cols();
  std::vector<double> x;
  x.reserve(rows.size() * d);
  for (std::size_t r : rows) {
    auto src = inputs.row(r);
    x.insert(x.end(), src.begin(), src.end());
  }
  Batch out;
  out.inputs = Tensor({rows.size(), d}, std::move(x));
  if (const auto* ids = std::get_if<std::vector<int>>(&labels)) {
    std::vector<int> picked;
    picked.reserve(rows.size());
    for (std::size_t r : rows) picked.push_back((*ids)[r]);
    out.labels = std::move(picked);
  } else {
    const Tensor& y = std::get<Tensor>(labels);
    std::vector<double> picked;
    for (std::size_t r : rows) {
      auto src = y.row(r);
      picked.insert(picked.end(), src.begin(), src.end());
    }
    out.labels = Tensor({rows.size(), y.cols()}, std::move(picked));
  }
  return out;
}

std::string LossKindName(LossKind kind) {
  return kind == LossKind::kMse ? "mse" : "cross_entropy";
}

LossKind ParseLossKind(const std::string& name) {
  if (name == "mse") return LossKind::kMse;
  if (name == "cross_entropy") return LossKind::kCrossEntropy;
  throw std::invalid_argument("unknown loss kind '" + name + "'");
}

}  // namespace gsnas
