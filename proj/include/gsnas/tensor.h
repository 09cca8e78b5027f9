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

#ifndef GSNAS_TENSOR_H_
#define GSNAS_TENSOR_H_

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace gsnas {

// Shape or arity mismatch between a network and the data handed to it.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A NaN or infinity where a finite value is required.
class NonFiniteError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Dense row-major tensor of doubles. Entries are checked to be finite on
// construction.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor Zeros(std::vector<std::size_t> shape);
  static Tensor Matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> data) {
    return Tensor({rows, cols}, std::move(data));
  }

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }
  // Extent of the leading axis; 0 for an empty tensor.
  std::size_t rows() const { return shape_.empty() ? 0 : shape_[0]; }
  // Product of all trailing extents.
  std::size_t cols() const;

  std::span<const double> data() const { return data_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols(), cols());
  }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

// Flattened network parameters.
struct ParamVector {
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  double& operator[](std::size_t k) { return values[k]; }
  double operator[](std::size_t k) const { return values[k]; }
  friend bool operator==(const ParamVector&, const ParamVector&) = default;
};

// One row per sample: the gradient of that sample's loss w.r.t. every
// parameter.
class GradMatrix {
 public:
  GradMatrix() = default;
  GradMatrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  GradMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t i, std::size_t k) { return data_[i * cols_ + k]; }
  double at(std::size_t i, std::size_t k) const { return data_[i * cols_ + k]; }
  std::span<double> row(std::size_t i) {
    return std::span<double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data_).subspan(i * cols_, cols_);
  }
  std::span<const double> data() const { return data_; }

  friend bool operator==(const GradMatrix&, const GradMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Class ids for classification, or a [n, o] target tensor for regression.
using Labels = std::variant<std::vector<int>, Tensor>;

struct Batch {
  Tensor inputs;  // [n, d]
  Labels labels;

  std::size_t size() const { return inputs.rows(); }
  // The single-sample batch holding row i.
  Batch Sample(std::size_t i) const;
  // Rows selected by `rows`, in that order.
  Batch Select(std::span<const std::size_t> rows) const;
};

enum class LossKind { kMse, kCrossEntropy };

std::string LossKindName(LossKind kind);
LossKind ParseLossKind(const std::string& name);

}  // namespace gsnas

#endif  // GSNAS_TENSOR_H_
