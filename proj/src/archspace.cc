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

#include "gsnas/archspace.h"

#include <stdexcept>

namespace gsnas {

std::string CellOpName(CellOp op) {
  switch (op) {
    case CellOp::kZero:
      return "zero";
    case CellOp::kSkip:
      return "skip_connect";
    case CellOp::kDenseRelu:
      return "dense_relu";
    case CellOp::kDenseTanh:
      return "dense_tanh";
    case CellOp::kDenseIdentity:
      return "dense_identity";
  }
  return "unknown";
}

CellArch::CellArch(std::array<std::uint8_t, kCellEdges> ops) : ops_(ops) {
  for (std::uint8_t op : ops_) {
    if (op >= kNumCellOps) throw std::out_of_range("cell op id out of range");
  }
}

int CellArch::id() const {
  int id = 0;
  for (int e = kCellEdges - 1; e >= 0; --e) id = id * kNumCellOps + ops_[e];
  return id;
}

std::string CellArch::ToString() const {
  std::string s = "[";
  for (int e = 0; e < kCellEdges; ++e) {
    if (e) s += ',';
    s += std::to_string(ops_[e]);
  }
  return s + "]";
}

CellArch DecodeArch(int id) {
  if (id < 0 || id >= kSpaceSize) {
    throw std::out_of_range("arch id " + std::to_string(id) +
                            " outside [0, " + std::to_string(kSpaceSize) + ")");
  }
  std::array<std::uint8_t, kCellEdges> ops{};
  for (int e = 0; e < kCellEdges; ++e) {
    ops[e] = static_cast<std::uint8_t>(id % kNumCellOps);
    id /= kNumCellOps;
  }
  return CellArch(ops);
}

int EncodeArch(const CellArch& arch) { return arch.id(); }

CellArch RandomArch(Rng& rng) {
  return DecodeArch(static_cast<int>(UniformIndex(rng, kSpaceSize)));
}

CellArch MutateArch(const CellArch& parent, Rng& rng) {
  auto ops = parent.ops();
  const auto edge = UniformIndex(rng, kCellEdges);
  const auto shift = 1 + UniformIndex(rng, kNumCellOps - 1);
  ops[edge] = static_cast<std::uint8_t>((ops[edge] + shift) % kNumCellOps);
  return CellArch(ops);
}

int HammingDistance(const CellArch& a, const CellArch& b) {
  int d = 0;
  for (int e = 0; e < kCellEdges; ++e) d += a.ops()[e] != b.ops()[e];
  return d;
}

ExecutableArch Materialize(const CellArch& arch, const SearchSpaceSpec& space,
                           int input_dim, int num_classes) {
  if (space.cell_width < 1 || space.num_cells < 1) {
    throw std::invalid_argument("cell width and cell count must be >= 1");
  }
  NetworkBuilder b(input_dim);
  const int w = space.cell_width;
  int cell_input = b.AddNode(w);
  b.AddDense(0, cell_input, Activation::kIdentity);
  for (int cell = 0; cell < space.num_cells; ++cell) {
    std::array<int, kCellNodes> node{};
    node[0] = cell_input;
    for (int j = 1; j < kCellNodes; ++j) node[j] = b.AddNode(w);
    for (int e = 0; e < kCellEdges; ++e) {
      const int src = node[kCellEdgeEnds[e].first];
      const int dst = node[kCellEdgeEnds[e].second];
      switch (arch.op(e)) {
        case CellOp::kZero:
          break;
        case CellOp::kSkip:
          b.AddSkip(src, dst);
          break;
        case CellOp::kDenseRelu:
          b.AddDense(src, dst, Activation::kRelu);
          break;
        case CellOp::kDenseTanh:
          b.AddDense(src, dst, Activation::kTanh);
          break;
        case CellOp::kDenseIdentity:
          b.AddDense(src, dst, Activation::kIdentity);
          break;
      }
    }
    cell_input = node[kCellNodes - 1];
  }
  const int head = b.AddNode(num_classes);
  b.AddDense(cell_input, head, Activation::kIdentity);
  return ExecutableArch{arch, std::move(b).Build()};
}

}  // namespace gsnas
