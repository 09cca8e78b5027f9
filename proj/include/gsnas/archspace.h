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

#ifndef GSNAS_ARCHSPACE_H_
#define GSNAS_ARCHSPACE_H_

#include <array>
#include <cstdint>
#include <string>
#include <utility>

#include "gsnas/network.h"
#include "gsnas/random.h"

namespace gsnas {

// A cell is a 4-node DAG with one operation on each of its 6 forward edges.
inline constexpr int kCellNodes = 4;
inline constexpr int kCellEdges = 6;
inline constexpr int kNumCellOps = 5;
inline constexpr int kSpaceSize = 15625;  // 5^6

// Edge e connects kCellEdgeEnds[e].first -> kCellEdgeEnds[e].second.
inline constexpr std::array<std::pair<int, int>, kCellEdges> kCellEdgeEnds = {
    {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}}};

enum class CellOp : std::uint8_t {
  kZero = 0,
  kSkip = 1,
  kDenseRelu = 2,
  kDenseTanh = 3,
  kDenseIdentity = 4,
};

std::string CellOpName(CellOp op);

class CellArch {
 public:
  CellArch() = default;
  explicit CellArch(std::array<std::uint8_t, kCellEdges> ops);

  CellOp op(int edge) const { return static_cast<CellOp>(ops_[edge]); }
  const std::array<std::uint8_t, kCellEdges>& ops() const { return ops_; }
  // sum_e ops[e] * 5^e
  int id() const;
  std::string ToString() const;  // e.g. "[2,1,0,0,0,0]"

  friend bool operator==(const CellArch&, const CellArch&) = default;

 private:
  std::array<std::uint8_t, kCellEdges> ops_{};
};

// Throws std::out_of_range unless 0 <= id < kSpaceSize.
CellArch DecodeArch(int id);
int EncodeArch(const CellArch& arch);

// Uniform over the whole space.
CellArch RandomArch(Rng& rng);

// Reassigns one uniformly chosen edge to a uniformly chosen different op.
CellArch MutateArch(const CellArch& parent, Rng& rng);

int HammingDistance(const CellArch& a, const CellArch& b);

struct SearchSpaceSpec {
  int cell_width = 16;
  int num_cells = 2;
};

// The network for one architecture: a linear stem from the input to the cell
// width, `num_cells` stacked cells, and a biased linear classifier head.
struct ExecutableArch {
  CellArch arch;
  Network network;
};

ExecutableArch Materialize(const CellArch& arch, const SearchSpaceSpec& space,
                           int input_dim, int num_classes);

}  // namespace gsnas

#endif  // GSNAS_ARCHSPACE_H_
