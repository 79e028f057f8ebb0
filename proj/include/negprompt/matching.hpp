// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <utility>
#include <vector>

#include "negprompt/losses.hpp"
#include "negprompt/numcore/tensor.hpp"

namespace negprompt {

/// Rows are predictions, columns ground-truth instances.
struct CostMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> entries;

  CostMatrix() = default;
  CostMatrix(std::size_t r, std::size_t c, std::vector<double> e);
  static CostMatrix from_rows(const std::vector<std::vector<double>>& rows);

  double operator()(std::size_t r, std::size_t c) const { return entries[r * cols + c]; }
  double& operator()(std::size_t r, std::size_t c) { return entries[r * cols + c]; }
};

struct MatchWeights {
  double cls = 2.0;
  double l1 = 5.0;
  double giou = 2.0;
};

struct GroundTruth {
  /// Column index into the probability matrix.
  std::size_t category = 0;
  /// Normalised (cx, cy, w, h).
  Box4 box{};
};

struct Assignment {
  /// (row, col) pairs sorted by row.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total_cost = 0.0;
};

/// entry(q, g) = cls·(-prob[q, cat(g)]) + l1·L1(box_q, box_g) + giou·(1 - GIoU).
/// Throws CategoryError when a ground-truth category has no probability column.
CostMatrix build_cost_matrix(const Tensor& probs, const Tensor& pred_boxes,
                             const std::vector<GroundTruth>& gt, const MatchWeights& w);

/// Minimum-cost assignment covering every column when rows >= cols (every row
/// when rows < cols). Kuhn–Munkres with potentials, O(n²m). Total cost sums
/// the chosen entries in column order.
Assignment hungarian(const CostMatrix& cost);

/// Exhaustive minimum over injections of columns into rows. Test oracle only;
/// throws CountError above 8 columns.
Assignment brute_force_assign(const CostMatrix& cost);

}  // namespace negprompt
