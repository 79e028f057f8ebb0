// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/matching.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "negprompt/errors.hpp"

namespace negprompt {

CostMatrix::CostMatrix(std::size_t r, std::size_t c, std::vector<double> e)
    : rows(r), cols(c), entries(std::move(e)) {
  if (entries.size() != rows * cols) throw ShapeError("cost matrix entries do not match shape");
  for (double v : entries)
    if (!std::isfinite(v)) throw EvaluationError("cost matrix entries must be finite");
}

CostMatrix CostMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size(), c = r ? rows.front().size() : 0;
  std::vector<double> e;
  e.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("cost matrix rows must share a length");
    e.insert(e.end(), row.begin(), row.end());
  }
  return CostMatrix(r, c, std::move(e));
}

CostMatrix build_cost_matrix(const Tensor& probs, const Tensor& pred_boxes,
                             const std::vector<GroundTruth>& gt, const MatchWeights& w) {
  const std::size_t nq = probs.rows(), m = probs.cols();
  if (pred_boxes.rows() != nq || pred_boxes.cols() != 4)
    throw ShapeError("build_cost_matrix: boxes must be [N_q x 4]");
  std::vector<double> e(nq * gt.size());
  for (std::size_t g = 0; g < gt.size(); ++g)
    if (gt[g].category >= m)
      throw CategoryError("build_cost_matrix: ground-truth category " +
                          std::to_string(gt[g].category) + " has no probability column");
  for (std::size_t q = 0; q < nq; ++q) {
    const Box4 pred{pred_boxes.at(q, 0), pred_boxes.at(q, 1), pred_boxes.at(q, 2),
                    pred_boxes.at(q, 3)};
    for (std::size_t g = 0; g < gt.size(); ++g) {
      const double p = probs.at(q, gt[g].category);
      e[q * gt.size() + g] = w.cls * (-p) + w.l1 * l1_box_loss(pred, gt[g].box).value +
                             w.giou * giou_loss(pred, gt[g].box).value;
    }
  }
  return CostMatrix(nq, gt.size(), std::move(e));
}

namespace {

// Assigns every row of an n×m matrix (n <= m) to a distinct column.
// Returns row_to_col.
std::vector<std::size_t> assign_rows(std::size_t n, std::size_t m,
                                     const std::function<double(std::size_t, std::size_t)>& a) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays with a virtual column 0.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> row_to_col(n, 0);
  for (std::size_t j = 1; j <= m; ++j)
    if (p[j] != 0) row_to_col[p[j] - 1] = j - 1;
  return row_to_col;
}

double column_order_total(const CostMatrix& cost,
                          std::vector<std::pair<std::size_t, std::size_t>> pairs) {
  std::sort(pairs.begin(), pairs.end(),
            [](const auto& x, const auto& y) { return x.second < y.second; });
  double total = 0.0;
  for (const auto& [r, c] : pairs) total += cost(r, c);
  return total;
}

}  // namespace

Assignment hungarian(const CostMatrix& cost) {
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) return out;
  if (cost.rows >= cost.cols) {
    // Columns (ground truths) drive the search over rows (predictions).
    const auto col_to_row = assign_rows(cost.cols, cost.rows, [&cost](std::size_t i, std::size_t j) {
      return cost(j, i);
    });
    for (std::size_t c = 0; c < cost.cols; ++c) out.pairs.emplace_back(col_to_row[c], c);
  } else {
    const auto row_to_col = assign_rows(cost.rows, cost.cols, [&cost](std::size_t i, std::size_t j) {
      return cost(i, j);
    });
    for (std::size_t r = 0; r < cost.rows; ++r) out.pairs.emplace_back(r, row_to_col[r]);
  }
  std::sort(out.pairs.begin(), out.pairs.end());
  out.total_cost = column_order_total(cost, out.pairs);
  return out;
}

Assignment brute_force_assign(const CostMatrix& cost) {
  if (cost.cols > 8) throw CountError("brute_force_assign refuses more than 8 columns");
  Assignment best;
  if (cost.rows == 0 || cost.cols == 0) return best;
  if (cost.rows < cost.cols)
    throw CountError("brute_force_assign needs at least as many rows as columns");
  best.total_cost = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> chosen(cost.cols);
  std::vector<char> used(cost.rows, 0);
  // Depth-first over columns; rows in increasing order so the first optimum
  // found is lexicographically smallest.
  std::function<void(std::size_t, double)> dfs = [&](std::size_t col, double partial) {
    if (col == cost.cols) {
      if (partial < best.total_cost) {
        best.total_cost = partial;
        best.pairs.clear();
        for (std::size_t c = 0; c < cost.cols; ++c) best.pairs.emplace_back(chosen[c], c);
      }
      return;
    }
    for (std::size_t r = 0; r < cost.rows; ++r) {
      if (used[r]) continue;
      used[r] = 1;
      chosen[col] = r;
      dfs(col + 1, partial + cost(r, col));
      used[r] = 0;
    }
  };
  dfs(0, 0.0);
  std::sort(best.pairs.begin(), best.pairs.end());
  return best;
}

}  // namespace negprompt
