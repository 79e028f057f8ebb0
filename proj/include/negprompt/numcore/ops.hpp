// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "negprompt/numcore/kernels.hpp"
#include "negprompt/numcore/tape.hpp"

// Differentiable primitives. Each records its analytic backward rule on the
// tape of its first argument. Matrices are 2-D row-major; rank-1 inputs are
// treated as 1×n rows where noted.

namespace negprompt::ad {

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
/// a[m×n] + bias[n] broadcast over rows.
Var add_row(Var a, Var bias);

Var matmul(Var a, Var b);
/// a[m×k] · b[n×k]ᵀ
Var matmul_nt(Var a, Var b);
Var transpose(Var a);
Var reshape(Var a, std::vector<std::size_t> dims);

Var relu(Var x);
Var sigmoid(Var x);
/// Row-wise softmax of a 2-D tensor.
Var softmax_rows(Var x);
/// Row-wise layer normalisation with learned gain/shift of length n.
Var layer_norm_rows(Var x, Var gain, Var shift, double eps = 1e-5);
/// Each row scaled to unit L2 norm.
Var l2_normalize_rows(Var x);

Var sum(Var x);
/// Mean over rows: [m×n] -> [1×n].
Var mean_rows(Var x);

Var slice_rows(Var a, std::size_t start, std::size_t count);
Var gather_rows(Var a, const std::vector<std::size_t>& rows);
Var concat_rows(const std::vector<Var>& parts);
/// Picks single entries a[r, c] into a column vector [n×1].
Var gather_entries(Var a, const std::vector<std::pair<std::size_t, std::size_t>>& cells);

/// For a [m × (g·k)] input returns [m × g], the max of each contiguous group
/// of k columns. Ties resolve to the lowest column; the gradient flows to the
/// selected entry only.
Var group_max(Var a, std::size_t k);

/// Strided 2-D convolution of one C×H×W image with weights O×C×k×k and bias O.
Var conv2d(Var image, Var weight, Var bias, std::size_t stride, std::size_t pad);

/// Bilinear sampling of a C×H×W map at fixed continuous points -> [P×C].
/// Gradients flow to the map only.
Var bilinear_sample(Var feature_map, std::span<const double> xs, std::span<const double> ys);

}  // namespace negprompt::ad
