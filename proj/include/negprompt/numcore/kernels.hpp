// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>

// Raw dense kernels behind the tensor ops.
//
// Two implementations share one signature set: `serial` is the reference and
// `parallel` distributes output rows (or channels) across OpenMP threads. Each
// output element is reduced by exactly one thread in the same index order as
// the serial loop, so both produce bit-identical results for any thread count.
//
// All matrices are row-major. `accumulate` adds into `out` instead of
// overwriting it.

namespace negprompt::kernels {

struct ConvGeometry {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t pad = 1;

  std::size_t out_height() const { return (height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * pad - kernel) / stride + 1; }
  std::size_t col_rows() const { return channels * kernel * kernel; }
  std::size_t col_cols() const { return out_height() * out_width(); }
};

// matmul:    out[m×n] = a[m×k] · b[k×n]
// matmul_nt: out[m×n] = a[m×k] · b[n×k]ᵀ
// matmul_tn: out[m×n] = a[k×m]ᵀ · b[k×n]
// im2col unfolds a C×H×W image into a (C·k·k)×(Ho·Wo) column matrix; col2im
// is its adjoint and scatter-adds into an image the caller has zeroed.

namespace serial {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void im2col(std::span<const double> image, const ConvGeometry& g, std::span<double> col);
void col2im(std::span<const double> col, const ConvGeometry& g, std::span<double> image);
}  // namespace serial

namespace parallel {
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);
void im2col(std::span<const double> image, const ConvGeometry& g, std::span<double> col);
void col2im(std::span<const double> col, const ConvGeometry& g, std::span<double> image);
}  // namespace parallel

/// Number of OpenMP threads the parallel kernels will use (1 without OpenMP).
int max_threads();

}  // namespace negprompt::kernels
