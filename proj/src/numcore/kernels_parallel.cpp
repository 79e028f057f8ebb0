// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernel_rows.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace negprompt::kernels {

namespace {
// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelMinWork = 1 << 15;
}  // namespace

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

namespace parallel {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelMinWork)
  for (long i = 0; i < rows; ++i)
    detail::matmul_row(a.data(), b.data(), out.data(), static_cast<std::size_t>(i), k, n,
                       accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelMinWork)
  for (long i = 0; i < rows; ++i)
    detail::matmul_nt_row(a.data(), b.data(), out.data(), static_cast<std::size_t>(i), k, n,
                          accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const long rows = static_cast<long>(m);
#pragma omp parallel for schedule(static) if (m * k * n >= kParallelMinWork)
  for (long i = 0; i < rows; ++i)
    detail::matmul_tn_row(a.data(), b.data(), out.data(), static_cast<std::size_t>(i), m, k,
                          n, accumulate);
}

void im2col(std::span<const double> image, const ConvGeometry& g, std::span<double> col) {
  const long channels = static_cast<long>(g.channels);
#pragma omp parallel for schedule(static) if (g.col_rows() * g.col_cols() >= kParallelMinWork)
  for (long c = 0; c < channels; ++c)
    detail::im2col_channel(image.data(), g, col.data(), static_cast<std::size_t>(c));
}

void col2im(std::span<const double> col, const ConvGeometry& g, std::span<double> image) {
  const long channels = static_cast<long>(g.channels);
#pragma omp parallel for schedule(static) if (g.col_rows() * g.col_cols() >= kParallelMinWork)
  for (long c = 0; c < channels; ++c)
    detail::col2im_channel(col.data(), g, image.data(), static_cast<std::size_t>(c));
}

}  // namespace parallel
}  // namespace negprompt::kernels
