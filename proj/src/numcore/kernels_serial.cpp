// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "kernel_rows.hpp"

namespace negprompt::kernels::serial {

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> out,
            std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    detail::matmul_row(a.data(), b.data(), out.data(), i, k, n, accumulate);
}

void matmul_nt(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    detail::matmul_nt_row(a.data(), b.data(), out.data(), i, k, n, accumulate);
}

void matmul_tn(std::span<const double> a, std::span<const double> b, std::span<double> out,
               std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    detail::matmul_tn_row(a.data(), b.data(), out.data(), i, m, k, n, accumulate);
}

void im2col(std::span<const double> image, const ConvGeometry& g, std::span<double> col) {
  for (std::size_t c = 0; c < g.channels; ++c)
    detail::im2col_channel(image.data(), g, col.data(), c);
}

void col2im(std::span<const double> col, const ConvGeometry& g, std::span<double> image) {
  for (std::size_t c = 0; c < g.channels; ++c)
    detail::col2im_channel(col.data(), g, image.data(), c);
}

}  // namespace negprompt::kernels::serial
