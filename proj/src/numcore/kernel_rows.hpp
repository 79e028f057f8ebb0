// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

// Per-row bodies shared by the serial and OpenMP kernels. Keeping the inner
// loops in one place is what makes the two paths bit-identical.

#include <algorithm>
#include <cstddef>

#include "negprompt/numcore/kernels.hpp"

namespace negprompt::kernels::detail {

inline void matmul_row(const double* a, const double* b, double* out, std::size_t i,
                       std::size_t k, std::size_t n, bool accumulate) {
  double* o = out + i * n;
  if (!accumulate) std::fill(o, o + n, 0.0);
  const double* ar = a + i * k;
  for (std::size_t p = 0; p < k; ++p) {
    const double av = ar[p];
    if (av == 0.0) continue;
    const double* br = b + p * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
  }
}

inline void matmul_nt_row(const double* a, const double* b, double* out, std::size_t i,
                          std::size_t k, std::size_t n, bool accumulate) {
  double* o = out + i * n;
  const double* ar = a + i * k;
  std::size_t j = 0;
  // Four outputs at a time; each sum still runs over p in order.
  for (; j + 4 <= n; j += 4) {
    const double* b0 = b + j * k;
    const double* b1 = b0 + k;
    const double* b2 = b1 + k;
    const double* b3 = b2 + k;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = ar[p];
      s0 += av * b0[p];
      s1 += av * b1[p];
      s2 += av * b2[p];
      s3 += av * b3[p];
    }
    o[j] = accumulate ? o[j] + s0 : s0;
    o[j + 1] = accumulate ? o[j + 1] + s1 : s1;
    o[j + 2] = accumulate ? o[j + 2] + s2 : s2;
    o[j + 3] = accumulate ? o[j + 3] + s3 : s3;
  }
  for (; j < n; ++j) {
    const double* br = b + j * k;
    double s = 0.0;
    for (std::size_t p = 0; p < k; ++p) s += ar[p] * br[p];
    o[j] = accumulate ? o[j] + s : s;
  }
}

inline void matmul_tn_row(const double* a, const double* b, double* out, std::size_t i,
                          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  double* o = out + i * n;
  if (!accumulate) std::fill(o, o + n, 0.0);
  for (std::size_t r = 0; r < k; ++r) {
    const double av = a[r * m + i];
    if (av == 0.0) continue;
    const double* br = b + r * n;
    for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
  }
}

// One input channel's k·k rows of the column matrix.
inline void im2col_channel(const double* image, const ConvGeometry& g, double* col,
                           std::size_t c) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t cols = oh * ow;
  for (std::size_t ky = 0; ky < g.kernel; ++ky) {
    for (std::size_t kx = 0; kx < g.kernel; ++kx) {
      double* dst = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
      for (std::size_t y = 0; y < oh; ++y) {
        const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
        for (std::size_t x = 0; x < ow; ++x) {
          const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
          const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<long>(g.height) &&
                              ix < static_cast<long>(g.width);
          dst[y * ow + x] =
              inside ? image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                             static_cast<std::size_t>(ix)]
                     : 0.0;
        }
      }
    }
  }
}

inline void col2im_channel(const double* col, const ConvGeometry& g, double* image,
                           std::size_t c) {
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const std::size_t cols = oh * ow;
  for (std::size_t ky = 0; ky < g.kernel; ++ky) {
    for (std::size_t kx = 0; kx < g.kernel; ++kx) {
      const double* src = col + ((c * g.kernel + ky) * g.kernel + kx) * cols;
      for (std::size_t y = 0; y < oh; ++y) {
        const long iy = static_cast<long>(y * g.stride + ky) - static_cast<long>(g.pad);
        if (iy < 0 || iy >= static_cast<long>(g.height)) continue;
        for (std::size_t x = 0; x < ow; ++x) {
          const long ix = static_cast<long>(x * g.stride + kx) - static_cast<long>(g.pad);
          if (ix < 0 || ix >= static_cast<long>(g.width)) continue;
          image[(c * g.height + static_cast<std::size_t>(iy)) * g.width +
                static_cast<std::size_t>(ix)] += src[y * ow + x];
        }
      }
    }
  }
}

}  // namespace negprompt::kernels::detail
