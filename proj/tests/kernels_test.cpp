// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

// The OpenMP kernels must reproduce the serial reference bit for bit.

#include <vector>

#include <gtest/gtest.h>

#include "negprompt/numcore/kernels.hpp"
#include "negprompt/rng.hpp"

namespace negprompt::kernels {
namespace {

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1, 1);
  return v;
}

TEST(Kernels, ParallelMatmulsMatchSerial) {
  Rng rng = make_stream(7, "kernels");
  for (auto [m, k, n] : {std::tuple{1, 1, 1}, {7, 13, 5}, {64, 96, 80}, {200, 32, 64}}) {
    const auto a = random_vec(m * k, rng), b = random_vec(k * n, rng);
    const auto bt = random_vec(n * k, rng), at = random_vec(k * m, rng);
    std::vector<double> s(m * n), p(m * n);
    serial::matmul(a, b, s, m, k, n);
    parallel::matmul(a, b, p, m, k, n);
    EXPECT_EQ(s, p);
    serial::matmul_nt(a, bt, s, m, k, n);
    parallel::matmul_nt(a, bt, p, m, k, n);
    EXPECT_EQ(s, p);
    serial::matmul_tn(at, b, s, m, k, n);
    parallel::matmul_tn(at, b, p, m, k, n);
    EXPECT_EQ(s, p);
    // accumulate mode
    serial::matmul(a, b, s, m, k, n, true);
    parallel::matmul(a, b, p, m, k, n, true);
    EXPECT_EQ(s, p);
  }
}

TEST(Kernels, Im2ColRoundTripMatchesSerial) {
  Rng rng = make_stream(8, "kernels");
  ConvGeometry g{16, 33, 31, 3, 2, 1};
  const auto img = random_vec(g.channels * g.height * g.width, rng);
  std::vector<double> cs(g.col_rows() * g.col_cols()), cp(cs.size());
  serial::im2col(img, g, cs);
  parallel::im2col(img, g, cp);
  EXPECT_EQ(cs, cp);
  std::vector<double> is(img.size(), 0.0), ip(img.size(), 0.0);
  serial::col2im(cs, g, is);
  parallel::col2im(cp, g, ip);
  EXPECT_EQ(is, ip);
}

TEST(Kernels, Col2ImIsAdjointOfIm2Col) {
  // <im2col(x), y> == <x, col2im(y)>
  Rng rng = make_stream(9, "kernels");
  ConvGeometry g{2, 6, 5, 3, 2, 1};
  const auto x = random_vec(g.channels * g.height * g.width, rng);
  const auto y = random_vec(g.col_rows() * g.col_cols(), rng);
  std::vector<double> col(y.size()), back(x.size(), 0.0);
  serial::im2col(x, g, col);
  serial::col2im(y, g, back);
  double lhs = 0, rhs = 0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += col[i] * y[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * back[i];
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

}  // namespace
}  // namespace negprompt::kernels
