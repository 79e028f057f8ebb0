// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

// Serial reference against the OpenMP kernels. Arguments are matrix sizes
// (m = k = n) or image sides.

#include <benchmark/benchmark.h>

#include <vector>

#include "negprompt/detector.hpp"
#include "negprompt/numcore/kernels.hpp"
#include "negprompt/rng.hpp"

namespace {

using namespace negprompt;

std::vector<double> random_vec(std::size_t n) {
  Rng rng = make_stream(1, "bench");
  std::vector<double> v(n);
  for (auto& x : v) x = uniform(rng, -1, 1);
  return v;
}

using MatmulFn = void (*)(std::span<const double>, std::span<const double>, std::span<double>, std::size_t,
                          std::size_t, std::size_t, bool);

template <MatmulFn F>
void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = random_vec(n * n), b = random_vec(n * n);
  std::vector<double> out(n * n);
  for (auto _ : state) {
    F(a, b, out, n, n, n, false);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * n * n * n));
}

template <void (*F)(std::span<const double>, const kernels::ConvGeometry&, std::span<double>)>
void BM_Im2col(benchmark::State& state) {
  kernels::ConvGeometry g;
  g.channels = 32;
  g.height = g.width = static_cast<std::size_t>(state.range(0));
  const auto image = random_vec(g.channels * g.height * g.width);
  std::vector<double> col(g.col_rows() * g.col_cols());
  for (auto _ : state) {
    F(image, g, col);
    benchmark::DoNotOptimize(col.data());
  }
}

void BM_Predict(benchmark::State& state) {
  ModelConfig m;
  Rng rng = make_stream(0, "init");
  const ParamMap p = init_model(m, rng);
  Tensor pixels({3, 64, 64}, 0.5);
  for (auto _ : state) benchmark::DoNotOptimize(predict(pixels, p, m).boxes.data());
}

BENCHMARK(BM_Matmul<kernels::serial::matmul>)->Name("matmul/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<kernels::parallel::matmul>)->Name("matmul/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<kernels::serial::matmul_nt>)->Name("matmul_nt/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_nt>)->Name("matmul_nt/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<kernels::serial::matmul_tn>)->Name("matmul_tn/serial")->Arg(64)->Arg(256);
BENCHMARK(BM_Matmul<kernels::parallel::matmul_tn>)->Name("matmul_tn/parallel")->Arg(64)->Arg(256);
BENCHMARK(BM_Im2col<kernels::serial::im2col>)->Name("im2col/serial")->Arg(32)->Arg(64);
BENCHMARK(BM_Im2col<kernels::parallel::im2col>)->Name("im2col/parallel")->Arg(32)->Arg(64);
BENCHMARK(BM_Predict)->Name("predict/64px")->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
