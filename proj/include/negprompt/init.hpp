// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "negprompt/numcore/tensor.hpp"
#include "negprompt/rng.hpp"

// Parameter initialisers.
namespace negprompt::init {

/// Uniform in ±sqrt(6 / (fan_in + fan_out)), shaped [fan_in × fan_out].
Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng);
Tensor uniform(std::vector<std::size_t> dims, double bound, Rng& rng);
Tensor normal(std::vector<std::size_t> dims, double stddev, Rng& rng);

}  // namespace negprompt::init
