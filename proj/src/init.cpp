// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/init.hpp"

#include <cmath>

namespace negprompt::init {

Tensor xavier(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  return uniform({fan_in, fan_out}, std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)), rng);
}

Tensor uniform(std::vector<std::size_t> dims, double bound, Rng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = negprompt::uniform(rng, -bound, bound);
  return t;
}

Tensor normal(std::vector<std::size_t> dims, double stddev, Rng& rng) {
  Tensor t(std::move(dims));
  for (auto& v : t.storage()) v = negprompt::normal(rng, 0.0, stddev);
  return t;
}

}  // namespace negprompt::init
