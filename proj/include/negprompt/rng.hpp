// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace negprompt {

using Rng = std::mt19937_64;

/// Independent generator for a named purpose ("data", "jitter", "mode",
/// "init", ...). Streams with different names never share state, so adding
/// draws to one does not perturb another.
Rng make_stream(std::uint64_t seed, std::string_view name);

double uniform(Rng& rng, double lo, double hi);
/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);
bool bernoulli(Rng& rng, double p);
double normal(Rng& rng, double mean, double stddev);

}  // namespace negprompt
