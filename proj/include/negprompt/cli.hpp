// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>

namespace negprompt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Entry point of the `negprompt` command: gen-data, train, eval, sweep,
/// infer and serve. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace negprompt
