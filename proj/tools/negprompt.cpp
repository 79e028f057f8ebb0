// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "negprompt/cli.hpp"

int main(int argc, char** argv) { return negprompt::run_cli(argc, argv, std::cout, std::cerr); }
