// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "negprompt/numcore/tape.hpp"

namespace negprompt {

/// Builds a scalar on `tape` from parameters bound out of the map.
using ScalarGraph = std::function<Var(Tape& tape, const ParamMap& params)>;

struct ParamCoord {
  std::string name;
  std::size_t index = 0;
};

struct GradCheckOptions {
  double eps = 1e-6;
  double tol = 1e-4;
  /// Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-6;
  /// Coordinates to probe; empty means every coordinate of every parameter.
  std::vector<ParamCoord> coords;
};

struct CoordCheck {
  ParamCoord coord;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
  /// The ±eps probes took a different branch than the centre point.
  bool excluded = false;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = true;
  std::size_t checked = 0;
  std::size_t excluded = 0;
  std::vector<CoordCheck> coords;
};

/// Compares tape gradients with central finite differences. Throws RangeError
/// for eps outside [1e-7, 1e-3] and EvaluationError on a non-finite forward.
GradCheckReport grad_check(const ScalarGraph& f, const ParamMap& params,
                           const GradCheckOptions& options = {});

double relative_error(double analytic, double numeric, double floor);

}  // namespace negprompt
