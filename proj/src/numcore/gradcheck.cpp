// Copyright 2026 The negprompt Authors
// SPDX-License-Identifier: Apache-2.0

#include "negprompt/numcore/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "negprompt/errors.hpp"

namespace negprompt {

namespace {

struct Probe {
  double value;
  std::uint64_t signature;
};

Probe evaluate(const ScalarGraph& f, const ParamMap& params) {
  Tape tape(true);
  Var out = f(tape, params);
  if (out.value().size() != 1) throw ShapeError("grad_check: graph output is not a scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw EvaluationError("grad_check: non-finite forward value");
  return {v, tape.branch_signature()};
}

}  // namespace

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const ScalarGraph& f, const ParamMap& params,
                           const GradCheckOptions& options) {
  if (!(options.eps >= 1e-7 && options.eps <= 1e-3))
    throw RangeError("grad_check: eps must lie in [1e-7, 1e-3]");

  Tape tape(true);
  Var out = f(tape, params);
  if (out.value().size() != 1) throw ShapeError("grad_check: graph output is not a scalar");
  if (!std::isfinite(out.value()[0]))
    throw EvaluationError("grad_check: non-finite forward value");
  const std::uint64_t centre = tape.branch_signature();
  tape.backward(out);
  const ParamMap grads = tape.param_grads();

  std::vector<ParamCoord> coords = options.coords;
  if (coords.empty())
    for (const auto& [name, value] : params)
      for (std::size_t i = 0; i < value.size(); ++i) coords.push_back({name, i});

  GradCheckReport report;
  ParamMap probe = params;
  for (const auto& c : coords) {
    auto it = probe.find(c.name);
    if (it == probe.end() || c.index >= it->second.size())
      throw RangeError("grad_check: coordinate " + c.name + "[" + std::to_string(c.index) +
                       "] does not exist");
    const auto g = grads.find(c.name);
    const double analytic = g == grads.end() ? 0.0 : g->second[c.index];
    double& slot = it->second[c.index];
    const double saved = slot;
    slot = saved + options.eps;
    const Probe plus = evaluate(f, probe);
    slot = saved - options.eps;
    const Probe minus = evaluate(f, probe);
    slot = saved;

    CoordCheck check;
    check.coord = c;
    check.analytic = analytic;
    check.numeric = (plus.value - minus.value) / (2.0 * options.eps);
    check.excluded = plus.signature != centre || minus.signature != centre;
    check.rel_error = relative_error(check.analytic, check.numeric, options.floor);
    if (check.excluded) {
      ++report.excluded;
    } else {
      ++report.checked;
      report.max_rel_error = std::max(report.max_rel_error, check.rel_error);
    }
    report.coords.push_back(check);
  }
  report.pass = report.max_rel_error <= options.tol;
  return report;
}

}  // namespace negprompt
