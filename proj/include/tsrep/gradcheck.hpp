#pragma once

#include <functional>
#include <string>

#include "tsrep/autodiff.hpp"

namespace tsrep {

/// Builds a scalar objective on a fresh tape from a parameter point. The
/// function must register every entry it reads via `tape.parameter`.
using Objective = std::function<Var(Tape& tape, const ParamSet& point)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Index worst_index = -1;
  double analytic = 0.0;
  double numeric = 0.0;
  Index checked = 0;
};

struct GradCheckOptions {
  double eps = 1e-5;
  /// Relative-error denominator floor: max(|analytic|, |numeric|, floor).
  double denom_floor = 1e-8;
  /// Applied to the analytic gradients before comparison. Fault injection
  /// only; leave empty otherwise.
  std::function<void(Gradients&)> corrupt_analytic;
};

/// Compares backward() against central differences at every element of
/// every parameter in `point`.
GradCheckReport finite_diff_check(const Objective& f, const ParamSet& point,
                                  const GradCheckOptions& options = {});

/// Objective value at a point, off the gradient tape.
double evaluate(const Objective& f, const ParamSet& point);

}  // namespace tsrep
