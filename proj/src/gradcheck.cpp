#include "tsrep/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace tsrep {

double evaluate(const Objective& f, const ParamSet& point) {
  Tape tape(false);
  Var out = f(tape, point);
  if (out.value().size() != 1) throw UsageError("objective must be scalar");
  const double v = out.value()[0];
  if (!std::isfinite(v)) throw NumericError("objective is not finite");
  return v;
}

GradCheckReport finite_diff_check(const Objective& f, const ParamSet& point,
                                  const GradCheckOptions& options) {
  if (!(options.eps > 0.0) || !std::isfinite(options.eps)) {
    throw ParameterError("finite-difference step must be positive");
  }
  Gradients analytic;
  {
    Tape tape;
    Var loss = f(tape, point);
    if (!std::isfinite(loss.value()[0])) throw NumericError("objective is not finite");
    analytic = backward(tape, loss, point);
  }
  if (options.corrupt_analytic) options.corrupt_analytic(analytic);

  GradCheckReport report;
  ParamSet probe = point;
  for (const auto& [name, value] : point) {
    auto slot = probe.values(name);
    const Tensor& g = analytic.at(name);
    for (Index i = 0; i < value.size(); ++i) {
      const double orig = slot[i];
      slot[i] = orig + options.eps;
      const double up = evaluate(f, probe);
      slot[i] = orig - options.eps;
      const double down = evaluate(f, probe);
      slot[i] = orig;
      const double numeric = (up - down) / (2.0 * options.eps);
      const double denom = std::max({std::abs(g[i]), std::abs(numeric), options.denom_floor});
      const double rel = std::abs(g[i] - numeric) / denom;
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_index < 0) {
        report.max_rel_error = std::max(rel, report.max_rel_error);
        if (rel >= report.max_rel_error) {
          report.worst_param = name;
          report.worst_index = i;
          report.analytic = g[i];
          report.numeric = numeric;
        }
      }
    }
  }
  return report;
}

}  // namespace tsrep
