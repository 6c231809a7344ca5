#include "tsrep/optim.hpp"

#include <cmath>

namespace tsrep {

void sgd_step(ParamSet& params, const Gradients& grads, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ParameterError("learning rate must be positive");
  if (!params.same_layout(grads)) throw UsageError("sgd_step: gradients are not keyed like the parameters");
  for (const auto& [name, g] : grads) {
    auto theta = params.values(name);
    for (Index i = 0; i < g.size(); ++i) theta[i] -= lr * g[i];
  }
}

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
  if (!(lr > 0.0)) throw ParameterError("learning rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ParameterError("Adam betas must lie in [0, 1)");
  }
}

void Adam::restore(long steps, ParamSet first, ParamSet second) {
  if (steps < 0 || !first.same_layout(second) || (steps > 0 && first.size() == 0)) {
    throw UsageError("Adam: inconsistent optimizer state");
  }
  t_ = steps;
  m_ = std::move(first);
  v_ = std::move(second);
}

void Adam::step(ParamSet& params, const Gradients& grads) {
  if (!params.same_layout(grads)) throw UsageError("Adam: gradients are not keyed like the parameters");
  if (t_ == 0) {
    m_ = params.zeros_like();
    v_ = params.zeros_like();
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (const auto& [name, g] : grads) {
    auto theta = params.values(name);
    auto m = m_.values(name);
    auto v = v_.values(name);
    for (Index i = 0; i < g.size(); ++i) {
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
      theta[i] -= lr_ * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
    }
  }
}

}  // namespace tsrep
