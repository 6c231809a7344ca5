#pragma once

#include "tsrep/autodiff.hpp"

namespace tsrep {

/// theta <- theta - lr * g. Throws UsageError if the layouts differ.
void sgd_step(ParamSet& params, const Gradients& grads, double lr);

/// Adam with bias correction. Not used by default; kept for comparison runs.
class Adam {
 public:
  explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  void step(ParamSet& params, const Gradients& grads);
  long steps() const noexcept { return t_; }

  /// Moment estimates, for checkpointing. Empty before the first step.
  const ParamSet& first_moment() const noexcept { return m_; }
  const ParamSet& second_moment() const noexcept { return v_; }
  void restore(long steps, ParamSet first, ParamSet second);

 private:
  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  ParamSet m_, v_;
};

}  // namespace tsrep
