#include "tsrep/loss.hpp"

#include <cmath>

#include "tsrep/ops.hpp"

namespace tsrep {

namespace {

void check_pair(const Var& a, const Var& b, const char* what) {
  if (a.value().rank() != 3 || a.shape() != b.shape()) {
    throw DimensionError(std::string(what) + " expects two [B, L, K] batches of equal shape, got " +
                         shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

}  // namespace

Var ssl_loss(Var h_t, Var h_s, const LossOptions& options) {
  check_pair(h_t, h_s, "ssl_loss");
  InfoNceOptions nce{options.temperature, options.same_branch_negatives};
  Var teacher = h_t.tape().stop_gradient(h_t);
  return scale(add(info_nce(teacher, h_s, nce), info_nce(h_s, teacher, nce)), 0.5);
}

Var sl_loss(Var h_t_centered, Var h_s, SoftLabelAxis axis) {
  check_pair(h_t_centered, h_s, "sl_loss");
  const Index ax = axis == SoftLabelAxis::time ? 1 : 2;
  if (h_s.dim(ax) < 2) {
    throw UsageError(std::string("soft-label loss needs at least two entries along the ") +
                     (axis == SoftLabelAxis::time ? "time" : "feature") + " axis");
  }
  Var p_t = softmax(h_t_centered.tape().stop_gradient(h_t_centered), ax);
  Var ce = sum(mul(p_t, log_softmax(h_s, ax)));
  const double groups = static_cast<double>(h_s.value().size() / h_s.dim(ax));
  return scale(ce, -1.0 / groups);
}

Var joint_loss(Var ssl, Var sl, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw ParameterError("lambda must lie in [0, 1], got " + std::to_string(lambda));
  }
  return add(scale(sl, lambda), scale(ssl, 1.0 - lambda));
}

std::pair<Index, Index> contrastive_pair_counts(Index batch, Index length, bool same_branch_negatives) {
  const Index anchors = batch * length;
  const Index per_anchor = (batch - 1) + (length - 1);
  return {anchors, anchors * per_anchor * (same_branch_negatives ? 2 : 1)};
}

}  // namespace tsrep
