#pragma once

#include "tsrep/autodiff.hpp"

namespace tsrep {

enum class SoftLabelAxis { time, feature };

struct LossOptions {
  double temperature = 1.0;
  /// Add same-branch pairs to the contrastive negative set.
  bool same_branch_negatives = false;
  SoftLabelAxis soft_label_axis = SoftLabelAxis::time;
};

struct LossReport {
  double ssl = 0.0;
  double sl = 0.0;
  double joint = 0.0;
  double lambda = 0.0;
  Index positives = 0;
  Index negatives = 0;
};

/// Contrastive loss between teacher h_t and student h_s, both [B, L, K] and
/// aligned on the overlap. Averages the teacher-anchored and
/// student-anchored InfoNCE terms. The teacher is treated as a constant.
Var ssl_loss(Var h_t, Var h_s, const LossOptions& options = {});

/// Cross-entropy -sum p_t log p_s where both distributions are softmaxes
/// along the chosen axis (time by default), averaged over the remaining
/// axes. h_t_centered is treated as a constant.
Var sl_loss(Var h_t_centered, Var h_s, SoftLabelAxis axis = SoftLabelAxis::time);

/// lambda * sl + (1 - lambda) * ssl.
Var joint_loss(Var ssl, Var sl, double lambda);

/// Positive and negative pair counts of one contrastive direction.
std::pair<Index, Index> contrastive_pair_counts(Index batch, Index length, bool same_branch_negatives);

}  // namespace tsrep
