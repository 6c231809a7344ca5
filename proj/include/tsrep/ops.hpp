#pragma once

#include "tsrep/autodiff.hpp"

namespace tsrep {

// Differentiable primitives. Every function records its result on the tape
// owning its inputs; all inputs must share that tape.

Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal-shaped tensors.
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var relu(Var x);
/// Exact form x * Phi(x) with Phi the standard normal CDF.
Var gelu(Var x);

/// Sum of all elements, as a rank-0 tensor.
Var sum(Var x);
Var mean(Var x);

/// y = x W + b applied along the trailing axis; x is [..., Din].
Var linear(Var x, Var weight, Var bias);
Var linear(Var x, Var weight);

/// Per-column reparameterisation W[:, o] = g[o] * V[:, o] / ||V[:, o]||.
Var weight_norm(Var direction, Var gain);

/// x / max(||x||_2, 1e-12) along `axis`.
Var l2_normalize(Var x, Index axis);
Var softmax(Var x, Index axis);
Var log_softmax(Var x, Index axis);

/// Half-open range [begin, end) along `axis`.
Var slice(Var x, Index axis, Index begin, Index end);
/// [B, M, N] -> [B, N, M].
Var swap_last_axes(Var x);

/// Causal convolution with dilation: z is [B, Cin, L], kernel is
/// [Cout, Cin, k], output is [B, Cout, L] with
/// out[s] = sum_i kernel[i] * z[s - dilation * i] and zero left padding.
Var dilated_causal_conv1d(Var z, Var kernel, Index dilation);
/// Same with a per-output-channel bias [Cout].
Var dilated_causal_conv1d(Var z, Var kernel, Var bias, Index dilation);

struct InfoNceOptions {
  double temperature = 1.0;
  /// Also treat anchor-branch vectors at other instances (same timestamp) and
  /// other timestamps (same instance) as negatives.
  bool same_branch_negatives = false;
};

/// Contrastive loss averaged over every anchor (i, t) of `anchor` [B, L, K].
/// The positive is other[i, t]; negatives are other[j, t] for j != i and
/// other[i, t'] for t' != t. Per-anchor term is
/// logsumexp(logits) - positive_logit with logits = dot / temperature.
Var info_nce(Var anchor, Var other, const InfoNceOptions& options = {});

}  // namespace tsrep
