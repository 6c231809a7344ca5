#pragma once

#include <cstdint>
#include <random>

#include "tsrep/tensor.hpp"

namespace tsrep {

using Rng = std::mt19937_64;

/// Two half-open crops [a1, b1) and [a2, b2) of a window with
/// a1 <= a2 < b1 <= b2. They overlap on [a2, b1).
struct CropPair {
  Index a1 = 0, b1 = 0, a2 = 0, b2 = 0;

  Index overlap_len() const noexcept { return b1 - a2; }
  Index first_len() const noexcept { return b1 - a1; }
  Index second_len() const noexcept { return b2 - a2; }
  /// Overlap as offsets into the first and second crop.
  Index overlap_in_first() const noexcept { return a2 - a1; }
  bool valid_for(Index window_len) const noexcept {
    return 0 <= a1 && a1 <= a2 && a2 < b1 && b1 <= b2 && b2 <= window_len;
  }
  friend bool operator==(const CropPair&, const CropPair&) = default;
};

/// Draws uniformly over all valid tuples whose overlap is at least
/// `min_overlap`: (a2, b1) first with weight (a2 + 1)(W - b1 + 1), then a1
/// and b2 uniformly on their remaining ranges.
CropPair sample_crop_pair(Index window_len, Rng& rng, Index min_overlap = 1);

/// Timestamp keep/drop decisions. The realized mask covers every axis up to
/// and including the time axis and broadcasts over the trailing axes.
struct MaskPlan {
  double keep_prob = 1.0;
  std::uint64_t seed = 0;
  Tensor realized;  // empty until first use
};

/// Multiplies x by the plan's Bernoulli(keep_prob) mask. Draws the mask from
/// `plan.seed` if it is not realized yet.
Tensor bernoulli_mask(const Tensor& x, MaskPlan& plan, Index time_axis);
/// One-shot form: fresh seed from `rng`.
Tensor bernoulli_mask(const Tensor& x, double keep_prob, Index time_axis, Rng& rng);

struct BranchInputs {
  Tensor teacher_raw;     // [B, b1 - a1, C], unmasked
  Tensor student_masked;  // [B, b2 - a2, C], masked in input space
};

/// Crops a batch of windows [B, W, C]. The teacher's mask is applied later,
/// after projection.
BranchInputs augment_for_branches(const Tensor& windows, const CropPair& crop, double keep_prob, Rng& rng);

/// Copy of x[:, begin:end, :] for a rank-3 tensor.
Tensor slice_time(const Tensor& x, Index begin, Index end);

}  // namespace tsrep
