#include "tsrep/augment.hpp"

#include <cmath>
#include <vector>

namespace tsrep {

CropPair sample_crop_pair(Index window_len, Rng& rng, Index min_overlap) {
  if (window_len < 2) throw SizingError("crop window must have length >= 2, got " + std::to_string(window_len));
  if (min_overlap < 1 || min_overlap > window_len) {
    throw ParameterError("minimum overlap must lie in [1, window length]");
  }
  std::vector<std::pair<Index, Index>> pairs;
  std::vector<double> weights;
  for (Index a2 = 0; a2 + min_overlap <= window_len; ++a2) {
    for (Index b1 = a2 + min_overlap; b1 <= window_len; ++b1) {
      pairs.emplace_back(a2, b1);
      weights.push_back(static_cast<double>((a2 + 1) * (window_len - b1 + 1)));
    }
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  const auto [a2, b1] = pairs[pick(rng)];
  CropPair c;
  c.a2 = a2;
  c.b1 = b1;
  c.a1 = std::uniform_int_distribution<Index>(0, a2)(rng);
  c.b2 = std::uniform_int_distribution<Index>(b1, window_len)(rng);
  return c;
}

Tensor bernoulli_mask(const Tensor& x, MaskPlan& plan, Index time_axis) {
  if (!(plan.keep_prob > 0.0 && plan.keep_prob <= 1.0)) {
    throw ParameterError("keep probability must lie in (0, 1], got " + std::to_string(plan.keep_prob));
  }
  if (time_axis < 0) time_axis += x.rank();
  if (time_axis < 0 || time_axis >= x.rank()) throw DimensionError("mask axis out of range");
  Shape mask_shape(x.shape().begin(), x.shape().begin() + time_axis + 1);
  if (plan.realized.size() == 0 && plan.realized.shape().empty()) {
    plan.realized = Tensor(mask_shape, 1.0);
    if (plan.keep_prob < 1.0) {
      Rng rng(plan.seed);
      std::bernoulli_distribution keep(plan.keep_prob);
      for (Index i = 0; i < plan.realized.size(); ++i) plan.realized[i] = keep(rng) ? 1.0 : 0.0;
    }
  } else if (plan.realized.shape() != mask_shape) {
    throw DimensionError("realized mask " + shape_str(plan.realized.shape()) + " does not fit " +
                         shape_str(x.shape()));
  }
  Tensor out = x;
  const Index inner = x.size() / std::max<Index>(plan.realized.size(), 1);
  for (Index m = 0; m < plan.realized.size(); ++m) {
    if (plan.realized[m] == 1.0) continue;
    for (Index k = 0; k < inner; ++k) out[m * inner + k] *= plan.realized[m];
  }
  return out;
}

Tensor bernoulli_mask(const Tensor& x, double keep_prob, Index time_axis, Rng& rng) {
  MaskPlan plan{keep_prob, rng(), Tensor()};
  return bernoulli_mask(x, plan, time_axis);
}

Tensor slice_time(const Tensor& x, Index begin, Index end) {
  if (x.rank() != 3) throw DimensionError("slice_time expects [B, T, C], got " + shape_str(x.shape()));
  const Index batch = x.dim(0), len = x.dim(1), channels = x.dim(2);
  if (begin < 0 || end > len || begin >= end) throw DimensionError("time slice out of range");
  Tensor out(Shape{batch, end - begin, channels});
  for (Index b = 0; b < batch; ++b) {
    std::copy_n(x.data() + (b * len + begin) * channels, (end - begin) * channels,
                out.data() + b * (end - begin) * channels);
  }
  return out;
}

BranchInputs augment_for_branches(const Tensor& windows, const CropPair& crop, double keep_prob, Rng& rng) {
  if (windows.rank() != 3) throw DimensionError("windows must be [B, W, C], got " + shape_str(windows.shape()));
  if (!crop.valid_for(windows.dim(1))) throw UsageError("crop pair does not fit the window");
  if (!(keep_prob > 0.0 && keep_prob <= 1.0)) throw ParameterError("keep probability must lie in (0, 1]");
  BranchInputs out;
  out.teacher_raw = slice_time(windows, crop.a1, crop.b1);
  out.student_masked = bernoulli_mask(slice_time(windows, crop.a2, crop.b2), keep_prob, 1, rng);
  return out;
}

}  // namespace tsrep
