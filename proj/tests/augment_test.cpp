#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <set>
#include <tuple>

#include "test_util.hpp"
#include "tsrep/augment.hpp"

namespace tsrep {
namespace {

using Tuple = std::tuple<Index, Index, Index, Index>;

// Every (a1, b1, a2, b2) with 0 <= a1 <= a2 < b1 <= b2 <= W and b1 - a2 >= m.
std::set<Tuple> enumerate_crops(Index W, Index m = 1) {
  std::set<Tuple> out;
  for (Index a1 = 0; a1 <= W; ++a1)
    for (Index a2 = a1; a2 <= W; ++a2)
      for (Index b1 = a2 + 1; b1 <= W; ++b1)
        for (Index b2 = b1; b2 <= W; ++b2)
          if (b1 - a2 >= m) out.emplace(a1, b1, a2, b2);
  return out;
}

TEST(CropPair, WindowOfTwoEmitsOnlyEnumeratedTuples) {
  const auto valid = enumerate_crops(2);
  EXPECT_EQ(valid.size(), 5u);
  EXPECT_TRUE(valid.count({0, 2, 0, 2}));
  EXPECT_TRUE(valid.count({0, 1, 0, 2}));
  Rng rng(1);
  std::map<Tuple, int> hits;
  for (int i = 0; i < 10000; ++i) {
    CropPair c = sample_crop_pair(2, rng);
    Tuple t{c.a1, c.b1, c.a2, c.b2};
    ASSERT_TRUE(valid.count(t));
    ++hits[t];
  }
  EXPECT_EQ(hits.size(), valid.size());
}

TEST(CropPair, UniformOverValidConfigurations) {
  for (Index W : {3, 5}) {
    const auto valid = enumerate_crops(W);
    Rng rng(W);
    std::map<Tuple, int> hits;
    const int draws = 40000;
    for (int i = 0; i < draws; ++i) {
      CropPair c = sample_crop_pair(W, rng);
      ++hits[{c.a1, c.b1, c.a2, c.b2}];
    }
    const double expect = static_cast<double>(draws) / static_cast<double>(valid.size());
    double chi2 = 0.0;
    for (const auto& t : valid) chi2 += std::pow(hits[t] - expect, 2) / expect;
    // dof = |valid| - 1 (14 for W=3, 69 for W=5); generous upper tail.
    EXPECT_LT(chi2, 2.0 * static_cast<double>(valid.size()) + 30.0) << "W=" << W;
  }
}

TEST(CropPair, OrderingInvariantOverManyDraws) {
  Rng rng(7);
  for (int i = 0; i < 20000; ++i) {
    const Index W = 2 + static_cast<Index>(rng() % 80);
    CropPair c = sample_crop_pair(W, rng);
    ASSERT_TRUE(c.valid_for(W));
    ASSERT_LT(c.a2, c.b1);
    ASSERT_GE(c.overlap_len(), 1);
    ASSERT_LE(c.overlap_len(), W);
  }
  for (int i = 0; i < 2000; ++i) ASSERT_GE(sample_crop_pair(10, rng, 2).overlap_len(), 2);
}

TEST(CropPair, DeterministicAndSized) {
  Rng a(99), b(99);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_crop_pair(30, a), sample_crop_pair(30, b));
  EXPECT_THROW(sample_crop_pair(1, a), SizingError);
}

TEST(Mask, KeepAllAndForcedZero) {
  Rng rng(3);
  Tensor x = testing::random_tensor(rng, {2, 6, 3});
  EXPECT_EQ(bernoulli_mask(x, 1.0, 1, rng), x);
  MaskPlan zero{0.5, 0, Tensor(Shape{2, 6}, 0.0)};
  EXPECT_EQ(bernoulli_mask(x, zero, 1), Tensor(x.shape(), 0.0));
  EXPECT_THROW(bernoulli_mask(x, 0.0, 1, rng), ParameterError);
  EXPECT_THROW(bernoulli_mask(x, 1.5, 1, rng), ParameterError);
}

TEST(Mask, KeptFractionFollowsKeepProbability) {
  Rng rng(11);
  Tensor x(Shape{100000, 1}, 1.0);
  Tensor y = bernoulli_mask(x, 0.5, 0, rng);
  EXPECT_NEAR(y.vec().mean(), 0.5, 0.01);
}

TEST(Mask, SameDecisionForAllChannelsAndCommutesWithPermutation) {
  Rng rng(5);
  Tensor x = testing::random_tensor(rng, {3, 20, 4});
  MaskPlan plan{0.5, 1234, Tensor()};
  Tensor y = bernoulli_mask(x, plan, 1);
  for (Index b = 0; b < 3; ++b)
    for (Index t = 0; t < 20; ++t) {
      const bool kept = plan.realized.at({b, t}) == 1.0;
      for (Index c = 0; c < 4; ++c) EXPECT_EQ(y.at({b, t, c}), kept ? x.at({b, t, c}) : 0.0);
    }
  // Permute channels (reverse), mask with the same plan, permute back.
  Tensor xp = x;
  for (Index b = 0; b < 3; ++b)
    for (Index t = 0; t < 20; ++t)
      for (Index c = 0; c < 4; ++c) xp.at({b, t, c}) = x.at({b, t, 3 - c});
  MaskPlan same{0.5, 1234, Tensor()};
  Tensor yp = bernoulli_mask(xp, same, 1);
  for (Index b = 0; b < 3; ++b)
    for (Index t = 0; t < 20; ++t)
      for (Index c = 0; c < 4; ++c) EXPECT_EQ(yp.at({b, t, c}), y.at({b, t, 3 - c}));
}

TEST(Mask, ExpectationIsKeepProbTimesInput) {
  Rng rng(17);
  Tensor x = testing::random_tensor(rng, {1, 10, 2});
  const double keep = 0.3;
  const int draws = 20000;
  Tensor acc(x.shape());
  for (int i = 0; i < draws; ++i) acc.vec() += bernoulli_mask(x, keep, 1, rng).vec();
  for (Index k = 0; k < x.size(); ++k) {
    const double mean = acc[k] / draws;
    const double se = std::abs(x[k]) * std::sqrt(keep * (1 - keep) / draws);
    EXPECT_LE(std::abs(mean - keep * x[k]), 3.0 * se + 1e-15) << k;
  }
}

TEST(Branches, CropsAndMasks) {
  Rng rng(23);
  Tensor windows = testing::random_tensor(rng, {2, 12, 3});
  CropPair crop{1, 8, 4, 11};
  Rng r1(5), r2(5);
  BranchInputs a = augment_for_branches(windows, crop, 0.5, r1);
  BranchInputs b = augment_for_branches(windows, crop, 0.5, r2);
  EXPECT_EQ(a.teacher_raw, slice_time(windows, 1, 8));
  EXPECT_EQ(a.student_masked.shape(), (Shape{2, 7, 3}));
  EXPECT_EQ(a.student_masked, b.student_masked);
  EXPECT_EQ(a.teacher_raw, b.teacher_raw);
  BranchInputs clear = augment_for_branches(windows, crop, 1.0, r1);
  EXPECT_EQ(clear.student_masked, slice_time(windows, 4, 11));
  EXPECT_THROW(augment_for_branches(windows, CropPair{0, 13, 0, 13}, 0.5, r1), UsageError);
}

}  // namespace
}  // namespace tsrep
