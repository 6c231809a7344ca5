#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "test_util.hpp"
#include "tsrep/forecast.hpp"
#include "tsrep/verify.hpp"

namespace tsrep {
namespace {

ModelDims tiny_dims(Index channels) {
  ModelDims d;
  d.input_channels = channels;
  d.hidden = 8;
  d.repr = 12;
  d.width = 6;
  d.blocks = 3;
  return d;
}

std::vector<ForecastSample> samples_from(const SeriesDataset& ds, Index T, Index P, Split s) {
  return make_forecast_samples(ds, T, P, s);
}

TEST(EncodeWindows, ShapeDeterminismAndLastStepSensitivity) {
  SeriesDataset ds = split(synth_generate(1, 1, 300, 2, {}));
  auto s = init_params(2, tiny_dims(2));
  auto samples = samples_from(ds, 16, 4, Split::train);
  Tensor f = encode_windows(s, samples, 7);
  EXPECT_EQ(f.shape(), (Shape{static_cast<Index>(samples.size()), 12}));
  EXPECT_EQ(encode_windows(s, samples, 64), f);  // batching does not matter
  std::vector<ForecastSample> twin{samples[3], samples[3]};
  Tensor g = encode_windows(s, twin);
  for (Index k = 0; k < 12; ++k) EXPECT_EQ(g.at({0, k}), g.at({1, k}));
  twin[1].window.at({15, 0}) += 0.25;
  Tensor h = encode_windows(s, twin);
  double diff = 0.0;
  for (Index k = 0; k < 12; ++k) diff += std::abs(h.at({0, k}) - h.at({1, k}));
  EXPECT_GT(diff, 0.0);

  ModelDims full;
  full.input_channels = 2;
  full.blocks = 2;
  auto big = init_params(3, full);
  EXPECT_EQ(encode_windows(big, {samples[0], samples[1]}).shape(), (Shape{2, 320}));
}

TEST(Ridge, ExactLineAndLargeAlpha) {
  Tensor x({5, 1}, {-2, -1, 0, 1, 3});
  Tensor y({5, 1}, {-4, -2, 0, 2, 6});
  ForecastHead h = ridge_fit(x, y, 0.0);
  EXPECT_NEAR(h.weight[0], 2.0, 1e-10);
  EXPECT_NEAR(h.bias[0], 0.0, 1e-10);
  ForecastHead flat = ridge_fit(x, y, 1e12);
  EXPECT_NEAR(flat.weight[0], 0.0, 1e-9);
  EXPECT_NEAR(flat.bias[0], 0.4, 1e-9);  // mean(y)
  EXPECT_THROW(ridge_fit(x, y, -1.0), ParameterError);
}

TEST(Ridge, SingularWithoutPenalty) {
  Rng rng(1);
  Tensor x = testing::random_tensor(rng, {4, 6});
  Tensor y = testing::random_tensor(rng, {4, 2});
  EXPECT_THROW(ridge_fit(x, y, 0.0), ConditioningError);
  EXPECT_NO_THROW(ridge_fit(x, y, 0.1));
}

TEST(Ridge, MatchesNormalEquationOracleAndIsStationary) {
  Rng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    Tensor x = testing::random_tensor(rng, {20, 5});
    Tensor y = testing::random_tensor(rng, {20, 3});
    for (double alpha : {0.0, 1.0, 37.0}) {
      ForecastHead h = ridge_fit(x, y, alpha);
      verify::RidgeReference ref = verify::ridge_gauss_jordan(x, y, alpha);
      EXPECT_LT(max_abs_diff(h.weight, ref.weight), 1e-8);
      EXPECT_LT(max_abs_diff(h.bias, ref.bias), 1e-8);
      // Gradient of |Y - XW - 1b'|^2 + alpha |W|^2 at the solution.
      auto X = x.matrix(20, 5);
      auto Y = y.matrix(20, 3);
      Eigen::MatrixXd R = X * h.weight.matrix(5, 3);
      R.rowwise() += h.bias.vec().transpose();
      R -= Y;
      const Eigen::MatrixXd gw = 2.0 * (X.transpose() * R + alpha * h.weight.matrix(5, 3));
      const Eigen::VectorXd gb = 2.0 * R.colwise().sum().transpose();
      EXPECT_LT(gw.cwiseAbs().maxCoeff(), 1e-8);
      EXPECT_LT(gb.cwiseAbs().maxCoeff(), 1e-8);
    }
  }
}

TEST(Ridge, NormShrinksAlongTheGrid) {
  Rng rng(3);
  Tensor x = testing::random_tensor(rng, {40, 8});
  Tensor y = testing::random_tensor(rng, {40, 4});
  double prev = std::numeric_limits<double>::infinity();
  for (double a : kDefaultAlphaGrid) {
    const double norm = ridge_fit(x, y, a).weight.vec().norm();
    EXPECT_LE(norm, prev) << a;
    prev = norm;
  }
}

TEST(AlphaSelect, GridMembershipAndTies) {
  Rng rng(4);
  Tensor xt = testing::random_tensor(rng, {50, 4});
  Tensor yt = testing::random_tensor(rng, {50, 2});
  Tensor xv = testing::random_tensor(rng, {20, 4});
  Tensor yv = testing::random_tensor(rng, {20, 2});
  const double a = alpha_select(xt, yt, xv, yv);
  EXPECT_NE(std::find(kDefaultAlphaGrid.begin(), kDefaultAlphaGrid.end(), a), kDefaultAlphaGrid.end());
  EXPECT_EQ(alpha_select(xt, yt, xv, yv, {5.0}), 5.0);
  EXPECT_THROW(alpha_select(xt, yt, xv, yv, {}), UsageError);
  EXPECT_THROW(alpha_select(xt, yt, Tensor(Shape{0, 4}), Tensor(Shape{0, 2})), UsageError);
  // Constant targets: every alpha predicts the mean exactly, so it is a
  // tie and the largest alpha wins.
  Tensor flat_t(Shape{50, 2}, 1.5), flat_v(Shape{20, 2}, 1.5);
  EXPECT_EQ(alpha_select(xt, flat_t, xv, flat_v), 1000.0);
}

TEST(AlphaSelect, NoiselessTargetPrefersSmallAlpha) {
  Rng rng(5);
  Tensor w = testing::random_tensor(rng, {6, 3});
  auto make = [&](Index n) {
    Tensor x = testing::random_tensor(rng, {n, 6});
    Tensor y(Shape{n, 3});
    y.matrix(n, 3) = x.matrix(n, 6) * w.matrix(6, 3);
    return std::pair{x, y};
  };
  auto [xt, yt] = make(80);
  auto [xv, yv] = make(30);
  EXPECT_EQ(alpha_select(xt, yt, xv, yv), 0.1);
}

TEST(Metrics, PerfectBalancedAndNaiveOracle) {
  Rng rng(6);
  Tensor t = testing::random_tensor(rng, {7, 6});
  ErrorMetrics perfect = score(t, t);
  EXPECT_EQ(perfect.mse, 0.0);
  EXPECT_EQ(perfect.mae, 0.0);
  Tensor pm({2, 2}, {1, -1, -1, 1});
  ErrorMetrics unit = score(Tensor(Shape{2, 2}, 0.0), pm);
  EXPECT_DOUBLE_EQ(unit.mse, 1.0);
  EXPECT_DOUBLE_EQ(unit.mae, 1.0);
  Tensor p = testing::random_tensor(rng, {7, 6});
  double se = 0.0, ae = 0.0;
  for (Index i = 0; i < 7; ++i)
    for (Index j = 0; j < 6; ++j) {
      const double d = p.at({i, j}) - t.at({i, j});
      se += d * d;
      ae += std::abs(d);
    }
  ErrorMetrics m = score(p, t);
  EXPECT_NEAR(m.mse, se / 42.0, 1e-12);
  EXPECT_NEAR(m.mae, ae / 42.0, 1e-12);
  EXPECT_LE(m.mae, std::sqrt(m.mse) + 1e-15);
  EXPECT_THROW(score(p, Tensor(Shape{7, 5})), DimensionError);
}

TEST(Evaluate, PermutationInvariantAndReported) {
  SeriesDataset ds = normalize(split(synth_generate(8, 1, 400, 2, {})));
  auto s = init_params(9, tiny_dims(2));
  auto train = samples_from(ds, 12, 3, Split::train);
  auto test = samples_from(ds, 12, 3, Split::test);
  ForecastHead head = ridge_fit(encode_windows(s, train), flatten_targets(train), 1.0);
  MetricsReport a = evaluate(head, s, test, &*ds.norm);
  std::reverse(test.begin(), test.end());
  MetricsReport b = evaluate(head, s, test, &*ds.norm);
  EXPECT_NEAR(a.mse, b.mse, 1e-12);
  EXPECT_NEAR(a.mae, b.mae, 1e-12);
  EXPECT_EQ(a.ks_statistic, b.ks_statistic);
  EXPECT_GE(a.ks_p, 0.0);
  EXPECT_LE(a.ks_p, 1.0);
  ASSERT_TRUE(a.denormalized);
  EXPECT_GE(a.denormalized->mse, 0.0);
  EXPECT_EQ(a.horizon, 3);
  EXPECT_THROW(evaluate(head, s, {}), UsageError);

  MetricsReport back = parse_metrics_json(metrics_json(a));
  EXPECT_EQ(back.mse, a.mse);
  EXPECT_EQ(back.ks_p, a.ks_p);
  EXPECT_EQ(back.n_test, a.n_test);
}

TEST(Persistence, ConstantSinusoidAndNoise) {
  SynthSpec flat;
  flat.periods = {};
  flat.amplitudes = {};
  flat.noise_std = 0.0;
  SeriesDataset c = split(synth_generate(1, 1, 200, 2, flat));
  EXPECT_EQ(persistence_baseline(samples_from(c, 8, 5, Split::test)).mse, 0.0);

  // Averaged over whole periods of a unit sinusoid,
  // (x(t + h) - x(t))^2 has mean 1 - cos(2 pi h / 24).
  SynthSpec sine;
  sine.periods = {24};
  sine.amplitudes = {1.0};
  sine.noise_std = 0.0;
  SeriesDataset sd = synth_generate(1, 1, 24 * 40, 1, sine);
  sd.split = SplitBounds{0, 0};
  auto test = samples_from(sd, 4, 12, Split::test);
  // Keep a whole number of periods of window end positions.
  test.resize(24 * 30);
  double expected = 0.0;
  for (Index h = 1; h <= 12; ++h) expected += 1.0 - std::cos(2.0 * std::numbers::pi * h / 24.0);
  expected /= 12.0;
  EXPECT_NEAR(persistence_baseline(test).mse, expected, 1e-12);

  SynthSpec noise;
  noise.periods = {};
  noise.amplitudes = {};
  noise.noise_std = 1.0;
  noise.ar_coef = 0.0;
  SeriesDataset wn = synth_generate(3, 1, 60000, 1, noise);
  wn.split = SplitBounds{0, 0};
  EXPECT_NEAR(persistence_baseline(samples_from(wn, 1, 1, Split::test)).mse / 2.0, 1.0, 0.05);
}

TEST(KsTest, IdentityDisjointAndOracle) {
  std::vector<double> a{0.3, -1.0, 2.0, 0.3};
  KsResult same = ks_test(a, a);
  EXPECT_EQ(same.statistic, 0.0);
  EXPECT_EQ(same.p_value, 1.0);
  EXPECT_EQ(ks_test({1, 2, 3}, {4, 5, 6}).statistic, 1.0);
  EXPECT_THROW(ks_test({}, {1.0}), UsageError);

  Rng rng(10);
  for (int rep = 0; rep < 20; ++rep) {
    std::uniform_real_distribution<double> u1(0.0, 1.0), u2(0.2, 1.3);
    std::vector<double> x(100), y(100);
    for (auto& v : x) v = u1(rng);
    for (auto& v : y) v = u2(rng);
    const KsResult r = ks_test(x, y);
    EXPECT_NEAR(r.statistic, verify::ks_statistic_pooled(x, y), 1e-12);
    EXPECT_GE(r.statistic, 0.0);
    EXPECT_LE(r.statistic, 1.0);
    std::vector<double> xs = x, ys = y;
    for (auto& v : xs) v += 5.0;
    for (auto& v : ys) v += 5.0;
    EXPECT_NEAR(ks_test(xs, ys).statistic, r.statistic, 1e-12);
  }
}

TEST(KsTest, KolmogorovTail) {
  // Reference values of the Kolmogorov survival function (mpmath).
  EXPECT_NEAR(kolmogorov_sf(0.5), 0.96394524366487509439, 1e-12);
  EXPECT_NEAR(kolmogorov_sf(1.0), 0.26999967167735452120, 1e-12);
  EXPECT_NEAR(kolmogorov_sf(1.36), 0.049485876755377883640, 1e-12);
  EXPECT_NEAR(kolmogorov_sf(2.0), 0.00067092525577969535, 1e-15);
  EXPECT_EQ(kolmogorov_sf(0.0), 1.0);
  // Both series agree at the switch point.
  EXPECT_NEAR(kolmogorov_sf(1.18 - 1e-12), kolmogorov_sf(1.18), 1e-10);
}

}  // namespace
}  // namespace tsrep
