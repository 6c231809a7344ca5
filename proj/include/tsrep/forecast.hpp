#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsrep/data.hpp"
#include "tsrep/model.hpp"

namespace tsrep {

/// The regularisation grid searched by default.
inline const std::vector<double> kDefaultAlphaGrid{0.1, 0.2, 0.5, 1, 2, 5, 10, 20, 50, 100, 200, 500, 1000};

/// Student representation at the final timestamp of each window, [n, K].
/// Windows are pushed through the network unmasked, `batch` at a time.
Tensor encode_windows(const TeacherStudentState& state, const std::vector<ForecastSample>& samples,
                      Index batch = 64);

/// Targets flattened to [n, P * C] in (step, channel) order.
Tensor flatten_targets(const std::vector<ForecastSample>& samples);

struct ForecastHead {
  Tensor weight;  // [K, P * C]
  Tensor bias;    // [P * C]
  double alpha = 0.0;

  /// features [n, K] -> predictions [n, P * C].
  Tensor predict(const Tensor& features) const;
};

/// Minimiser of |Y - X W - 1 b^T|^2 + alpha |W|^2; the intercept is not
/// penalised. Throws ConditioningError when alpha = 0 and the centred
/// normal equations are singular.
ForecastHead ridge_fit(const Tensor& features, const Tensor& targets, double alpha);

/// Grid value with the lowest validation MSE after fitting on the training
/// features; ties go to the larger alpha.
double alpha_select(const Tensor& train_x, const Tensor& train_y, const Tensor& val_x, const Tensor& val_y,
                    const std::vector<double>& grid = kDefaultAlphaGrid);

struct ErrorMetrics {
  double mse = 0.0;
  double mae = 0.0;
  Index count = 0;  // number of scored values
};

/// Mean squared and absolute error over every entry.
ErrorMetrics score(const Tensor& predictions, const Tensor& targets);

/// Repeat the last observed step of each window over the horizon.
Tensor persistence_predictions(const std::vector<ForecastSample>& samples);
ErrorMetrics persistence_baseline(const std::vector<ForecastSample>& samples);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size n_a n_b / (n_a + n_b).
KsResult ks_test(std::vector<double> a, std::vector<double> b);

/// Survival function of the Kolmogorov distribution, P(K > x).
double kolmogorov_sf(double x);

struct MetricsReport {
  Index horizon = 0;
  double mse = 0.0;
  double mae = 0.0;
  double alpha = 0.0;
  double ks_statistic = 0.0;
  double ks_p = 1.0;
  Index n_train = 0;
  Index n_val = 0;
  Index n_test = 0;
  double baseline_mse = 0.0;
  double baseline_mae = 0.0;
  std::optional<ErrorMetrics> denormalized;
};

/// Metrics of a fitted head on test samples, including the K-S comparison
/// between pooled window inputs and pooled predictions.
MetricsReport evaluate(const ForecastHead& head, const TeacherStudentState& state,
                       const std::vector<ForecastSample>& test, const NormStats* norm = nullptr);

/// Full protocol for one horizon: features for all splits, alpha search on
/// validation, final fit on train, test metrics and the persistence baseline.
MetricsReport run_forecast(const TeacherStudentState& state, const SeriesDataset& ds, Index lookback, Index horizon,
                           const std::vector<double>& grid = kDefaultAlphaGrid);

std::string metrics_json(const MetricsReport& report);
MetricsReport parse_metrics_json(const std::string& text);

}  // namespace tsrep
