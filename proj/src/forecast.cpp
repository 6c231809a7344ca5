#include "tsrep/forecast.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <numbers>

namespace tsrep {

namespace {

using RowMatrix = RowMajorMatrix<double>;

RowMatrix as_matrix(const Tensor& t) {
  if (t.rank() != 2) throw DimensionError("expected a matrix, got " + shape_str(t.shape()));
  return t.matrix(t.dim(0), t.dim(1));
}

}  // namespace

Tensor encode_windows(const TeacherStudentState& state, const std::vector<ForecastSample>& samples, Index batch) {
  if (batch < 1) throw ParameterError("batch must be positive");
  const Index n = static_cast<Index>(samples.size());
  const Index K = state.dims.repr;
  Tensor out(Shape{n, K});
  if (n == 0) return out;
  const Shape window_shape = samples.front().window.shape();
  if (window_shape.size() != 2) throw DimensionError("forecast windows must be [T, C]");
  const Index T = window_shape[0], C = window_shape[1];
  for (Index start = 0; start < n; start += batch) {
    const Index m = std::min(batch, n - start);
    Tensor x(Shape{m, T, C});
    for (Index i = 0; i < m; ++i) {
      const Tensor& w = samples[start + i].window;
      if (w.shape() != window_shape) throw DimensionError("forecast windows differ in shape");
      std::copy(w.data(), w.data() + w.size(), x.data() + i * T * C);
    }
    Tape off(false);
    const Tensor& h = represent(off, state.student, state.dims, off.constant(std::move(x))).value();
    for (Index i = 0; i < m; ++i) {
      const double* last = h.data() + (i * T + T - 1) * K;
      std::copy(last, last + K, out.data() + (start + i) * K);
    }
  }
  return out;
}

Tensor flatten_targets(const std::vector<ForecastSample>& samples) {
  const Index n = static_cast<Index>(samples.size());
  if (n == 0) return Tensor(Shape{0, 0});
  const Index width = samples.front().target.size();
  Tensor out(Shape{n, width});
  for (Index i = 0; i < n; ++i) {
    const Tensor& t = samples[i].target;
    if (t.size() != width) throw DimensionError("forecast targets differ in shape");
    std::copy(t.data(), t.data() + width, out.data() + i * width);
  }
  return out;
}

Tensor ForecastHead::predict(const Tensor& features) const {
  const Index K = weight.dim(0), P = weight.dim(1);
  if (features.rank() != 2 || features.dim(1) != K) {
    throw DimensionError("head expects [n, " + std::to_string(K) + "] features, got " + shape_str(features.shape()));
  }
  Tensor out(Shape{features.dim(0), P});
  auto Y = out.matrix(features.dim(0), P);
  Y = features.matrix(features.dim(0), K) * weight.matrix(K, P);
  Y.rowwise() += bias.vec().transpose();
  return out;
}

ForecastHead ridge_fit(const Tensor& features, const Tensor& targets, double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ParameterError("alpha must be non-negative and finite");
  RowMatrix X = as_matrix(features);
  RowMatrix Y = as_matrix(targets);
  const Index n = X.rows(), d = X.cols(), p = Y.cols();
  if (n < 1) throw UsageError("ridge_fit needs at least one sample");
  if (Y.rows() != n) throw DimensionError("features and targets have different sample counts");

  const Eigen::RowVectorXd mx = X.colwise().mean();
  const Eigen::RowVectorXd my = Y.colwise().mean();
  X.rowwise() -= mx;
  Y.rowwise() -= my;
  Eigen::MatrixXd A = X.transpose() * X;
  A.diagonal().array() += alpha;
  const Eigen::MatrixXd rhs = X.transpose() * Y;

  Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
  const bool singular =
      ldlt.info() != Eigen::Success || (alpha == 0.0 && (n <= d || !(ldlt.rcond() > 1e-13)));
  if (singular) {
    throw ConditioningError("ridge normal equations are singular (" + std::to_string(n) + " samples, " +
                            std::to_string(d) + " features, alpha " + std::to_string(alpha) +
                            "); use alpha > 0");
  }
  ForecastHead head;
  head.alpha = alpha;
  head.weight = Tensor(Shape{d, p});
  head.weight.matrix(d, p) = ldlt.solve(rhs);
  head.bias = Tensor(Shape{p});
  head.bias.vec() = (my - mx * head.weight.matrix(d, p)).transpose();
  return head;
}

double alpha_select(const Tensor& train_x, const Tensor& train_y, const Tensor& val_x, const Tensor& val_y,
                    const std::vector<double>& grid) {
  if (grid.empty()) throw UsageError("alpha grid is empty");
  if (val_x.rank() != 2 || val_x.dim(0) == 0) throw UsageError("validation set is empty");
  double best_alpha = grid.front();
  double best_mse = std::numeric_limits<double>::infinity();
  for (double a : grid) {
    const double mse = score(ridge_fit(train_x, train_y, a).predict(val_x), val_y).mse;
    if (mse < best_mse || (mse == best_mse && a > best_alpha)) {
      best_mse = mse;
      best_alpha = a;
    }
  }
  return best_alpha;
}

ErrorMetrics score(const Tensor& predictions, const Tensor& targets) {
  if (predictions.shape() != targets.shape()) {
    throw DimensionError("predictions " + shape_str(predictions.shape()) + " vs targets " +
                         shape_str(targets.shape()));
  }
  if (targets.size() == 0) throw UsageError("no values to score");
  const auto diff = (predictions.vec() - targets.vec()).array();
  return {diff.square().mean(), diff.abs().mean(), targets.size()};
}

Tensor persistence_predictions(const std::vector<ForecastSample>& samples) {
  Tensor y = flatten_targets(samples);
  for (Index i = 0; i < static_cast<Index>(samples.size()); ++i) {
    const Tensor& w = samples[i].window;
    const Index T = w.dim(0), C = w.dim(1);
    const Index P = samples[i].target.dim(0);
    for (Index s = 0; s < P; ++s)
      for (Index c = 0; c < C; ++c) y.at({i, s * C + c}) = w.at({T - 1, c});
  }
  return y;
}

ErrorMetrics persistence_baseline(const std::vector<ForecastSample>& samples) {
  if (samples.empty()) throw UsageError("no samples for the persistence baseline");
  return score(persistence_predictions(samples), flatten_targets(samples));
}

double kolmogorov_sf(double x) {
  if (!(x > 0.0)) return 1.0;
  double p;
  if (x < 1.18) {
    // 1 - sqrt(2 pi)/x * sum_k exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double f = -std::numbers::pi * std::numbers::pi / (8.0 * x * x);
    double s = 0.0;
    for (int k = 1; k <= 8; ++k) s += std::exp(f * (2 * k - 1) * (2 * k - 1));
    p = 1.0 - std::sqrt(2.0 * std::numbers::pi) / x * s;
  } else {
    // 2 sum_k (-1)^(k-1) exp(-2 k^2 x^2)
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::exp(-2.0 * k * k * x * x);
      s += (k % 2 ? term : -term);
      if (term < 1e-300) break;
    }
    p = 2.0 * s;
  }
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_test(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw UsageError("K-S test needs two non-empty samples");
  for (const auto* s : {&a, &b})
    for (double v : *s)
      if (!std::isfinite(v)) throw NumericError("K-S test sample contains a non-finite value");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  return {d, kolmogorov_sf(std::sqrt(ne) * d)};
}

MetricsReport evaluate(const ForecastHead& head, const TeacherStudentState& state,
                       const std::vector<ForecastSample>& test, const NormStats* norm) {
  if (test.empty()) throw UsageError("test set is empty");
  const Tensor pred = head.predict(encode_windows(state, test));
  const Tensor truth = flatten_targets(test);
  MetricsReport r;
  r.horizon = test.front().target.dim(0);
  r.alpha = head.alpha;
  r.n_test = static_cast<Index>(test.size());
  const ErrorMetrics m = score(pred, truth);
  r.mse = m.mse;
  r.mae = m.mae;
  const ErrorMetrics base = persistence_baseline(test);
  r.baseline_mse = base.mse;
  r.baseline_mae = base.mae;

  std::vector<double> inputs;
  inputs.reserve(test.size() * test.front().window.size());
  for (const auto& s : test) inputs.insert(inputs.end(), s.window.data(), s.window.data() + s.window.size());
  const KsResult ks = ks_test(std::move(inputs), std::vector<double>(pred.data(), pred.data() + pred.size()));
  r.ks_statistic = ks.statistic;
  r.ks_p = ks.p_value;

  if (norm) {
    const Index C = test.front().target.dim(1);
    const Shape s3{pred.dim(0), r.horizon, C};
    r.denormalized = score(denormalize(*norm, pred.reshaped(s3)), denormalize(*norm, truth.reshaped(s3)));
  }
  return r;
}

MetricsReport run_forecast(const TeacherStudentState& state, const SeriesDataset& ds, Index lookback, Index horizon,
                           const std::vector<double>& grid) {
  if (ds.channels() != state.dims.input_channels) {
    throw DimensionError("dataset has " + std::to_string(ds.channels()) + " channels, checkpoint expects " +
                         std::to_string(state.dims.input_channels));
  }
  std::vector<ForecastSample> sets[3];
  for (Split s : {Split::train, Split::val, Split::test}) {
    try {
      sets[static_cast<int>(s)] = make_forecast_samples(ds, lookback, horizon, s);
    } catch (const SizingError& e) {
      throw SizingError("horizon " + std::to_string(horizon) + ": " + e.what());
    }
  }
  const auto& [train, val, test] = sets;
  const Tensor xt = encode_windows(state, train), yt = flatten_targets(train);
  const Tensor xv = encode_windows(state, val), yv = flatten_targets(val);
  const double alpha = alpha_select(xt, yt, xv, yv, grid);
  MetricsReport r = evaluate(ridge_fit(xt, yt, alpha), state, test, ds.norm ? &*ds.norm : nullptr);
  r.n_train = static_cast<Index>(train.size());
  r.n_val = static_cast<Index>(val.size());
  return r;
}

std::string metrics_json(const MetricsReport& r) {
  nlohmann::ordered_json j{{"horizon", r.horizon},
                           {"mse", r.mse},
                           {"mae", r.mae},
                           {"alpha", r.alpha},
                           {"ks_statistic", r.ks_statistic},
                           {"ks_p", r.ks_p},
                           {"n_train", r.n_train},
                           {"n_val", r.n_val},
                           {"n_test", r.n_test},
                           {"baseline_mse", r.baseline_mse},
                           {"baseline_mae", r.baseline_mae}};
  if (r.denormalized) {
    j["denormalized"] = {{"mse", r.denormalized->mse}, {"mae", r.denormalized->mae}};
  }
  return j.dump(2) + "\n";
}

MetricsReport parse_metrics_json(const std::string& text) {
  try {
    const auto j = nlohmann::json::parse(text);
    MetricsReport r;
    r.horizon = j.at("horizon").get<Index>();
    r.mse = j.at("mse").get<double>();
    r.mae = j.at("mae").get<double>();
    r.alpha = j.at("alpha").get<double>();
    r.ks_statistic = j.at("ks_statistic").get<double>();
    r.ks_p = j.at("ks_p").get<double>();
    r.n_train = j.at("n_train").get<Index>();
    r.n_val = j.at("n_val").get<Index>();
    r.n_test = j.at("n_test").get<Index>();
    r.baseline_mse = j.at("baseline_mse").get<double>();
    r.baseline_mae = j.at("baseline_mae").get<double>();
    if (j.contains("denormalized")) {
      const auto& d = j.at("denormalized");
      r.denormalized = ErrorMetrics{d.at("mse").get<double>(), d.at("mae").get<double>(), 0};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(std::string("malformed metrics JSON: ") + e.what());
  }
}

}  // namespace tsrep
