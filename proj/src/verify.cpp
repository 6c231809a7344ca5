#include "tsrep/verify.hpp"

#include <algorithm>
#include <cmath>

namespace tsrep::verify {

namespace {

double dot(const Tensor& a, Index i, Index t, const Tensor& b, Index j, Index u) {
  const Index K = a.dim(2);
  double s = 0.0;
  for (Index k = 0; k < K; ++k) s += a.at({i, t, k}) * b.at({j, u, k});
  return s;
}

// Mean over anchors of -log(exp(pos) / (exp(pos) + sum exp(neg))).
double one_direction(const Tensor& anchor, const Tensor& other, const LossOptions& o) {
  const Index B = anchor.dim(0), L = anchor.dim(1);
  const double tau = o.temperature;
  double total = 0.0;
  for (Index i = 0; i < B; ++i) {
    for (Index t = 0; t < L; ++t) {
      std::vector<double> logits;
      const double pos = dot(anchor, i, t, other, i, t) / tau;
      logits.push_back(pos);
      for (Index j = 0; j < B; ++j)
        if (j != i) logits.push_back(dot(anchor, i, t, other, j, t) / tau);
      for (Index u = 0; u < L; ++u)
        if (u != t) logits.push_back(dot(anchor, i, t, other, i, u) / tau);
      if (o.same_branch_negatives) {
        for (Index j = 0; j < B; ++j)
          if (j != i) logits.push_back(dot(anchor, i, t, anchor, j, t) / tau);
        for (Index u = 0; u < L; ++u)
          if (u != t) logits.push_back(dot(anchor, i, t, anchor, i, u) / tau);
      }
      const double top = *std::max_element(logits.begin(), logits.end());
      double denom = 0.0;
      for (double z : logits) denom += std::exp(z - top);
      total += -(pos - top - std::log(denom));
    }
  }
  return total / static_cast<double>(B * L);
}

}  // namespace

double brute_force_ssl(const Tensor& h_t, const Tensor& h_s, const LossOptions& options) {
  return 0.5 * (one_direction(h_t, h_s, options) + one_direction(h_s, h_t, options));
}

double naive_sl(const Tensor& h_t, const Tensor& h_s, SoftLabelAxis axis) {
  const Index B = h_s.dim(0), L = h_s.dim(1), K = h_s.dim(2);
  const bool over_time = axis == SoftLabelAxis::time;
  const Index outer = over_time ? K : L;
  const Index inner = over_time ? L : K;
  auto at = [&](const Tensor& x, Index b, Index o, Index n) {
    return over_time ? x.at({b, n, o}) : x.at({b, o, n});
  };
  double total = 0.0;
  for (Index b = 0; b < B; ++b) {
    for (Index o = 0; o < outer; ++o) {
      double zt = 0.0, zs = 0.0;
      for (Index n = 0; n < inner; ++n) {
        zt += std::exp(at(h_t, b, o, n));
        zs += std::exp(at(h_s, b, o, n));
      }
      for (Index n = 0; n < inner; ++n) {
        const double pt = std::exp(at(h_t, b, o, n)) / zt;
        const double ps = std::exp(at(h_s, b, o, n)) / zs;
        total -= pt * std::log(ps);
      }
    }
  }
  return total / static_cast<double>(B * outer);
}

RidgeReference ridge_gauss_jordan(const Tensor& X, const Tensor& Y, double alpha) {
  const Index n = X.dim(0), d = X.dim(1), p = Y.dim(1);
  std::vector<double> mx(d, 0.0), my(p, 0.0);
  for (Index r = 0; r < n; ++r) {
    for (Index c = 0; c < d; ++c) mx[c] += X.at({r, c}) / static_cast<double>(n);
    for (Index c = 0; c < p; ++c) my[c] += Y.at({r, c}) / static_cast<double>(n);
  }
  // Augmented system [X'X + alpha I | X'Y] on centred data.
  const Index w = d + p;
  std::vector<double> A(d * w, 0.0);
  for (Index r = 0; r < n; ++r) {
    for (Index a = 0; a < d; ++a) {
      const double xa = X.at({r, a}) - mx[a];
      for (Index b = 0; b < d; ++b) A[a * w + b] += xa * (X.at({r, b}) - mx[b]);
      for (Index c = 0; c < p; ++c) A[a * w + d + c] += xa * (Y.at({r, c}) - my[c]);
    }
  }
  for (Index a = 0; a < d; ++a) A[a * w + a] += alpha;
  for (Index col = 0; col < d; ++col) {
    Index piv = col;
    for (Index r = col + 1; r < d; ++r)
      if (std::abs(A[r * w + col]) > std::abs(A[piv * w + col])) piv = r;
    if (std::abs(A[piv * w + col]) < 1e-300) throw ConditioningError("reference ridge system is singular");
    for (Index c = 0; c < w; ++c) std::swap(A[col * w + c], A[piv * w + c]);
    const double inv = 1.0 / A[col * w + col];
    for (Index c = 0; c < w; ++c) A[col * w + c] *= inv;
    for (Index r = 0; r < d; ++r) {
      if (r == col) continue;
      const double f = A[r * w + col];
      if (f == 0.0) continue;
      for (Index c = 0; c < w; ++c) A[r * w + c] -= f * A[col * w + c];
    }
  }
  RidgeReference out{Tensor(Shape{d, p}), Tensor(Shape{p})};
  for (Index a = 0; a < d; ++a)
    for (Index c = 0; c < p; ++c) out.weight.at({a, c}) = A[a * w + d + c];
  for (Index c = 0; c < p; ++c) {
    double b = my[c];
    for (Index a = 0; a < d; ++a) b -= mx[a] * out.weight.at({a, c});
    out.bias[c] = b;
  }
  return out;
}

double ks_statistic_pooled(const std::vector<double>& a, const std::vector<double>& b) {
  auto ecdf = [](const std::vector<double>& s, double x) {
    Index count = 0;
    for (double v : s) count += v <= x;
    return static_cast<double>(count) / static_cast<double>(s.size());
  };
  double d = 0.0;
  for (const auto* s : {&a, &b})
    for (double x : *s) d = std::max(d, std::abs(ecdf(a, x) - ecdf(b, x)));
  return d;
}

}  // namespace tsrep::verify
