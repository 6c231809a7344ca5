#pragma once

#include <vector>

#include "tsrep/loss.hpp"

// Reference implementations written as plain loops. They are slow and exist
// to cross-check the vectorised code in tests and in `selftest`.
namespace tsrep::verify {

/// Contrastive loss by enumerating every anchor and every negative.
double brute_force_ssl(const Tensor& h_t, const Tensor& h_s, const LossOptions& options = {});

/// -sum p_t log p_s with softmaxes written out term by term.
double naive_sl(const Tensor& h_t_centered, const Tensor& h_s, SoftLabelAxis axis = SoftLabelAxis::time);

/// Ridge solution of min |Y - X W - 1 b^T|^2 + alpha |W|^2 by forming the
/// centred normal equations and solving with Gauss-Jordan elimination and
/// partial pivoting. X is [n, d], Y is [n, p]; returns W [d, p] and b [p].
struct RidgeReference {
  Tensor weight;
  Tensor bias;
};
RidgeReference ridge_gauss_jordan(const Tensor& X, const Tensor& Y, double alpha);

/// Two-sample Kolmogorov-Smirnov statistic by evaluating both empirical CDFs
/// at every pooled sample point.
double ks_statistic_pooled(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace tsrep::verify
