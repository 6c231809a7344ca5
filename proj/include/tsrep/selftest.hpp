#pragma once

#include <string>
#include <vector>

#include "tsrep/gradcheck.hpp"

namespace tsrep {

/// A differentiable expression and the point at which to check it.
struct GradientCase {
  std::string name;
  Objective objective;
  ParamSet point;
};

/// One case per differentiable op, plus the joint loss of a tiny model
/// (B = 2, crop 16, C = 3, K = 8, Q = 3).
std::vector<GradientCase> gradient_cases(std::uint64_t seed = 1);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  /// Name of a check whose computation is deliberately corrupted
  /// ("grad:<case>" for a gradient case). Test hook only.
  std::string inject_fault;
};

/// Gradient checks, loss oracles, EMA and centering invariants, ridge and
/// K-S oracles, causality. One row per check.
std::vector<CheckResult> run_selftest(const SelftestOptions& options = {});

/// Fixed-width table of results.
std::string format_results(const std::vector<CheckResult>& results);

}  // namespace tsrep
