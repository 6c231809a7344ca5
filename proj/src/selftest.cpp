#include "tsrep/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>

#include "tsrep/forecast.hpp"
#include "tsrep/loss.hpp"
#include "tsrep/model.hpp"
#include "tsrep/ops.hpp"
#include "tsrep/verify.hpp"

namespace tsrep {

namespace {

Tensor normal(Rng& rng, Shape shape, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

Var P(Tape& t, const ParamSet& q, const char* n) { return t.parameter(n, q.at(n)); }

// Restrict a shared point to the entries an objective actually reads.
ParamSet used_by(const Objective& f, const ParamSet& all) {
  Tape probe;
  f(probe, all);
  ParamSet used;
  for (const auto& [n, _] : probe.parameters()) used.add(n, all.at(n));
  return used;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

template <class F>
CheckResult timed(const std::string& name, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  CheckResult r{name, false, "", 0.0};
  try {
    body(r);
  } catch (const std::exception& e) {
    r.passed = false;
    r.detail = std::string("exception: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

}  // namespace

std::vector<GradientCase> gradient_cases(std::uint64_t seed) {
  Rng rng(seed);
  ParamSet p;
  p.add("x", normal(rng, {2, 3, 6}));
  p.add("y", normal(rng, {2, 3, 6}));
  p.add("k", normal(rng, {3, 3, 2}, 0.5));
  p.add("kb", normal(rng, {3}));
  p.add("V", normal(rng, {6, 4}));
  p.add("g", normal(rng, {4}));
  p.add("b", normal(rng, {4}));

  std::vector<std::pair<std::string, Objective>> ops;
  ops.emplace_back("add_sub_mul_scale", [](Tape& t, const ParamSet& q) {
    return sum(mul(add(P(t, q, "x"), P(t, q, "y")), sub(P(t, q, "x"), scale(P(t, q, "y"), 0.3))));
  });
  ops.emplace_back("relu", [](Tape& t, const ParamSet& q) { return sum(mul(relu(P(t, q, "x")), P(t, q, "y"))); });
  ops.emplace_back("gelu", [](Tape& t, const ParamSet& q) { return sum(mul(gelu(P(t, q, "x")), P(t, q, "y"))); });
  ops.emplace_back("dilated_conv", [](Tape& t, const ParamSet& q) {
    return sum(mul(dilated_causal_conv1d(P(t, q, "x"), P(t, q, "k"), P(t, q, "kb"), 2), P(t, q, "y")));
  });
  ops.emplace_back("weight_norm_linear", [](Tape& t, const ParamSet& q) {
    Var w = weight_norm(P(t, q, "V"), P(t, q, "g"));
    return sum(mul(linear(P(t, q, "x"), w, P(t, q, "b")), linear(P(t, q, "y"), w)));
  });
  ops.emplace_back("l2_normalize", [](Tape& t, const ParamSet& q) {
    return sum(mul(l2_normalize(P(t, q, "x"), 2), P(t, q, "y")));
  });
  ops.emplace_back("softmax", [](Tape& t, const ParamSet& q) {
    return sum(mul(softmax(P(t, q, "x"), 1), P(t, q, "y")));
  });
  ops.emplace_back("log_softmax", [](Tape& t, const ParamSet& q) {
    return sum(mul(log_softmax(P(t, q, "x"), 2), P(t, q, "y")));
  });
  ops.emplace_back("slice_swap_mean", [](Tape& t, const ParamSet& q) {
    return mean(mul(swap_last_axes(slice(P(t, q, "x"), 2, 1, 4)), swap_last_axes(slice(P(t, q, "y"), 2, 2, 5))));
  });
  ops.emplace_back("info_nce", [](Tape& t, const ParamSet& q) {
    return info_nce(P(t, q, "x"), P(t, q, "y"), {.temperature = 0.7, .same_branch_negatives = false});
  });
  ops.emplace_back("info_nce_same_branch", [](Tape& t, const ParamSet& q) {
    return info_nce(P(t, q, "x"), P(t, q, "y"), {.temperature = 0.7, .same_branch_negatives = true});
  });
  const Tensor teacher = normal(rng, {2, 3, 6});
  ops.emplace_back("ssl_sl_losses", [teacher](Tape& t, const ParamSet& q) {
    Var b = P(t, q, "y");
    return add(ssl_loss(t.constant(teacher), b), sl_loss(t.constant(teacher), b));
  });

  std::vector<GradientCase> cases;
  for (auto& [name, f] : ops) cases.push_back({name, f, used_by(f, p)});

  // Joint loss through the whole model.
  ModelDims d;
  d.input_channels = 3;
  d.hidden = 6;
  d.repr = 8;
  d.width = 8;
  d.blocks = 3;
  d.kernel = 3;
  TeacherStudentState s = init_params(seed + 100, d);
  Tensor x = normal(rng, {2, 16, 3});
  Tensor ht = teacher_forward(s, x, 0.5, rng);
  update_center(s, ht);
  Tensor centered = apply_center(s, ht);
  Tensor masked = bernoulli_mask(x, 0.5, 1, rng);
  Objective joint = [d, ht, centered, masked](Tape& t, const ParamSet& q) {
    Var hs = represent(t, q, d, t.constant(masked));
    return joint_loss(ssl_loss(t.constant(ht), hs), sl_loss(t.constant(centered), hs), 0.5);
  };
  cases.push_back({"joint_loss_tiny_model", joint, s.student});
  return cases;
}

std::vector<CheckResult> run_selftest(const SelftestOptions& options) {
  std::vector<CheckResult> out;
  const std::string& fault = options.inject_fault;
  const double bump = 1e-3;
  const std::vector<GradientCase> cases = gradient_cases(options.seed);
  if (!fault.empty()) {
    std::vector<std::string> known{"ssl_oracle", "sl_oracle", "ema_contraction", "centering_shift",
                                   "ridge_oracle", "ks_oracle", "causality"};
    for (const auto& c : cases) known.push_back("grad:" + c.name);
    if (std::find(known.begin(), known.end(), fault) == known.end()) {
      std::string list;
      for (const auto& k : known) list += (list.empty() ? "" : ", ") + k;
      throw UsageError("unknown fault target '" + fault + "'; choose one of: " + list);
    }
  }

  for (const GradientCase& c : cases) {
    const std::string name = "grad:" + c.name;
    out.push_back(timed(name, [&](CheckResult& r) {
      GradCheckOptions go;
      if (fault == name) {
        go.corrupt_analytic = [](Gradients& g) {
          const std::string first = g.names().front();
          g.values(first)[0] += 1.0;
        };
      }
      const GradCheckReport rep = finite_diff_check(c.objective, c.point, go);
      r.passed = rep.max_rel_error < 1e-4;
      r.detail = "max rel err " + num(rep.max_rel_error) + " over " + std::to_string(rep.checked) + " entries";
    }));
  }

  Rng rng(options.seed);
  auto check = [&](const std::string& name, auto&& body) {
    out.push_back(timed(name, [&](CheckResult& r) { body(r, fault == name ? bump : 0.0); }));
  };

  check("ssl_oracle", [&](CheckResult& r, double err) {
    double worst = 0.0;
    for (Index B = 1; B <= 3; ++B)
      for (Index L = 2; L <= 4; ++L)
        for (Index K : {2, 5})
          for (int rep = 0; rep < 3; ++rep) {
            Tensor a = normal(rng, {B, L, K}), b = normal(rng, {B, L, K});
            Tape off(false);
            const double v = ssl_loss(off.constant(a), off.constant(b)).value().item() + err;
            worst = std::max(worst, std::abs(v - verify::brute_force_ssl(a, b)));
          }
    r.passed = worst < 1e-9;
    r.detail = "max abs diff " + num(worst);
  });

  check("sl_oracle", [&](CheckResult& r, double err) {
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      Tensor a = normal(rng, {2, 3, 2}), b = normal(rng, {2, 3, 2});
      Tape off(false);
      const double v = sl_loss(off.constant(a), off.constant(b)).value().item() + err;
      worst = std::max(worst, std::abs(v - verify::naive_sl(a, b)));
    }
    r.passed = worst < 1e-12;
    r.detail = "max abs diff " + num(worst);
  });

  check("ema_contraction", [&](CheckResult& r, double err) {
    ModelDims d;
    d.input_channels = 2;
    d.hidden = 4;
    d.repr = 4;
    d.width = 4;
    d.blocks = 1;
    TeacherStudentState s = init_params(options.seed, d, 0.999);
    for (const auto& n : s.student.names()) s.student.assign(n, normal(rng, s.student.at(n).shape()));
    const ParamSet t0 = s.teacher;
    for (int i = 0; i < 100; ++i) ema_update(s);
    const double factor = std::pow(0.999, 100);
    double worst = 0.0;
    for (const auto& [n, t] : s.teacher)
      for (Index k = 0; k < t.size(); ++k) {
        const double expect = factor * std::abs(t0.at(n)[k] - s.student.at(n)[k]);
        worst = std::max(worst, std::abs(std::abs(t[k] - s.student.at(n)[k]) - expect) + err);
      }
    r.passed = worst < 1e-12;
    r.detail = "max deviation " + num(worst);
  });

  check("centering_shift", [&](CheckResult& r, double err) {
    ModelDims d;
    d.repr = 5;
    TeacherStudentState s;
    s.dims = d;
    Tensor h = normal(rng, {3, 7, 5});
    Tensor shifted = h;
    Tensor u = normal(rng, {5}, 10.0);
    for (Index i = 0; i < 21; ++i)
      for (Index k = 0; k < 5; ++k) shifted[i * 5 + k] += u[k];
    update_center(s, h);
    Tensor c1 = apply_center(s, h);
    update_center(s, shifted);
    Tensor c2 = apply_center(s, shifted);
    Tape off(false);
    const double dp = max_abs_diff(softmax(off.constant(c1), 1).value(), softmax(off.constant(c2), 1).value());
    const double worst = std::max(max_abs_diff(c1, c2), dp) + err;
    r.passed = worst < 1e-12;
    r.detail = "max diff " + num(worst);
  });

  check("ridge_oracle", [&](CheckResult& r, double err) {
    double worst = 0.0;
    bool monotone = true;
    for (int rep = 0; rep < 10; ++rep) {
      Tensor x = normal(rng, {30, 6}), y = normal(rng, {30, 2});
      double prev = std::numeric_limits<double>::infinity();
      for (double a : kDefaultAlphaGrid) {
        ForecastHead h = ridge_fit(x, y, a);
        verify::RidgeReference ref = verify::ridge_gauss_jordan(x, y, a);
        worst = std::max({worst, max_abs_diff(h.weight, ref.weight) + err, max_abs_diff(h.bias, ref.bias)});
        const double norm = h.weight.vec().norm();
        monotone &= norm <= prev;
        prev = norm;
      }
    }
    r.passed = worst < 1e-8 && monotone;
    r.detail = "max abs diff " + num(worst) + (monotone ? ", norm path monotone" : ", norm path NOT monotone");
  });

  check("ks_oracle", [&](CheckResult& r, double err) {
    double worst = 0.0;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
      std::vector<double> a(50), b(70);
      for (auto& v : a) v = u(rng);
      for (auto& v : b) v = 0.2 + u(rng);
      worst = std::max(worst, std::abs(ks_test(a, b).statistic + err - verify::ks_statistic_pooled(a, b)));
    }
    const KsResult same = ks_test({1, 2, 3}, {1, 2, 3});
    r.passed = worst < 1e-12 && same.statistic == 0.0 && same.p_value == 1.0;
    r.detail = "max abs diff " + num(worst);
  });

  check("causality", [&](CheckResult& r, double err) {
    ModelDims d;
    d.input_channels = 2;
    d.hidden = 8;
    d.repr = 8;
    d.width = 8;
    d.blocks = 4;
    TeacherStudentState s = init_params(options.seed, d);
    const Index L = 24;
    Tensor x = normal(rng, {1, L, 2});
    Tape t0(false);
    const Tensor base = represent(t0, s.student, d, t0.constant(x)).value();
    std::uniform_int_distribution<Index> pos(0, L - 2);
    double leak = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      const Index p = pos(rng);
      Tensor xp = x;
      for (Index t = p + 1; t < L; ++t) xp.at({0, t, 0}) += 1.0;
      Tape t1(false);
      const Tensor h = represent(t1, s.student, d, t1.constant(xp)).value();
      for (Index t = 0; t <= p; ++t)
        for (Index k = 0; k < d.repr; ++k) leak = std::max(leak, std::abs(h.at({0, t, k}) - base.at({0, t, k})));
    }
    leak += err;
    r.passed = leak == 0.0;
    r.detail = "max past change " + num(leak);
  });

  return out;
}

std::string format_results(const std::vector<CheckResult>& results) {
  std::ostringstream os;
  std::size_t width = 5;
  for (const auto& r : results) width = std::max(width, r.name.size());
  char line[512];
  std::snprintf(line, sizeof line, "%-*s  %-6s %8s  %s\n", static_cast<int>(width), "check", "result", "seconds",
                "detail");
  os << line;
  int failed = 0;
  for (const auto& r : results) {
    std::snprintf(line, sizeof line, "%-*s  %-6s %8.3f  %s\n", static_cast<int>(width), r.name.c_str(),
                  r.passed ? "PASS" : "FAIL", r.seconds, r.detail.c_str());
    os << line;
    failed += !r.passed;
  }
  os << results.size() - failed << "/" << results.size() << " checks passed\n";
  return os.str();
}

}  // namespace tsrep
