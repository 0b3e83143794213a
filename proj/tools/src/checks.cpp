// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>

#include "app.hpp"
#include "treeshrink/model.hpp"
#include "treeshrink/randmath.hpp"

namespace treeshrink::app {

namespace {

CheckResult make(std::string name, double tolerance, double value) {
  return {std::move(name), tolerance, value, std::isfinite(value) && value < tolerance};
}

double roundtrip_error(const Transform& t, RngHandle& rng, int images) {
  std::vector<double> f(t.size()), x(t.size()), g(t.size());
  double worst = 0.0;
  for (int k = 0; k < images; ++k) {
    for (double& v : f) v = rng.uniform();
    t.analyze(f, x);
    t.synthesize(x, g);
    for (std::size_t i = 0; i < f.size(); ++i) worst = std::max(worst, std::abs(f[i] - g[i]));
  }
  return worst;
}

double orthonormality_error(const Transform& t) {
  const std::size_t n = t.size();
  const std::vector<double> m = dense_synthesis_matrix(t);  // column-major, column k = T e_k
  double worst = 0.0;
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a; b < n; ++b) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += m[a * n + i] * m[b * n + i];
      worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
    }
  }
  return worst;
}

double adjointness_error(const SensingOperator& op, RngHandle& rng) {
  std::vector<double> x(op.n()), r(op.m());
  for (double& v : x) v = rng.normal();
  for (double& v : r) v = rng.normal();
  const std::vector<double> px = op.apply_psi(x);
  const std::vector<double> pr = op.apply_psi_adjoint(r);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) lhs += px[i] * r[i];
  for (std::size_t k = 0; k < x.size(); ++k) rhs += x[k] * pr[k];
  return std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
}

}  // namespace

std::vector<CheckResult> run_checks(const CheckOptions& options) {
  std::vector<CheckResult> out;
  RngHandle rng(20260101, 0);

  const auto w64 = std::make_shared<const TreeLayout>(TreeLayout::wavelet(64, 64, 3));
  const auto c64 = std::make_shared<const TreeLayout>(TreeLayout::block_dct(64, 64));
  const auto w16 = std::make_shared<const TreeLayout>(TreeLayout::wavelet(16, 16, 2));
  const auto c16 = std::make_shared<const TreeLayout>(TreeLayout::block_dct(16, 16));

  out.push_back(make("dwt2 roundtrip 64x64 (20 images)", 1e-10, roundtrip_error(Transform(w64, options.filter), rng, 20)));
  out.push_back(make("bdct roundtrip 64x64 (20 images)", 1e-10, roundtrip_error(Transform(c64), rng, 20)));
  out.push_back(make("dwt2 orthonormality 16x16", 1e-10, orthonormality_error(Transform(w16, options.filter))));
  out.push_back(make("bdct orthonormality 16x16", 1e-10, orthonormality_error(Transform(c16))));

  {
    RngHandle hrng(7, 0);
    const SensingOperator dense = make_gaussian_operator(100, 256, Transform(w16, options.filter), hrng);
    out.push_back(make("dense operator adjointness", 1e-10, adjointness_error(dense, rng)));
    const SensingOperator ident = SensingOperator::identity(Transform(w16, options.filter));
    out.push_back(make("identity operator adjointness", 1e-10, adjointness_error(ident, rng)));
  }

  {
    double worst = 0.0;
    for (double p : {0.0, 0.3, 1.5, 4.25})
      for (double x : {0.01, 0.7, 3.0, 40.0})
        worst = std::max(worst, std::abs(bessel_k(p, x) - bessel_k(-p, x)) / bessel_k(p, x));
    out.push_back(make("bessel_k symmetry K_p = K_-p", 1e-12, worst));
  }
  {
    double worst = 0.0;
    for (double x : {0.05, 1.0, 5.0, 30.0}) {
      const double exact = std::sqrt(std::numbers::pi / (2.0 * x)) * std::exp(-x);
      worst = std::max(worst, std::abs(bessel_k(0.5, x) - exact) / exact);
    }
    out.push_back(make("bessel_k half-order closed form", 1e-12, worst));
  }
  out.push_back(make("gig_mean(2, 2, 1/2) = 1.5", 1e-12, std::abs(gig_mean({2.0, 2.0, 0.5}) - 1.5)));
  out.push_back(make("gig_mode(2, 2, 1) = 1", 1e-12, std::abs(gig_mode({2.0, 2.0, 1.0}) - 1.0)));

  {
    // Prior concentrations telescope: every normalized level sums to one.
    const Hyperparameters hyper;
    const ShrinkageState s = prior_draw_tree(w64, hyper, rng);
    double worst = 0.0;
    for (std::size_t g = 0; g < w64->groups().size(); ++g) {
      double sum = 0.0;
      for (double v : s.group_span(s.gamma_tilde, g)) sum += v;
      worst = std::max(worst, std::abs(sum - 1.0));
    }
    out.push_back(make("gamma_tilde simplex per level", 1e-12, worst));
  }
  return out;
}

void print_checks(std::ostream& out, const std::vector<CheckResult>& results) {
  std::size_t failed = 0;
  for (const auto& r : results) {
    out << (r.passed ? "PASS  " : "FAIL  ") << std::left << std::setw(40) << r.name << " value "
        << std::scientific << std::setprecision(3) << r.value << "  tol " << r.tolerance << '\n';
    failed += r.passed ? 0 : 1;
  }
  out << std::defaultfloat << results.size() - failed << '/' << results.size() << " checks passed\n";
}

}  // namespace treeshrink::app
