// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "treeshrink/randmath.hpp"

namespace treeshrink {
namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

template <class Draw>
Moments moments(int n, Draw draw) {
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double v = draw();
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, s2 / n - m * m};
}

TEST(Rng, SameSeedAndStreamReproduce) {
  RngHandle a(42, 3), b(42, 3);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
  RngHandle c(42, 3), d(42, 3);
  for (int i = 0; i < 200; ++i) {
    ASSERT_EQ(sample_gamma(0.01, 1.0, c), sample_gamma(0.01, 1.0, d));
    ASSERT_EQ(sample_gig({2.0, 0.3, -1.7}, c), sample_gig({2.0, 0.3, -1.7}, d));
  }
}

TEST(Rng, DistinctStreamsAreUncorrelated) {
  RngHandle a(42, 0), b(42, 1);
  const int n = 100000;
  double sab = 0.0;
  int equal = 0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal(), y = b.normal();
    sab += x * y;
    equal += x == y;
  }
  EXPECT_EQ(equal, 0);
  EXPECT_LT(std::abs(sab / n), 4.0 / std::sqrt(n));
}

TEST(Rng, UniformIsOpenInterval) {
  RngHandle r(1);
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    ASSERT_GT(u, 0.0);
    ASSERT_LT(u, 1.0);
  }
  for (int i = 0; i < 1000; ++i) ASSERT_LT(r.below(7), 7u);
}

TEST(Gamma, UnitShapeMean) {
  RngHandle r(5);
  EXPECT_NEAR(moments(100000, [&] { return sample_gamma(1.0, 1.0, r); }).mean, 1.0, 0.02);
}

TEST(Gamma, TinyShapeMeanAndMassBelowThreshold) {
  RngHandle r(6);
  const int n = 100000;
  int below = 0;
  double s = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = sample_gamma(1.0 / 64.0, 1.0, r);
    ASSERT_GT(g, 0.0);
    s += g;
    below += g < 0.05;
  }
  EXPECT_NEAR(s / n, 1.0 / 64.0, 0.1 / 64.0);
  // Regularized lower incomplete gamma P(1/64, 0.05), evaluated offline.
  const double mass = 0.96199257798992822;
  EXPECT_GE(static_cast<double>(below) / n, 0.95);
  EXPECT_NEAR(static_cast<double>(below) / n, mass, 4.0 * std::sqrt(mass * (1 - mass) / n));
}

TEST(Gamma, ExtremelySmallShapeStaysFiniteInLogSpace) {
  RngHandle r(7);
  double s = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const double lg = sample_log_gamma(1e-4, 1.0, r);
    ASSERT_TRUE(std::isfinite(lg));
    s += lg;
  }
  // E[log G] = digamma(k) ~ -1/k for tiny k; the spread is also ~1/k.
  EXPECT_NEAR(s / n / -1e4, 1.0, 0.05);
}

TEST(Gamma, RateScalesAndMomentsMatch) {
  RngHandle r(8);
  const Moments m = moments(100000, [&] { return sample_gamma(3.0, 2.0, r); });
  EXPECT_NEAR(m.mean, 1.5, 0.015);
  EXPECT_NEAR(m.var, 0.75, 0.02);
}

TEST(Gamma, RejectsBadParameters) {
  RngHandle r(1);
  EXPECT_THROW(sample_gamma(0.0, 1.0, r), std::invalid_argument);
  EXPECT_THROW(sample_gamma(1.0, -1.0, r), std::invalid_argument);
  EXPECT_THROW(sample_inverse_gamma(1.0, 0.0, r), std::invalid_argument);
}

TEST(InverseGamma, UnitShapeMedian) {
  // 1/X ~ Exp(rate s), so P(X <= t) = exp(-s/t) and the median is s/ln 2.
  RngHandle r(9);
  const double s = 0.7;
  std::vector<double> v(100001);
  for (double& x : v) x = sample_inverse_gamma(1.0, s, r);
  std::nth_element(v.begin(), v.begin() + 50000, v.end());
  EXPECT_NEAR(v[50000] / (s / std::numbers::ln2), 1.0, 0.02);
}

TEST(InverseGamma, MeanAndReciprocalMoments) {
  RngHandle r(10);
  // Heavy tail (infinite variance at shape 2): use the median of batch means.
  std::vector<double> batch(21);
  for (double& b : batch) b = moments(20000, [&] { return sample_inverse_gamma(2.0, 1.0, r); }).mean;
  std::nth_element(batch.begin(), batch.begin() + 10, batch.end());
  EXPECT_NEAR(batch[10], 1.0, 0.02);
  const Moments m = moments(100000, [&] { return 1.0 / sample_inverse_gamma(3.0, 2.0, r); });
  EXPECT_NEAR(m.mean, 1.5, 0.03);
  EXPECT_NEAR(m.var, 0.75, 0.015);
}

TEST(Dirichlet, SymmetricPairMean) {
  RngHandle r(11);
  const std::vector<double> c{1.0, 1.0};
  EXPECT_NEAR(moments(100000, [&] { return sample_dirichlet(c, r)[0]; }).mean, 0.5, 0.01);
}

TEST(Dirichlet, SparseConcentrationsStayOnSimplex) {
  RngHandle r(12);
  const std::vector<double> c(64, 1.0 / 64.0);
  std::vector<double> mean(64, 0.0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto d = sample_dirichlet(c, r);
    double sum = 0.0;
    for (std::size_t k = 0; k < 64; ++k) {
      ASSERT_GE(d[k], 0.0);
      sum += d[k];
      mean[k] += d[k] / n;
    }
    ASSERT_NEAR(sum, 1.0, 1e-12);
  }
  for (double m : mean) EXPECT_NEAR(m, 1.0 / 64.0, 0.1 / 64.0);
}

TEST(Dirichlet, DegenerateAndInvalid) {
  RngHandle r(13);
  EXPECT_EQ(sample_dirichlet(std::vector<double>{2.5}, r), std::vector<double>{1.0});
  EXPECT_THROW(sample_dirichlet(std::vector<double>{1.0, 0.0}, r), std::invalid_argument);
}

TEST(Bessel, FrozenValues) {
  // Arbitrary-precision reference values.
  struct Case {
    double p, x, k, logk;
  };
  const Case cases[] = {
      {0.5, 1.0, 0.46106850444789456, std::log(0.46106850444789456)},
      {1.0, 1.0, 0.60190723019723457, std::log(0.60190723019723457)},
      {0.0, 0.1, 2.4270690247020166, 0.88668436667874213},
      {2.5, 3.0, 0.084060631974117383, -2.4762169313021238},
      {-7.3, 0.02, 2.5307741555869154e17, 40.072471827183265},
      {30.0, 1e-6, 4.7468848252659376e219, 505.82362394233464},
      {30.0, 100.0, 3.9706020559593987e-43, -97.632241264167609},
      {0.25, 50.0, 3.4122788875748856e-23, -51.7320767753011},
      {12.0, 7.0, 2.0465011076576633, 0.71613155819506217},
  };
  for (const Case& c : cases) {
    EXPECT_NEAR(bessel_k(c.p, c.x) / c.k, 1.0, 1e-8) << c.p << ' ' << c.x;
    EXPECT_NEAR(log_bessel_k(c.p, c.x), c.logk, 1e-8 * std::max(1.0, std::abs(c.logk))) << c.p << ' ' << c.x;
  }
}

TEST(Bessel, OrderSymmetry) {
  for (auto [p, x] : {std::pair{0.3, 2.0}, std::pair{1.7, 0.5}})
    EXPECT_NEAR(bessel_k(p, x) / bessel_k(-p, x), 1.0, 1e-12);
}

TEST(Bessel, UpwardRecurrence) {
  // K_{p+1}(x) = K_{p-1}(x) + (2p/x) K_p(x)
  for (double p : {-3.4, 0.2, 1.0, 6.5})
    for (double x : {0.01, 0.9, 12.0}) {
      const double lhs = bessel_k(p + 1, x);
      const double a = bessel_k(p - 1, x), b = 2.0 * p / x * bessel_k(p, x);
      EXPECT_NEAR(lhs, a + b, 1e-8 * (std::abs(a) + std::abs(b))) << p << ' ' << x;
    }
}

TEST(Bessel, RejectsNonPositiveArgument) {
  EXPECT_THROW(bessel_k(1.0, 0.0), std::invalid_argument);
  EXPECT_THROW(log_bessel_k(1.0, -2.0), std::invalid_argument);
}

TEST(Gig, HalfOrderMean) {
  EXPECT_NEAR(gig_mean({2.0, 2.0, 0.5}), 1.5, 1e-12);
  RngHandle r(14);
  EXPECT_NEAR(moments(100000, [&] { return sample_gig({2.0, 2.0, 0.5}, r); }).mean / 1.5, 1.0, 0.02);
}

TEST(Gig, NegativeHalfOrderMean) {
  EXPECT_NEAR(gig_mean({2.0, 1.0, -0.5}), std::sqrt(0.5), 1e-12);
  RngHandle r(15);
  EXPECT_NEAR(moments(100000, [&] { return sample_gig({2.0, 1.0, -0.5}, r); }).mean / std::sqrt(0.5), 1.0, 0.02);
}

TEST(Gig, MeansAgainstQuadrature) {
  EXPECT_NEAR(gig_mean({3.0, 0.5, 1.7}), 1.3347223234202111, 1e-10);
  EXPECT_NEAR(gig_mean({0.5, 4.0, -2.2}), 1.1878152969947331, 1e-10);
}

TEST(Gig, ModeClosedForm) {
  EXPECT_NEAR(gig_mode({2.0, 2.0, 1.0}), 1.0, 1e-14);
  for (double eta : {-3.0, -0.5, 0.0, 2.0})
    for (double b : {0.01, 2.0, 9.0})
      EXPECT_NEAR(gig_mode({2.0, b, eta + 1.0}), (eta + std::sqrt(eta * eta + 2.0 * b)) / 2.0, 1e-12);
}

TEST(Gig, InverseGaussianSpecialCase) {
  // p = -1/2: inverse Gaussian with mean sqrt(b/a) and shape b.
  const double a = 0.8, b = 3.0;
  const double mu = std::sqrt(b / a);
  RngHandle r(16);
  const Moments m = moments(100000, [&] { return sample_gig({a, b, -0.5}, r); });
  EXPECT_NEAR(m.mean / mu, 1.0, 0.02);
  EXPECT_NEAR(m.var / (mu * mu * mu / b), 1.0, 0.03);
}

// Trapezoid CDF of the density on a log grid, normalized numerically.
double cdf_sup_distance(const GigParams& g, std::vector<double> draws) {
  std::sort(draws.begin(), draws.end());
  const double lo = std::log(draws.front()) - 2.0, hi = std::log(draws.back()) + 2.0;
  const int cells = 20000;
  const double h = (hi - lo) / cells;
  auto f = [&](double t) {
    const double x = std::exp(t);
    return std::exp(g.p * t - 0.5 * (g.a * x + g.b / x));  // x * density in log-x
  };
  std::vector<double> grid(cells + 1), cdf(cells + 1, 0.0);
  double peak = -1e300;
  for (int i = 0; i <= cells; ++i) {
    grid[i] = lo + i * h;
    const double x = std::exp(grid[i]);
    peak = std::max(peak, g.p * grid[i] - 0.5 * (g.a * x + g.b / x));
  }
  auto fs = [&](double t) { return f(t) * std::exp(-peak); };
  for (int i = 1; i <= cells; ++i) cdf[i] = cdf[i - 1] + 0.5 * h * (fs(grid[i - 1]) + fs(grid[i]));
  for (double& c : cdf) c /= cdf.back();
  double sup = 0.0;
  const double n = static_cast<double>(draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const double t = std::log(draws[k]);
    const auto i = static_cast<std::size_t>(std::clamp((t - lo) / h, 0.0, cells - 1.0));
    const double frac = (t - grid[i]) / h;
    const double model = cdf[i] + frac * (cdf[i + 1] - cdf[i]);
    sup = std::max({sup, std::abs(model - k / n), std::abs(model - (k + 1) / n)});
  }
  return sup;
}

TEST(Gig, EmpiricalCdfMatchesQuadrature) {
  RngHandle r(17);
  for (const GigParams& g : {GigParams{2.0, 2.0, 0.5}, GigParams{1.0, 3.0, -2.5}, GigParams{2.0, 0.01, 1.0 / 64.0 - 1.0},
                             GigParams{0.05, 40.0, 3.0}, GigParams{2.0, 1e-4, -1.0 + 1e-3}}) {
    std::vector<double> v(100000);
    for (double& x : v) x = sample_gig(g, r);
    EXPECT_LT(cdf_sup_distance(g, v), 0.01) << g.a << ' ' << g.b << ' ' << g.p;
  }
}

TEST(Gig, MomentsAndModeConsistentOnParameterGrid) {
  RngHandle r(18);
  const double as[] = {0.1, 2.0};
  const double bs[] = {0.05, 1.0};
  const double ps[] = {-3.0, -0.9, -0.5, 0.4, 2.5};
  int cases = 0;
  for (double a : as)
    for (double b : bs)
      for (double p : ps) {
        const GigParams g{a, b, p};
        ++cases;
        const int n = 100000;
        const Moments m = moments(n, [&] { return sample_gig(g, r); });
        const double mean = gig_mean(g);
        EXPECT_NEAR(m.mean, mean, std::max(0.01 * mean, 5.0 * std::sqrt(m.var / n))) << a << ' ' << b << ' ' << p;
        RngHandle r2(19 + cases);
        const Moments inv = moments(n, [&] { return 1.0 / sample_gig(g, r2); });
        EXPECT_NEAR(inv.mean, gig_inverse_mean(g), std::max(0.01 * inv.mean, 5.0 * std::sqrt(inv.var / n)));
        // The mode maximizes the log density.
        const double mode = gig_mode(g);
        const double at = gig_log_density(mode, g);
        EXPECT_GE(at, gig_log_density(mode * 1.01, g));
        EXPECT_GE(at, gig_log_density(mode * 0.99, g));
        // The density integrates to one.
        double integral = 0.0;
        const double lo = -25.0, hi = 12.0, h = 1e-3;
        for (double t = lo; t < hi; t += h) integral += h * std::exp(t + gig_log_density(std::exp(t + h / 2), g) + h / 2);
        EXPECT_NEAR(integral, 1.0, 1e-4) << a << ' ' << b << ' ' << p;
      }
  EXPECT_EQ(cases, 20);
}

TEST(Gig, RejectsInvalidParameters) {
  RngHandle r(1);
  EXPECT_THROW(sample_gig({0.0, 1.0, 0.5}, r), std::invalid_argument);
  EXPECT_THROW(gig_mean({1.0, -1.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(gig_mode({-1.0, 1.0, 0.5}), std::invalid_argument);
  EXPECT_THROW(validate(GigParams{1.0, 1.0, std::nan("")}), std::invalid_argument);
}

}  // namespace
}  // namespace treeshrink
