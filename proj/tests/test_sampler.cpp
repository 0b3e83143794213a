// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include <gtest/gtest.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "treeshrink/sampler.hpp"

namespace treeshrink {
namespace {

LayoutPtr wavelet(std::size_t h, std::size_t w, int levels) {
  return std::make_shared<const TreeLayout>(TreeLayout::wavelet(h, w, levels));
}

// Sup distance between the empirical CDF of draws and a CDF given on a
// sorted grid by trapezoid integration of an unnormalized log density.
template <class LogDensity>
double cdf_sup_distance(std::vector<double> draws, double lo, double hi, int cells, LogDensity logf) {
  std::sort(draws.begin(), draws.end());
  const double h = (hi - lo) / cells;
  std::vector<double> lf(cells + 1), cdf(cells + 1, 0.0);
  double peak = -1e300;
  for (int i = 0; i <= cells; ++i) peak = std::max(peak, lf[i] = logf(lo + i * h));
  for (int i = 1; i <= cells; ++i) cdf[i] = cdf[i - 1] + 0.5 * h * (std::exp(lf[i - 1] - peak) + std::exp(lf[i] - peak));
  for (double& c : cdf) c /= cdf.back();
  double sup = 0.0;
  const double n = static_cast<double>(draws.size());
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const double pos = std::clamp((draws[k] - lo) / h, 0.0, cells - 1e-9);
    const auto i = static_cast<std::size_t>(pos);
    const double model = cdf[i] + (pos - i) * (cdf[i + 1] - cdf[i]);
    sup = std::max({sup, std::abs(model - k / n), std::abs(model - (k + 1) / n)});
  }
  return sup;
}

ModelState plain_state(LayoutPtr layout) {
  ModelState st;
  st.x = TreePyramid(layout);
  st.shrinkage = make_shrinkage(layout, PriorStructure::Tree);
  st.shrinkage.gamma = st.shrinkage.gamma_tilde;
  return st;
}

TEST(ChainConfig, Validation) {
  ChainConfig c;
  c.validate();
  c.burnin = c.samples;
  EXPECT_THROW(c.validate(), std::invalid_argument);
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  EXPECT_THROW(run_chain(std::vector<double>(256, 0.5), op, c), std::invalid_argument);
}

TEST(UpdateX, MatchesExactGaussianPosterior) {
  const auto layout = wavelet(16, 16, 1);
  RngHandle hr(1);
  const SensingOperator op = make_gaussian_operator(160, 256, Transform(layout), hr);
  RngHandle rng(2);
  std::vector<double> truth(256);
  for (double& v : truth) v = rng.normal();
  const std::vector<double> y = add_gaussian_noise(op.apply_psi(truth), 0.7, rng);
  ModelState st = plain_state(layout);
  st.noise.alpha0 = 2.0;
  st.shrinkage.tau0 = 0.5;
  for (std::size_t g = 0; g < st.shrinkage.tau.size(); ++g) st.shrinkage.tau[g] = 1.0 + g;
  for (std::size_t d = 0; d < st.shrinkage.num_detail(); ++d) st.shrinkage.alpha[d] = 20.0 + rng.uniform() * 30.0;

  // Q = alpha0 (Psi^T Psi + D), mean = alpha0 Q^-1 Psi^T y.
  const Eigen::MatrixXd psi = op.psi_matrix();
  Eigen::VectorXd dvec(256);
  for (std::size_t k = 0; k < 256; ++k) {
    const int g = layout->group_of(k);
    dvec[static_cast<Eigen::Index>(k)] =
        g < 0 ? st.shrinkage.tau0 : st.shrinkage.tau[static_cast<std::size_t>(g)] * st.shrinkage.alpha[k - 64];
  }
  const Eigen::MatrixXd q = st.noise.alpha0 * (psi.transpose() * psi + Eigen::MatrixXd(dvec.asDiagonal()));
  const Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(y.data(), 160);
  const Eigen::VectorXd exact = q.llt().solve(st.noise.alpha0 * psi.transpose() * yv);

  GibbsSampler sampler(y, op, st);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(256);
  const int sweeps = 50000;
  for (int i = 0; i < sweeps; ++i) {
    sampler.update_x(rng);
    sum += Eigen::Map<const Eigen::VectorXd>(sampler.state().x.coefficients().data(), 256);
  }
  const Eigen::VectorXd chain = sum / sweeps;
  EXPECT_LT((chain - exact).norm() / exact.norm(), 0.01);
}

TEST(UpdateX, LikelihoodOnlyIdentityLimit) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  RngHandle rng(3);
  std::vector<double> y(256);
  for (double& v : y) v = rng.uniform();
  ModelState st = plain_state(layout);
  st.noise.alpha0 = 100.0;
  st.shrinkage.tau0 = 1e-14;
  for (double& t : st.shrinkage.tau) t = 1e-14;
  GibbsSampler sampler(y, op, st);
  const std::vector<double> z = op.apply_psi_adjoint(y);
  std::vector<double> s(256, 0.0), s2(256, 0.0);
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    sampler.update_x(rng);
    const auto x = sampler.state().x.coefficients();
    for (std::size_t k = 0; k < 256; ++k) {
      s[k] += x[k];
      s2[k] += x[k] * x[k];
    }
  }
  double var = 0.0, worst = 0.0;
  for (std::size_t k = 0; k < 256; ++k) {
    const double m = s[k] / n;
    worst = std::max(worst, std::abs(m - z[k]));
    var += (s2[k] / n - m * m) / 256.0;
  }
  EXPECT_LT(worst, 5.0 * std::sqrt(0.01 / n));
  EXPECT_NEAR(var * 100.0, 1.0, 0.02);
}

TEST(UpdateX, InfiniteShrinkageLimit) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  std::vector<double> y(256, 0.7);
  ModelState st = plain_state(layout);
  st.shrinkage.tau0 = 1e14;
  for (double& t : st.shrinkage.tau) t = 1e14;
  GibbsSampler sampler(y, op, st);
  RngHandle rng(4);
  sampler.update_x(rng);
  for (double v : sampler.state().x.coefficients()) EXPECT_LT(std::abs(v), 1e-5);
}

TEST(UpdateAlpha, MatchesGigConditional) {
  const auto layout = wavelet(16, 16, 1);
  ModelState st = plain_state(layout);
  st.noise.alpha0 = 4.0;
  const std::size_t d = 17;
  st.x.coefficients()[64 + d] = 0.3;
  for (double& t : st.shrinkage.tau) t = 2.0;
  const double gt = st.shrinkage.gamma_tilde[d];
  const GigParams g{2.0 * 4.0 * 0.09, 1.0 / gt, -0.5};
  RngHandle rng(5);
  std::vector<double> draws;
  for (int i = 0; i < 50000; ++i) {
    update_alpha(st, rng);
    draws.push_back(st.shrinkage.alpha[d]);
  }
  const double mean = gig_mean(g);
  const double sup = cdf_sup_distance(draws, 0.0, 40.0 * mean, 200000, [&](double a) {
    return a <= 0.0 ? -1e300 : gig_log_density(a, g);
  });
  EXPECT_LT(sup, 0.02);
  // The conditional mode is the GIG mode of the same triple.
  const double mode = gig_mode(g);
  EXPECT_GT(gig_log_density(mode, g), gig_log_density(mode * 1.001, g));
  EXPECT_GT(gig_log_density(mode, g), gig_log_density(mode * 0.999, g));
}

TEST(UpdateAlpha, ZeroCoefficientUsesFlooredRate) {
  // Smaller |x| means a larger conditional mean, down to the 1e-12 floor.
  double previous = 0.0;
  for (double x : {1.0, 0.1, 1e-3, 1e-5, 0.0}) {
    const double a = std::max(x * x, 1e-12);
    const double m = gig_mean({a, 64.0, -0.5});
    EXPECT_GT(m, previous);
    previous = m;
  }
  const auto layout = wavelet(16, 16, 1);
  ModelState st = plain_state(layout);
  RngHandle rng(6);
  update_alpha(st, rng);
  for (double a : st.shrinkage.alpha) EXPECT_TRUE(std::isfinite(a) && a > 0.0);
}

TEST(UpdateTauAlpha0, ConjugateMeans) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  RngHandle rng(7);
  const std::vector<double> y = add_gaussian_noise(std::vector<double>(256, 0.0), 0.1, rng);
  double rss = 0.0;
  for (double v : y) rss += v * v;
  ModelState st = plain_state(layout);
  GibbsSampler sampler(y, op, st);
  double a0 = 0.0, tau = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    sampler.update_tau_and_alpha0(rng);
    a0 += sampler.state().noise.alpha0 / n;
    tau += sampler.state().shrinkage.tau[0] / n;
  }
  // x = 0: every coefficient energy vanishes, so the rates reduce to b0 and
  // b0 + |r|^2 / 2; shapes are a0 + (m + n)/2 and a0 + n_l/2.
  const Hyperparameters h;
  EXPECT_NEAR(a0 / ((h.a0 + 256.0) / (h.b0 + rss / 2.0)), 1.0, 0.01);
  EXPECT_NEAR(tau / ((h.a0 + 32.0) / h.b0), 1.0, 0.02);
}

// Target for the four children of a single root with fixed alpha: Dirichlet(1/4)
// prior times prod_j (1/u_j) exp(-1 / (2 u_j alpha_j)).
double toy_log_density(const std::array<double, 4>& u, const std::array<double, 4>& alpha) {
  double v = 0.0;
  for (int j = 0; j < 4; ++j) v += (0.25 - 2.0) * std::log(u[j]) - 1.0 / (2.0 * u[j] * alpha[j]);
  return v;
}

// Marginal CDF of u_0 on a grid by dense quadrature over the 3-simplex.
std::vector<double> toy_marginal_cdf(const std::array<double, 4>& alpha, int n) {
  const double h = 1.0 / n;
  std::vector<double> mass(n, 0.0);
  double peak = -1e300;
  std::vector<double> cache;
  for (int pass = 0; pass < 2; ++pass)
    for (int i = 0; i < n; ++i)
      for (int j = 0; i + j < n; ++j)
        for (int k = 0; i + j + k < n; ++k) {
          const double u0 = (i + 0.5) * h, u1 = (j + 0.5) * h, u2 = (k + 0.5) * h;
          const double u3 = 1.0 - u0 - u1 - u2;
          if (u3 <= 0.0) continue;
          const double lf = toy_log_density({u0, u1, u2, u3}, alpha);
          if (pass == 0) peak = std::max(peak, lf);
          else mass[i] += std::exp(lf - peak);
        }
  std::vector<double> cdf(n + 1, 0.0);
  for (int i = 0; i < n; ++i) cdf[i + 1] = cdf[i] + mass[i];
  for (double& c : cdf) c /= cdf[n];
  return cdf;
}

TEST(GammaMetropolis, SingleRootFourChildrenMatchesGridPosterior) {
  // 4x4 with two levels: one root and four leaf children in each band.
  const auto layout = wavelet(4, 4, 2);
  ASSERT_EQ(layout->group(Band::HH, 1).size(), 1u);
  ASSERT_EQ(layout->group(Band::HH, 2).size(), 4u);
  ModelState st = plain_state(layout);
  const std::array<double, 4> alpha{0.5, 1.0, 2.0, 4.0};
  for (Band b : kDetailBands) {
    const std::size_t off = layout->group(b, 2).offset - 1;
    for (int j = 0; j < 4; ++j) st.shrinkage.alpha[off + j] = alpha[j];
  }
  RngHandle rng(8);
  std::vector<double> draws;
  AcceptanceStats acc;
  for (int it = 0; it < 1000 + 50000; ++it) {
    acc += update_gamma_metropolis(st, rng);
    ASSERT_EQ(st.shrinkage.gamma_tilde[layout->group(Band::HL, 1).offset - 1], 1.0);
    if (it < 1000) continue;
    draws.push_back(st.shrinkage.gamma_tilde[layout->group(Band::HH, 2).offset - 1]);
  }
  const int n = 400;
  const std::vector<double> cdf = toy_marginal_cdf(alpha, n);
  std::sort(draws.begin(), draws.end());
  double sup = 0.0;
  for (std::size_t k = 0; k < draws.size(); ++k) {
    const double pos = draws[k] * n;
    const auto i = static_cast<std::size_t>(std::min(pos, n - 1e-9));
    const double model = cdf[i] + (pos - i) * (cdf[i + 1] - cdf[i]);
    sup = std::max(sup, std::abs(model - (k + 0.5) / draws.size()));
  }
  EXPECT_LT(sup, 0.03);
  EXPECT_GT(acc.rate(), 0.0);
  EXPECT_LE(acc.rate(), 1.0);
}

TEST(GammaMetropolis, KeepsSimplexAndPositivity) {
  const auto layout = wavelet(32, 32, 2);
  ModelState st = plain_state(layout);
  RngHandle rng(9);
  st.shrinkage = prior_draw_tree(layout, st.hyper, rng);
  prior_draw_coefficients(st.shrinkage, 1.0, rng);
  for (int it = 0; it < 50; ++it) {
    update_gamma_metropolis(st, rng);
    st.shrinkage.validate();
  }
}

TEST(UpdateSpiky, RequiresSpikyMode) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  GibbsSampler sampler(std::vector<double>(256, 0.1), op, plain_state(layout));
  RngHandle rng(10);
  EXPECT_THROW(sampler.update_spiky(rng), InvalidState);
}

TEST(UpdateSpiky, ZeroResidualAndLargeNu) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  RngHandle rng(11);
  ModelState st = plain_state(layout);
  for (double& v : st.x.coefficients()) v = rng.normal();
  const std::vector<double> y = op.apply_psi(st.x.coefficients());
  st.noise.enable_spiky(256);
  st.noise.alpha0 = 100.0;
  auto w_moments = [&](double nu) {
    ModelState local = st;
    local.noise.nu = nu;
    GibbsSampler sampler(y, op, local);
    double mean = 0.0, sq = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) {
      RngHandle r(100 + i);
      sampler.state().noise.nu = nu;
      sampler.state().noise.zeta.assign(256, 1.0);
      sampler.state().noise.w.assign(256, 0.0);
      sampler.update_spiky(r);
      for (double w : sampler.state().noise.w) {
        mean += w / (n * 256.0);
        sq += w * w / (n * 256.0);
      }
    }
    return std::pair{mean, sq};
  };
  const auto [m1, v1] = w_moments(1.0);
  const auto [m2, v2] = w_moments(1e4);
  EXPECT_NEAR(m1, 0.0, 5.0 * std::sqrt(v1 / (2000.0 * 256.0)));
  // Conditional precision alpha0 (nu zeta + 1): the variance ratio is about 1e4 / 2.
  EXPECT_NEAR(v1 / v2, (1e4 + 1.0) / 2.0, 0.05 * 5e3);
}

TEST(UpdateSpiky, SingleSpikeIsCaptured) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  RngHandle rng(12);
  ImageGrid img(16, 16);
  for (std::size_t r = 0; r < 16; ++r)
    for (std::size_t c = 0; c < 16; ++c) img(r, c) = 0.3 + 0.02 * static_cast<double>(r);
  std::vector<double> y = add_gaussian_noise(img.values, 0.01, rng);
  const std::size_t spike = 5 * 16 + 9;
  y[spike] += 0.6;
  ChainConfig cfg;
  cfg.samples = 3000;
  cfg.burnin = 1000;
  cfg.spiky = true;
  cfg.seed = 3;
  const PosteriorSummary s = run_chain(y, op, cfg);
  ASSERT_EQ(s.w_mean.size(), 256u);
  EXPECT_GE(s.w_mean[spike], 0.8 * 0.6);
  for (std::size_t i = 0; i < 256; ++i)
    if (i != spike) EXPECT_LT(std::abs(s.w_mean[i]), 0.05 * 0.6) << i;
}

TEST(RunChain, DeterministicUnderFixedSeed) {
  const auto layout = wavelet(16, 16, 1);
  RngHandle hr(13);
  const SensingOperator op = make_gaussian_operator(100, 256, Transform(layout), hr);
  RngHandle rng(14);
  const TreePyramid x = draw_tree_sparse_signal(layout, TreeSignalConfig{}, rng);
  const std::vector<double> y = add_gaussian_noise(op.apply_psi(x.coefficients()), 0.05, rng);
  ChainConfig cfg;
  cfg.samples = 200;
  cfg.burnin = 50;
  cfg.seed = 99;
  const PosteriorSummary a = run_chain(y, op, cfg);
  const PosteriorSummary b = run_chain(y, op, cfg);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.variance, b.variance);
  EXPECT_EQ(a.alpha0_mean, b.alpha0_mean);
  EXPECT_EQ(a.acceptance.accepted, b.acceptance.accepted);
  std::ostringstream ta, tb;
  write_trace_csv(ta, a);
  write_trace_csv(tb, b);
  EXPECT_EQ(ta.str(), tb.str());
  EXPECT_EQ(ta.str().substr(0, ta.str().find('\n')), "iteration,log_joint,alpha0,acceptance,residual_norm,mean_change");
  for (const TraceRow& row : a.trace) EXPECT_TRUE(std::isfinite(row.log_joint));
  for (double v : a.variance) EXPECT_GE(v, 0.0);
  EXPECT_GE(a.acceptance_rate, 0.0);
  EXPECT_LE(a.acceptance_rate, 1.0);
  EXPECT_EQ(a.retained, 150u);
}

TEST(RunChain, SweepsPreserveInvariants) {
  const auto layout = wavelet(16, 16, 1);
  const SensingOperator op = SensingOperator::identity(Transform(layout));
  RngHandle rng(15);
  std::vector<double> y(256);
  for (double& v : y) v = rng.uniform();
  GibbsSampler sampler(y, op, initial_state(y, op, PriorStructure::Tree, Hyperparameters{}, true));
  for (int i = 0; i < 100; ++i) {
    sampler.sweep(rng);
    sampler.state().validate();
    sampler.state().noise.validate(256);
    ASSERT_TRUE(std::isfinite(sampler.log_joint()));
  }
}

TEST(RunChain, RecoversSyntheticTreeSparseSignal) {
  const auto layout = wavelet(32, 32, default_levels(32, 32));
  RngHandle hr(16);
  const SensingOperator op = make_gaussian_operator(measurement_count(0.5, 1024), 1024, Transform(layout), hr);
  RngHandle rng(17);
  TreeSignalConfig sig;
  sig.p_root_active = 0.3;
  sig.p_child_active = 0.4;
  const TreePyramid x = draw_tree_sparse_signal(layout, sig, rng);
  const std::vector<double> y = add_gaussian_noise(op.apply_psi(x.coefficients()), 0.01, rng);
  ChainConfig cfg;
  cfg.samples = 2000;
  cfg.burnin = 500;
  cfg.log_joint_every = 0;
  const PosteriorSummary s = run_chain(y, op, cfg);
  double err = 0.0, norm = 0.0;
  for (std::size_t k = 0; k < 1024; ++k) {
    err += (s.mean[k] - x.coefficients()[k]) * (s.mean[k] - x.coefficients()[k]);
    norm += x.coefficients()[k] * x.coefficients()[k];
  }
  EXPECT_LT(std::sqrt(err / norm), 0.15);
}

TEST(RunChains, MergeWeightsByRetainedCount) {
  PosteriorSummary a, b;
  a.mean = {1.0, 2.0};
  a.variance = {0.0, 0.0};
  a.retained = 1;
  b.mean = {3.0, 2.0};
  b.variance = {0.0, 0.0};
  b.retained = 3;
  a.alpha0_mean = 1.0;
  b.alpha0_mean = 5.0;
  const std::vector<PosteriorSummary> parts{a, b};
  const PosteriorSummary m = merge_summaries(parts);
  EXPECT_DOUBLE_EQ(m.mean[0], 2.5);
  EXPECT_DOUBLE_EQ(m.mean[1], 2.0);
  // Pooled variance picks up the spread between chain means.
  EXPECT_DOUBLE_EQ(m.variance[0], 0.75);
  EXPECT_DOUBLE_EQ(m.alpha0_mean, 4.0);
  EXPECT_EQ(m.retained, 4u);
}

}  // namespace
}  // namespace treeshrink
