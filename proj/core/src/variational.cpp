// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/variational.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "engine.hpp"

namespace treeshrink {

using detail::Design;
using detail::kPrecisionFloor;

void SolverConfig::validate() const {
  if (max_iterations <= 0) throw std::invalid_argument("solver needs a positive iteration cap");
  if (method == SolverMethod::VBS && importance_samples < 1) throw std::invalid_argument("VB(s) needs s >= 1");
  if (!(tolerance >= 0.0)) throw std::invalid_argument("tolerance must be >= 0");
  hyper.validate();
}

std::string SolverConfig::method_name() const {
  switch (method) {
    case SolverMethod::AVB: return "avb";
    case SolverMethod::VBS: return "vb:" + std::to_string(importance_samples);
    case SolverMethod::EM: return "em";
  }
  return "?";
}

void parse_solver_method(std::string_view text, SolverConfig& config) {
  if (text == "avb") {
    config.method = SolverMethod::AVB;
  } else if (text == "em") {
    config.method = SolverMethod::EM;
  } else if (text.starts_with("vb:")) {
    const std::string_view digits = text.substr(3);
    int s = 0;
    const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), s);
    if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || s < 1) {
      throw std::invalid_argument("bad VB(s) method '" + std::string(text) + "' (expected vb:<s> with s >= 1)");
    }
    config.method = SolverMethod::VBS;
    config.importance_samples = s;
  } else {
    throw std::invalid_argument("unknown solver method '" + std::string(text) + "' (avb|vb:<s>|em)");
  }
}

VariationalState initial_variational_state(std::span<const double> y, const SensingOperator& op,
                                           PriorStructure structure, const Hyperparameters& hyper, bool spiky) {
  VariationalState vs;
  vs.model = initial_state(y, op, structure, hyper, spiky);
  vs.variance.assign(op.n(), 0.0);
  vs.inv_alpha.assign(vs.model.shrinkage.alpha.size(), 1.0);
  if (spiky) {
    vs.w_variance.assign(op.m(), 0.0);
    vs.inv_zeta.assign(op.m(), 1.0);
  }
  return vs;
}

// ---------------------------------------------------------------------------
// gamma updates

namespace {

/// Applies node_mean(g, i, shapes, rate) to every node of every level, roots
/// first, reading the level's previous moments (Jacobi) and renormalizing.
template <class NodeMean>
void level_pass(VariationalState& vs, bool gauge_to_simplex, NodeMean&& node_mean) {
  ShrinkageState& s = vs.model.shrinkage;
  for (std::size_t g = 0; g < s.layout->groups().size(); ++g) {
    auto gamma = s.group_span(s.gamma, g);
    auto tilde = s.group_span(s.gamma_tilde, g);
    const std::vector<double> shapes = detail::group_shapes(s, vs.model.hyper, g);
    const double rate = detail::group_rate(s, vs.model.hyper, g);
    if (gamma.size() == 1) {
      gamma[0] = shapes[0] / rate;
      tilde[0] = 1.0;
      continue;
    }
    std::vector<double> next(gamma.size());
    for (std::size_t i = 0; i < gamma.size(); ++i) next[i] = std::max(node_mean(g, i, shapes, rate), kGammaFloor);
    std::copy(next.begin(), next.end(), gamma.begin());
    s.renormalize(g);
    if (gauge_to_simplex) std::copy(tilde.begin(), tilde.end(), gamma.begin());
  }
}

}  // namespace

void avb_update_gamma(VariationalState& vs) {
  const ShrinkageState& s = vs.model.shrinkage;
  level_pass(vs, false, [&](std::size_t g, std::size_t i, const std::vector<double>& shapes, double rate) {
    const std::size_t d = s.detail_begin(g) + i;
    const double others = std::max(1.0 - s.gamma_tilde[d], kGammaFloor);
    return gig_mean({2.0 * rate, vs.inv_alpha[d] * others, shapes[i] - 1.0});
  });
}

void em_update_gamma(VariationalState& vs) {
  const ShrinkageState& s = vs.model.shrinkage;
  level_pass(vs, true, [&](std::size_t g, std::size_t i, const std::vector<double>& shapes, double rate) {
    const std::size_t d = s.detail_begin(g) + i;
    // gamma sits in the sum-to-one gauge, so sum_{j != i} gamma_j = 1 - gamma_i.
    const double others = std::max(1.0 - s.gamma_tilde[d], kGammaFloor);
    return gig_mode({2.0 * rate, vs.inv_alpha[d] * others, shapes[i] - 1.0});
  });
}

void vbs_update_gamma(VariationalState& vs, int samples, RngHandle& rng) {
  if (samples < 1) throw std::invalid_argument("VB(s) needs s >= 1");
  ShrinkageState& s = vs.model.shrinkage;
  const TreeIndex index(*s.layout);
  std::vector<double> child_log;
  std::vector<double> level_tilde;
  std::size_t current_group = static_cast<std::size_t>(-1);
  std::vector<double> logw(static_cast<std::size_t>(samples)), draws(static_cast<std::size_t>(samples));
  level_pass(vs, false, [&](std::size_t g, std::size_t i, const std::vector<double>& shapes, double rate) {
    if (g != current_group) {
      current_group = g;
      child_log = detail::group_child_log(s, index, g);
      const auto t = s.group_span(s.gamma_tilde, g);
      level_tilde.assign(t.begin(), t.end());
    }
    const std::size_t d = s.detail_begin(g) + i;
    const double others = std::max(1.0 - level_tilde[i], kGammaFloor);
    detail::LevelProblem prob;
    prob.gamma = level_tilde;
    prob.child_log = child_log;
    prob.n_children = vs.model.hyper.n_children;
    const GigParams proposal{2.0 * rate, vs.inv_alpha[d] * others, shapes[i] - 1.0};
    double max_logw = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < samples; ++k) {
      const double v = std::max(sample_gig(proposal, rng), kGammaFloor);
      double lw = std::log(others + v);
      if (!child_log.empty()) lw += detail::children_log_factor(prob, i, v, others);
      draws[static_cast<std::size_t>(k)] = v;
      logw[static_cast<std::size_t>(k)] = lw;
      max_logw = std::max(max_logw, lw);
    }
    double num = 0.0, den = 0.0;
    for (int k = 0; k < samples; ++k) {
      const double wk = std::exp(logw[static_cast<std::size_t>(k)] - max_logw);
      num += wk * draws[static_cast<std::size_t>(k)];
      den += wk;
    }
    return num / den;
  });
}

// ---------------------------------------------------------------------------
// Solver

struct VariationalSolver::Impl {
  Impl(std::span<const double> y, const SensingOperator& op, VariationalState st, SolverConfig cfg)
      : design(op, y), vs(std::move(st)), config(std::move(cfg)) {
    config.validate();
    vs.model.validate();
    if (!op.layout().same_shape(vs.model.layout())) throw std::invalid_argument("solver: state and operator layouts differ");
    if (vs.model.noise.spiky) vs.model.noise.validate(op.m());
    fit = design.fit(vs.model.x.coefficients());
  }

  bool em() const { return config.method == SolverMethod::EM; }

  std::vector<double> residual() const {
    const auto y = design.y();
    const NoiseState& nz = vs.model.noise;
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - fit[i] - (nz.spiky ? nz.w[i] : 0.0);
    return r;
  }

  Design design;
  VariationalState vs;
  SolverConfig config;
  std::vector<double> fit;
};

VariationalSolver::VariationalSolver(std::span<const double> y, const SensingOperator& op, VariationalState state,
                                     SolverConfig config)
    : impl_(std::make_unique<Impl>(y, op, std::move(state), std::move(config))) {}
VariationalSolver::~VariationalSolver() = default;
VariationalSolver::VariationalSolver(VariationalSolver&&) noexcept = default;
VariationalSolver& VariationalSolver::operator=(VariationalSolver&&) noexcept = default;

const VariationalState& VariationalSolver::state() const { return impl_->vs; }
VariationalState& VariationalSolver::state() { return impl_->vs; }

double VariationalSolver::update_x() {
  VariationalState& vs = impl_->vs;
  ModelState& st = vs.model;
  const ShrinkageState& s = st.shrinkage;
  const std::size_t ns = s.layout->num_scaling();
  const auto groups = s.layout->group_ids();
  const double a0 = st.noise.alpha0;
  auto x = st.x.coefficients();
  double change = 0.0;
  const std::span<const double> w =
      st.noise.spiky ? std::span<const double>(st.noise.w) : std::span<const double>();
  impl_->fit = impl_->design.sweep(x, w, [&](std::size_t k, double c, double dk) {
    const double lambda = k < ns ? s.tau0 : s.tau[static_cast<std::size_t>(groups[k])] * s.alpha[k - ns];
    const double prec = lambda + dk;
    vs.variance[k] = 1.0 / (a0 * prec);
    const double next = c / prec;
    change = std::max(change, std::abs(next - x[k]));
    return next;
  });
  return change;
}

void VariationalSolver::update_alpha_tau() {
  VariationalState& vs = impl_->vs;
  ModelState& st = vs.model;
  ShrinkageState& s = st.shrinkage;
  NoiseState& nz = st.noise;
  const Hyperparameters& hy = st.hyper;
  const auto x = st.x.coefficients();
  const std::size_t ns = s.layout->num_scaling();
  const double a0 = nz.alpha0;

  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    const std::size_t k = ns + d;
    const double tau = s.tau[static_cast<std::size_t>(s.layout->group_of(k))];
    const double second = x[k] * x[k] + vs.variance[k];
    const GigParams prm{std::max(tau * a0 * second, kPrecisionFloor), 1.0 / s.gamma_tilde[d], -0.5};
    s.alpha[d] = gig_mean(prm);
    vs.inv_alpha[d] = gig_inverse_mean(prm);
  }

  double scaling_sq = 0.0;
  for (std::size_t k = 0; k < ns; ++k) scaling_sq += x[k] * x[k] + vs.variance[k];
  std::vector<double> weighted(s.tau.size(), 0.0);
  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    const std::size_t k = ns + d;
    weighted[static_cast<std::size_t>(s.layout->group_of(k))] += s.alpha[d] * (x[k] * x[k] + vs.variance[k]);
  }
  s.tau0 = (hy.a0 + 0.5 * static_cast<double>(ns)) / (hy.b0 + 0.5 * a0 * scaling_sq);
  for (std::size_t g = 0; g < s.tau.size(); ++g) {
    const double n_g = static_cast<double>(s.layout->groups()[g].size());
    s.tau[g] = (hy.a0 + 0.5 * n_g) / (hy.b0 + 0.5 * a0 * weighted[g]);
  }

  // Expected residual energy: |r|^2 plus the coefficient and spike variances.
  const std::vector<double> r = impl_->residual();
  double energy = 0.0;
  for (double v : r) energy += v * v;
  const auto dcol = impl_->design.column_norms();
  for (std::size_t k = 0; k < x.size(); ++k) energy += dcol[k] * vs.variance[k];
  energy += s.tau0 * scaling_sq;
  for (std::size_t g = 0; g < s.tau.size(); ++g) energy += s.tau[g] * weighted[g];
  const double m = static_cast<double>(r.size());
  double shape = hy.a0 + 0.5 * (m + static_cast<double>(x.size()));
  if (nz.spiky) {
    double spike = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      energy += vs.w_variance[i];
      spike += nz.zeta[i] * (nz.w[i] * nz.w[i] + vs.w_variance[i]);
    }
    energy += nz.nu * spike;
    shape += 0.5 * m;
  }
  nz.alpha0 = shape / (hy.b0 + 0.5 * energy);
}

void VariationalSolver::update_gamma(RngHandle& rng) {
  switch (impl_->config.method) {
    case SolverMethod::AVB: avb_update_gamma(impl_->vs); break;
    case SolverMethod::VBS: vbs_update_gamma(impl_->vs, impl_->config.importance_samples, rng); break;
    case SolverMethod::EM: em_update_gamma(impl_->vs); break;
  }
}

void VariationalSolver::update_spiky() {
  VariationalState& vs = impl_->vs;
  NoiseState& nz = vs.model.noise;
  if (!nz.spiky) throw InvalidState("update_spiky: the spiky noise component is disabled");
  const auto y = impl_->design.y();
  const std::size_t m = y.size();
  const double a0 = nz.alpha0;
  const bool em = impl_->em();
  for (std::size_t i = 0; i < m; ++i) {
    const double shrink = 1.0 + nz.nu * nz.zeta[i];
    nz.w[i] = (y[i] - impl_->fit[i]) / shrink;
    vs.w_variance[i] = 1.0 / (a0 * shrink);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const double second = nz.w[i] * nz.w[i] + vs.w_variance[i];
    const GigParams prm{std::max(nz.nu * a0 * second, kPrecisionFloor), 1.0 / nz.p[i], -0.5};
    nz.zeta[i] = gig_mean(prm);
    vs.inv_zeta[i] = gig_inverse_mean(prm);
  }
  // Flat simplex p: the gamma update of the selected method, without children.
  const double shape = 1.0 / static_cast<double>(m);
  std::vector<double> next(m);
  for (std::size_t i = 0; i < m; ++i) {
    const GigParams prm{2.0, vs.inv_zeta[i] * std::max(1.0 - nz.p[i], kGammaFloor), shape - 1.0};
    next[i] = std::max(em ? gig_mode(prm) : gig_mean(prm), kGammaFloor);
  }
  nz.pi = next;
  nz.renormalize_p();
  if (em) nz.pi = nz.p;
  double energy = 0.0;
  for (std::size_t i = 0; i < m; ++i) energy += nz.zeta[i] * (nz.w[i] * nz.w[i] + vs.w_variance[i]);
  nz.nu = (vs.model.hyper.e0 + 0.5 * static_cast<double>(m)) / (vs.model.hyper.f0 + 0.5 * a0 * energy);
}

double VariationalSolver::iterate(RngHandle& rng) {
  const double change = update_x();
  update_alpha_tau();
  update_gamma(rng);
  if (impl_->vs.model.noise.spiky) update_spiky();
  ++impl_->vs.iteration;
  return change;
}

std::vector<double> VariationalSolver::residual() const { return impl_->residual(); }

PosteriorSummary run_solver(std::span<const double> y, const SensingOperator& op, const SolverConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  VariationalSolver solver(y, op, initial_variational_state(y, op, config.structure, config.hyper, config.spiky),
                           config);
  RngHandle rng(config.seed, 0);
  PosteriorSummary out;
  out.method = config.method_name();
  for (int it = 0; it < config.max_iterations; ++it) {
    const double change = solver.iterate(rng);
    const std::vector<double> r = solver.residual();
    double rn = 0.0;
    for (double v : r) rn += v * v;
    TraceRow row;
    row.iteration = it + 1;
    row.alpha0 = solver.state().model.noise.alpha0;
    row.residual_norm = std::sqrt(rn);
    row.mean_change = change;
    row.log_joint = log_joint(solver.state().model, y, op);
    out.trace.push_back(row);
    out.iterations = it + 1;
    if (change < config.tolerance) break;
  }
  const VariationalState& vs = solver.state();
  out.layout = vs.model.x.layout_ptr();
  const auto x = vs.model.x.coefficients();
  out.mean.assign(x.begin(), x.end());
  out.variance = vs.variance;
  out.alpha0_mean = vs.model.noise.alpha0;
  out.noise_std = 1.0 / std::sqrt(vs.model.noise.alpha0);
  out.w_mean = vs.model.noise.w;
  out.gamma_tilde_mean = vs.model.shrinkage.gamma_tilde;
  out.retained = 1;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace treeshrink
