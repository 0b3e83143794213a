// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "engine.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <stdexcept>

namespace treeshrink::detail {

Design::Design(const SensingOperator& op, std::span<const double> y)
    : op_(&op), y_(y.begin(), y.end()), d_(op.n(), 1.0) {
  if (y.size() != op.m()) throw std::invalid_argument("measurement vector length does not match the operator");
  if (!op.orthonormal()) {
    psi_ = op.psi_matrix();
    for (std::size_t k = 0; k < d_.size(); ++k) d_[k] = psi_.col(static_cast<Eigen::Index>(k)).squaredNorm();
  }
}

std::vector<double> Design::fit(std::span<const double> x) const {
  if (orthonormal()) return op_->apply_psi(x);
  std::vector<double> out(m());
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(m())) =
      psi_ * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double safe_lgamma(double z) { return std::lgamma(std::max(z, DBL_MIN)); }

}  // namespace

double children_log_factor(const LevelProblem& p, std::size_t i, double value, double others_sum) {
  const double total = others_sum + value;
  const double t = 1.0 / (p.n_children * total);
  double weighted = 0.0;
  double lg = 0.0;
  for (std::size_t j = 0; j < p.gamma.size(); ++j) {
    const double g = j == i ? value : p.gamma[j];
    weighted += g * p.child_log[j];
    lg += safe_lgamma(g * t);
  }
  return t * weighted - p.n_children * lg;
}

AcceptanceStats metropolis_level(const LevelProblem& p, RngHandle& rng) {
  AcceptanceStats stats;
  const std::size_t n = p.gamma.size();
  if (n == 0) return stats;
  if (n == 1) {
    // gamma_tilde is pinned to 1, so the level scale follows its prior.
    p.gamma[0] = std::max(sample_gamma(p.shape[0], p.rate, rng), kGammaFloor);
    return stats;
  }
  const bool has_children = !p.child_log.empty();
  const double dn = static_cast<double>(n);

  double total = 0.0;
  double q = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    total += p.gamma[j];
    q += p.inv_scale[j] / p.gamma[j];
  }
  double f_cur = has_children ? children_log_factor(p, 0, p.gamma[0], total - p.gamma[0]) : 0.0;

  for (std::size_t i = 0; i < n; ++i) {
    const double cur = p.gamma[i];
    const double own_q = p.inv_scale[i] / cur;
    double others = total - cur;
    double q_others = q - own_q;
    // Guard against cancellation when one node dominates its level.
    if (cur > 0.5 * total || !(others > 0.0)) {
      others = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others += p.gamma[j];
    }
    if (own_q > 0.5 * q || !(q_others >= 0.0)) {
      q_others = 0.0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) q_others += p.inv_scale[j] / p.gamma[j];
    }

    const GigParams proposal{2.0 * p.rate, others * p.inv_scale[i], p.shape[i] - 1.0};
    const double prop = std::max(sample_gig(proposal, rng), kGammaFloor);

    double log_ratio = dn * std::log1p((prop - cur) / (others + cur)) - 0.5 * (prop - cur) * q_others;
    double f_prop = 0.0;
    if (has_children) {
      f_prop = children_log_factor(p, i, prop, others);
      log_ratio += f_prop - f_cur;
    }
    ++stats.proposed;
    const double u = rng.uniform();
    if (std::isfinite(log_ratio) && std::log(u) < log_ratio) {
      ++stats.accepted;
      p.gamma[i] = prop;
      total = others + prop;
      q = q_others + p.inv_scale[i] / prop;
      f_cur = f_prop;
    } else {
      total = others + cur;
      q = q_others + own_q;
    }
  }
  return stats;
}

std::vector<double> group_shapes(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t g) {
  const std::size_t b = s.detail_begin(g);
  const std::size_t size = s.layout->groups()[g].size();
  std::vector<double> out(size);
  for (std::size_t i = 0; i < size; ++i) out[i] = gamma_prior(s, hyper, b + i).shape;
  return out;
}

double group_rate(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t g) {
  return gamma_prior(s, hyper, s.detail_begin(g)).rate;
}

std::vector<double> group_child_log(const ShrinkageState& s, const TreeIndex& index, std::size_t g) {
  if (s.structure != PriorStructure::Tree) return {};
  const LevelGroup& grp = index.groups[g];
  if (grp.level >= s.layout->n_levels()) return {};
  const std::size_t b = index.begin(g);
  std::vector<double> out(grp.size(), 0.0);
  for (std::size_t i = 0; i < grp.size(); ++i) {
    for (std::uint32_t c : index.children_of(b + i)) out[i] += std::log(s.gamma_tilde[c]);
  }
  return out;
}

}  // namespace treeshrink::detail
