// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

// Internal machinery shared by the sampler and the deterministic solvers.

#pragma once

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "treeshrink/measurement.hpp"
#include "treeshrink/model.hpp"
#include "treeshrink/randmath.hpp"
#include "treeshrink/sampler.hpp"

namespace treeshrink::detail {

inline constexpr double kPrecisionFloor = 1e-12;

/// Psi together with the data, arranged for coordinate sweeps.
/// Orthonormal operators never materialize Psi: the coordinates decouple and
/// Psi_k^T (y - w - sum_{l!=k} Psi_l x_l) = (Psi^T (y - w))_k.
class Design {
 public:
  Design(const SensingOperator& op, std::span<const double> y);

  bool orthonormal() const { return op_->orthonormal(); }
  std::size_t m() const { return y_.size(); }
  std::size_t n() const { return d_.size(); }
  std::span<const double> y() const { return y_; }
  std::span<const double> column_norms() const { return d_; }
  const SensingOperator& op() const { return *op_; }

  /// Psi x.
  std::vector<double> fit(std::span<const double> x) const;

  /// Visits every coordinate k in flat order with
  /// c_k = Psi_k^T (y - w - sum_{l != k} Psi_l x_l) and d_k = |Psi_k|^2,
  /// storing update(k, c_k, d_k) into x[k]. Returns Psi x for the final x.
  template <class Update>
  std::vector<double> sweep(std::span<double> x, std::span<const double> w, Update&& update) const;

 private:
  const SensingOperator* op_;
  std::vector<double> y_;
  std::vector<double> d_;
  Eigen::MatrixXd psi_;
};

template <class Update>
std::vector<double> Design::sweep(std::span<double> x, std::span<const double> w, Update&& update) const {
  const std::size_t nn = n(), mm = m();
  if (orthonormal()) {
    std::vector<double> target(mm);
    for (std::size_t i = 0; i < mm; ++i) target[i] = y_[i] - (w.empty() ? 0.0 : w[i]);
    const std::vector<double> z = op_->apply_psi_adjoint(target);
    for (std::size_t k = 0; k < nn; ++k) x[k] = update(k, z[k], 1.0);
    return fit(x);
  }
  const auto ei = [](std::size_t v) { return static_cast<Eigen::Index>(v); };
  Eigen::Map<const Eigen::VectorXd> xv(x.data(), ei(nn));
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(y_.data(), ei(mm)) - psi_ * xv;
  if (!w.empty()) r -= Eigen::Map<const Eigen::VectorXd>(w.data(), ei(mm));
  for (std::size_t k = 0; k < nn; ++k) {
    const auto col = psi_.col(ei(k));
    const double c = col.dot(r) + d_[k] * x[k];
    const double next = update(k, c, d_[k]);
    const double delta = next - x[k];
    if (delta != 0.0) r.noalias() -= delta * col;
    x[k] = next;
  }
  std::vector<double> out(mm);
  for (std::size_t i = 0; i < mm; ++i) out[i] = y_[i] - (w.empty() ? 0.0 : w[i]) - r[ei(i)];
  return out;
}

/// One level of gamma weights with the prior pieces that couple them.
/// Target, up to a constant, for unnormalized gamma with S = sum gamma:
///   prod_i Ga(gamma_i; shape_i, rate) (S/gamma_i) exp(-S inv_scale_i / (2 gamma_i))
///   * prod_i prod_{c in ch(i)} gamma_tilde_c^(t gamma_i) / Gamma(t gamma_i),  t = 1/(n_c S).
struct LevelProblem {
  std::span<double> gamma;
  std::span<const double> inv_scale;  // 1/alpha_i
  std::span<const double> shape;
  double rate = 1.0;
  /// Sum over the children of i of log gamma_tilde_c; empty at leaves.
  std::span<const double> child_log;
  int n_children = kChildrenPerNode;
};

/// log of the children factor with gamma_i replaced by value; others_sum is
/// sum_{j != i} gamma_j. O(level size).
double children_log_factor(const LevelProblem& p, std::size_t i, double value, double others_sum);

/// One Metropolis pass over the nodes of a level, in index order.
AcceptanceStats metropolis_level(const LevelProblem& p, RngHandle& rng);

/// Shapes of a tree or flat group (see gamma_prior) in node order.
std::vector<double> group_shapes(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t g);
/// Prior rate of group g.
double group_rate(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t g);
/// Child log-sums for group g from the current gamma_tilde of the level below;
/// empty when g is a leaf level or the structure is flat.
std::vector<double> group_child_log(const ShrinkageState& s, const TreeIndex& index, std::size_t g);

}  // namespace treeshrink::detail
