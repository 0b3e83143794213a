// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <vector>

#include "treeshrink/measurement.hpp"
#include "treeshrink/randmath.hpp"
#include "treeshrink/transform.hpp"

namespace treeshrink {

/// Raised when an operation needs a model feature that is switched off.
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct Hyperparameters {
  double a0 = 1e-6;  // shape of the gamma priors on tau_0, tau_l, alpha_0
  double b0 = 1e-6;  // rate of the same
  double root_rate = 1.0;
  int n_children = kChildrenPerNode;
  double e0 = 1e-6;  // spiky global scale nu ~ Ga(e0, f0)
  double f0 = 1e-6;
  /// Shape of the i.i.d. gammas in the flat model; <= 0 selects 1/n per group.
  double flat_shape = 0.0;

  void validate() const;
};

/// Parent/child links between detail indices d = flat - num_scaling.
struct TreeIndex {
  explicit TreeIndex(const TreeLayout& layout);

  std::size_t num_scaling = 0;
  std::vector<std::int32_t> group;      // per detail node
  std::vector<std::int64_t> parent;     // detail index, -1 at roots
  std::vector<std::uint32_t> children;  // 4 per node; valid when has_children(d)
  std::vector<std::uint8_t> child_flag;
  std::vector<LevelGroup> groups;

  bool has_children(std::size_t d) const { return child_flag[d] != 0; }
  std::span<const std::uint32_t> children_of(std::size_t d) const {
    return std::span<const std::uint32_t>(children).subspan(kChildrenPerNode * d, kChildrenPerNode);
  }
  /// First detail index of group g.
  std::size_t begin(std::size_t g) const { return groups[g].offset - num_scaling; }
};

/// Floor applied to sampled gamma values.
inline constexpr double kGammaFloor = 1e-300;

/// Shrinkage parameters for the detail coefficients. Per-coefficient vectors
/// are indexed by d = flat - num_scaling, so group g occupies
/// [groups()[g].offset - num_scaling, ... + size).
struct ShrinkageState {
  LayoutPtr layout;
  PriorStructure structure = PriorStructure::Tree;
  std::vector<double> gamma;
  std::vector<double> gamma_tilde;
  std::vector<double> alpha;
  std::vector<double> tau;  // one per layout group
  double tau0 = 1.0;

  std::size_t num_detail() const { return gamma.size(); }
  std::size_t detail_begin(std::size_t g) const;
  std::span<double> group_span(std::vector<double>& v, std::size_t g) const;
  std::span<const double> group_span(const std::vector<double>& v, std::size_t g) const;

  /// Recompute gamma_tilde of one group (or all) from gamma.
  void renormalize(std::size_t g);
  void renormalize_all();

  void validate() const;
};

/// Gamma prior (shape, rate) of the unnormalized gamma of detail node d.
/// Tree roots: (1/n_1, root_rate); tree children: (gamma_tilde[parent]/n_c, 1);
/// flat model: (flat shape or 1/n_g, 1).
struct GammaShapeRate {
  double shape;
  double rate;
};
GammaShapeRate gamma_prior(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t d);

struct NoiseState {
  double alpha0 = 1.0;
  bool spiky = false;
  std::vector<double> w;
  std::vector<double> zeta;
  std::vector<double> pi;  // unnormalized weights behind p
  std::vector<double> p;   // simplex
  double nu = 1.0;

  /// Switch the spiky component on with w = 0, zeta = 1, p uniform.
  void enable_spiky(std::size_t m);
  void renormalize_p();
  void validate(std::size_t m) const;
};

struct ModelState {
  TreePyramid x;
  ShrinkageState shrinkage;
  NoiseState noise;
  Hyperparameters hyper;

  const TreeLayout& layout() const { return x.layout(); }
  void validate() const;
};

/// Empty shrinkage state for a layout: gamma uniform on each level, alpha = 1,
/// tau = 1.
ShrinkageState make_shrinkage(LayoutPtr layout, PriorStructure structure);

/// Gamma-process tree: roots ~ Ga(1/n_1, root_rate); the children of node i
/// ~ Ga(gamma_tilde_i / n_c, 1); every level normalized. alpha and tau are 1.
ShrinkageState prior_draw_tree(LayoutPtr layout, const Hyperparameters& hyper, RngHandle& rng);
/// Flat ablation: every group i.i.d. Ga(shape, 1) then normalized.
ShrinkageState prior_draw_flat(LayoutPtr layout, const Hyperparameters& hyper, RngHandle& rng);

/// Draws alpha ~ InvGa(1, 1/(2 gamma_tilde)) into s, then
/// x_l ~ N(0, 1/(tau_l alpha alpha0)) and x_0 ~ N(0, 1/(tau_0 alpha0)).
TreePyramid prior_draw_coefficients(ShrinkageState& s, double alpha0, RngHandle& rng);

std::vector<double> normalize_gamma(std::span<const double> gamma);

struct LogJointTerms {
  double likelihood = 0.0;
  double scaling_prior = 0.0;
  double coefficient_prior = 0.0;
  double alpha_prior = 0.0;
  double gamma_prior = 0.0;
  double scale_prior = 0.0;  // tau_0, tau_l, alpha_0
  double spiky_prior = 0.0;  // w, zeta, pi, nu

  double total() const {
    return likelihood + scaling_prior + coefficient_prior + alpha_prior + gamma_prior + scale_prior +
           spiky_prior;
  }
};

LogJointTerms log_joint_terms(const ModelState& state, std::span<const double> y, const SensingOperator& op);
double log_joint(const ModelState& state, std::span<const double> y, const SensingOperator& op);
/// Same, with Psi x supplied by the caller.
LogJointTerms log_joint_terms_with_fit(const ModelState& state, std::span<const double> y,
                                       std::span<const double> fit);

/// Line-oriented "key value..." text; doubles in shortest round-trip form.
void save_state(std::ostream& out, const ModelState& state);
ModelState load_state(std::istream& in);

/// Synthetic compressible signal with parent-to-child persistence.
struct TreeSignalConfig {
  double scaling_mean = 4.0;
  double scaling_sd = 1.0;
  double root_sd = 1.0;
  double level_decay = 0.5;     // sd multiplier per level
  double p_root_active = 0.6;
  double p_child_active = 0.7;  // given an active parent
  double inactive_sd = 0.0;     // relative sd of inactive coefficients
};

TreePyramid draw_tree_sparse_signal(LayoutPtr layout, const TreeSignalConfig& config, RngHandle& rng);

}  // namespace treeshrink
