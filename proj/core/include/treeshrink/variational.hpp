// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "treeshrink/measurement.hpp"
#include "treeshrink/model.hpp"
#include "treeshrink/randmath.hpp"
#include "treeshrink/sampler.hpp"

namespace treeshrink {

enum class SolverMethod : std::uint8_t { AVB, VBS, EM };

struct SolverConfig {
  SolverMethod method = SolverMethod::AVB;
  int importance_samples = 500;  // s for VB(s)
  int max_iterations = 100;
  double tolerance = 1e-6;  // on max |change| of the coefficient means
  std::uint64_t seed = 1;
  bool spiky = false;
  PriorStructure structure = PriorStructure::Tree;
  Hyperparameters hyper;

  void validate() const;
  /// "avb", "vb:<s>" or "em".
  std::string method_name() const;
};

/// Parses "avb", "vb:<s>" or "em" into method and sample count.
void parse_solver_method(std::string_view text, SolverConfig& config);

/// Mean-field moments. model holds the means: x = <x>, alpha = <alpha>,
/// gamma = <gamma>, gamma_tilde = <gamma_tilde>, tau, alpha0, w, zeta, p, nu.
struct VariationalState {
  ModelState model;
  std::vector<double> variance;   // per coefficient
  std::vector<double> inv_alpha;  // <1/alpha>
  std::vector<double> w_variance;
  std::vector<double> inv_zeta;   // <1/zeta>
  int iteration = 0;
};

VariationalState initial_variational_state(std::span<const double> y, const SensingOperator& op,
                                           PriorStructure structure, const Hyperparameters& hyper, bool spiky);

/// Closed-form level update, roots first:
/// <gamma_i> = gig_mean(2 rate, <1/alpha_i> sum_{j!=i} <gamma_tilde_j>, shape_i - 1).
void avb_update_gamma(VariationalState& vs);
/// Self-normalized importance sampling with the GIG proposal; weights carry
/// the level-sum factor and the children density at the current means.
void vbs_update_gamma(VariationalState& vs, int samples, RngHandle& rng);
/// gamma_i = gig_mode(2 rate, <1/alpha_i> sum_{j!=i} gamma_j, shape_i - 1), then normalized.
void em_update_gamma(VariationalState& vs);

class VariationalSolver {
 public:
  VariationalSolver(std::span<const double> y, const SensingOperator& op, VariationalState state,
                    SolverConfig config);
  ~VariationalSolver();
  VariationalSolver(VariationalSolver&&) noexcept;
  VariationalSolver& operator=(VariationalSolver&&) noexcept;

  const VariationalState& state() const;
  VariationalState& state();

  /// Returns max |change| of the coefficient means.
  double update_x();
  void update_alpha_tau();
  void update_gamma(RngHandle& rng);
  /// Throws InvalidState when the spiky component is off.
  void update_spiky();
  /// One full pass; returns max |change| of the coefficient means.
  double iterate(RngHandle& rng);

  /// y - Psi <x> - <w>.
  std::vector<double> residual() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PosteriorSummary run_solver(std::span<const double> y, const SensingOperator& op, const SolverConfig& config);

}  // namespace treeshrink
