// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "treeshrink/measurement.hpp"
#include "treeshrink/model.hpp"
#include "treeshrink/randmath.hpp"

namespace treeshrink {

struct ChainConfig {
  int samples = 5000;  // total sweeps, burn-in included
  int burnin = 1000;
  std::uint64_t seed = 1;
  std::uint64_t stream = 0;
  bool spiky = false;
  PriorStructure structure = PriorStructure::Tree;
  Hyperparameters hyper;
  /// Sweeps per acceptance-rate trace point.
  int acceptance_window = 100;
  /// Flat indices whose retained samples are kept.
  std::vector<std::size_t> track;
  /// Evaluate the log joint every this many sweeps (0: never).
  int log_joint_every = 1;

  void validate() const;
};

struct AcceptanceStats {
  std::uint64_t proposed = 0;
  std::uint64_t accepted = 0;

  double rate() const { return proposed == 0 ? 0.0 : static_cast<double>(accepted) / static_cast<double>(proposed); }
  AcceptanceStats& operator+=(const AcceptanceStats& o) {
    proposed += o.proposed;
    accepted += o.accepted;
    return *this;
  }
};

struct TraceRow {
  int iteration = 0;
  double log_joint = 0.0;
  double alpha0 = 0.0;
  double acceptance = 0.0;  // gamma acceptance over the trailing window
  double residual_norm = 0.0;
  double mean_change = 0.0;  // deterministic solvers only
};

struct TrackedCoefficient {
  std::size_t index = 0;
  std::vector<double> samples;
};

/// Posterior means (MCMC, VB) or point estimates (EM) and diagnostics.
struct PosteriorSummary {
  std::string method;
  LayoutPtr layout;
  std::vector<double> mean;      // coefficient means
  std::vector<double> variance;  // per coefficient, >= 0
  double alpha0_mean = 0.0;
  double noise_std = 0.0;  // mean of alpha0^(-1/2)
  std::vector<double> w_mean;
  std::vector<double> gamma_tilde_mean;
  double acceptance_rate = 0.0;  // gamma updates
  AcceptanceStats acceptance;
  std::vector<TraceRow> trace;
  std::vector<TrackedCoefficient> tracked;
  std::size_t retained = 0;
  int iterations = 0;
  double seconds = 0.0;

  /// Synthesized posterior-mean image.
  ImageGrid image(const Transform& basis) const;
};

/// Starting point shared by every engine: x = 0, gamma uniform per level,
/// alpha0 from the data scale, weak tau.
ModelState initial_state(std::span<const double> y, const SensingOperator& op, PriorStructure structure,
                         const Hyperparameters& hyper, bool spiky);

/// alpha ~ GIG(tau alpha0 x^2 (floored at 1e-12), 1/gamma_tilde, -1/2).
void update_alpha(ModelState& state, RngHandle& rng);

/// One Metropolis pass over every tree level, roots first. Each node proposes
/// from GIG(2 rate, sum_{j!=i} gamma_j / alpha_i, shape_i - 1); the acceptance
/// ratio carries the remaining factors of the full conditional.
AcceptanceStats update_gamma_metropolis(ModelState& state, RngHandle& rng);

/// Metropolis-within-Gibbs sampler bound to one data set and operator.
class GibbsSampler {
 public:
  GibbsSampler(std::span<const double> y, const SensingOperator& op, ModelState state);
  ~GibbsSampler();
  GibbsSampler(GibbsSampler&&) noexcept;
  GibbsSampler& operator=(GibbsSampler&&) noexcept;

  const ModelState& state() const;
  ModelState& state();

  void update_x(RngHandle& rng);
  void update_alpha(RngHandle& rng);
  AcceptanceStats update_gamma(RngHandle& rng);
  void update_tau_and_alpha0(RngHandle& rng);
  /// Throws InvalidState when the spiky component is off.
  AcceptanceStats update_spiky(RngHandle& rng);
  /// x, alpha, gamma, tau/alpha0, spiky.
  AcceptanceStats sweep(RngHandle& rng);

  /// y - Psi x - w.
  std::vector<double> residual() const;
  double log_joint() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

PosteriorSummary run_chain(std::span<const double> y, const SensingOperator& op, const ChainConfig& config);
/// Independent chains on streams stream, stream+1, ...; summaries merged.
PosteriorSummary run_chains(std::span<const double> y, const SensingOperator& op, const ChainConfig& config,
                            int chains);
/// Pools retained-sample moments, weighting by retained counts.
PosteriorSummary merge_summaries(std::span<const PosteriorSummary> parts);

/// iteration,log_joint,alpha0,acceptance,residual_norm,mean_change
void write_trace_csv(std::ostream& out, const PosteriorSummary& summary);

}  // namespace treeshrink
