// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace treeshrink {

/// Seedable random source. Identical (seed, stream) pairs reproduce identical
/// draws on the same build; distinct streams seed the engine through
/// different seed sequences. Must not be shared between threads.
class RngHandle {
 public:
  explicit RngHandle(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// Gamma(shape, rate), mean shape/rate. Draws that underflow a double are
/// returned as the smallest normal value.
double sample_gamma(double shape, double rate, RngHandle& rng);
/// log of a Gamma(shape, rate) draw; stays finite for shapes far below 1.
double sample_log_gamma(double shape, double rate, RngHandle& rng);
/// X with 1/X ~ Gamma(shape, rate = scale).
double sample_inverse_gamma(double shape, double scale, RngHandle& rng);
std::vector<double> sample_dirichlet(std::span<const double> concentrations, RngHandle& rng);

/// Generalized inverse Gaussian with density proportional to
/// x^(p-1) exp(-(a x + b / x) / 2), a > 0, b > 0.
struct GigParams {
  double a = 1.0;
  double b = 1.0;
  double p = 0.0;
};

void validate(const GigParams& params);

double sample_gig(const GigParams& params, RngHandle& rng);

/// Modified Bessel function of the second kind, K_p(x) for x > 0.
double bessel_k(double p, double x);
/// log K_p(x); finite where K_p itself under- or overflows.
double log_bessel_k(double p, double x);

double gig_mean(const GigParams& params);
/// E[1/X].
double gig_inverse_mean(const GigParams& params);
double gig_mode(const GigParams& params);
/// log of the integral of x^(p-1) exp(-(a x + b/x)/2) over (0, inf).
double gig_log_normalizer(const GigParams& params);
double gig_log_density(double x, const GigParams& params);

}  // namespace treeshrink
