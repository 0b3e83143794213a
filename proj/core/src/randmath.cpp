// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/randmath.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace treeshrink {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kEulerGamma = 0.57721566490153286061;

bool positive_finite(double v) { return std::isfinite(v) && v > 0.0; }

void require_positive(double v, const char* what) {
  if (!positive_finite(v)) {
    throw std::invalid_argument(std::string(what) + " must be positive and finite, got " +
                                std::to_string(v));
  }
}

// Marsaglia-Tsang squeeze for shape >= 1; returns log of the unit-rate draw.
double log_gamma_unit_mt(double shape, RngHandle& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0;
    double v = 0.0;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
  }
}

// K_mu(x) and K_{mu+1}(x) for |mu| <= 1/2, as (log K_mu, log K_{mu+1}).
// Temme's series for x < 2, Steed's continued fraction otherwise.
struct LogBesselPair {
  double log_kmu;
  double log_kmu1;
};

LogBesselPair log_bessel_k_base(double mu, double x) {
  constexpr int kMaxIter = 100000;
  constexpr double kEps = 1e-17;
  const double mu2 = mu * mu;
  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = kPi * mu;
    const double fact = std::abs(pimu) < 1e-15 ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < 1e-15 ? 1.0 : std::sinh(e) / e;
    // gampl = 1/Gamma(1+mu), gammi = 1/Gamma(1-mu),
    // gam1 = (gammi - gampl) / (2 mu), gam2 = (gammi + gampl) / 2.
    const double gp1 = boost::math::tgamma1pm1(mu);
    const double gm1 = boost::math::tgamma1pm1(-mu);
    const double gampl = 1.0 / (1.0 + gp1);
    const double gammi = 1.0 / (1.0 + gm1);
    const double gam1 = std::abs(mu) < 1e-15 ? -kEulerGamma : (gp1 - gm1) * gampl * gammi / (2.0 * mu);
    const double gam2 = 0.5 * (gammi + gampl);
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    for (int i = 1; i <= kMaxIter; ++i) {
      const double di = static_cast<double>(i);
      ff = (di * ff + p + q) / (di * di - mu2);
      c *= d / di;
      p /= di - mu;
      q /= di + mu;
      const double del = c * ff;
      sum += del;
      const double del1 = c * (p - di * ff);
      sum1 += del1;
      if (std::abs(del) < std::abs(sum) * kEps) break;
    }
    return {std::log(sum), std::log(sum1) + std::log(2.0 / x)};
  }

  double b = 2.0 * (1.0 + x);
  double d = 1.0 / b;
  double h = d;
  double delh = d;
  double q1 = 0.0;
  double q2 = 1.0;
  const double a1 = 0.25 - mu2;
  double q = a1;
  double c = a1;
  double a = -a1;
  double s = 1.0 + q * delh;
  for (int i = 1; i < kMaxIter; ++i) {
    const double di = static_cast<double>(i);
    a -= 2.0 * di;
    c = -a * c / (di + 1.0);
    const double qnew = (q1 - b * q2) / a;
    q1 = q2;
    q2 = qnew;
    q += c * qnew;
    b += 2.0;
    d = 1.0 / (b + a * d);
    delh = (b * d - 1.0) * delh;
    h += delh;
    const double dels = q * delh;
    s += dels;
    if (std::abs(dels / s) < kEps) break;
  }
  const double log_kmu = 0.5 * std::log(kPi / (2.0 * x)) - x - std::log(s);
  const double ratio = (mu + x + 0.5 - a1 * h) / x;
  return {log_kmu, log_kmu + std::log(ratio)};
}

// Standardised GIG: density proportional to x^(lambda-1) exp(-omega/2 (x + 1/x)),
// lambda >= 0. Hoermann & Leydold (2014) selection between three generators.
double gig_mode_standard(double lambda, double omega) {
  if (lambda >= 1.0) return (std::sqrt((lambda - 1.0) * (lambda - 1.0) + omega * omega) + (lambda - 1.0)) / omega;
  return omega / (std::sqrt((1.0 - lambda) * (1.0 - lambda) + omega * omega) + (1.0 - lambda));
}

double gig_rou_noshift(double lambda, double omega, RngHandle& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode_standard(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  const double ym = ((lambda + 1.0) + std::sqrt((lambda + 1.0) * (lambda + 1.0) + omega * omega)) / omega;
  const double um = std::exp(0.5 * (lambda + 1.0) * std::log(ym) - s * (ym + 1.0 / ym) - nc);
  for (;;) {
    const double u = um * rng.uniform();
    const double v = rng.uniform();
    const double x = u / v;
    if (std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

double gig_rou_shift(double lambda, double omega, RngHandle& rng) {
  const double t = 0.5 * (lambda - 1.0);
  const double s = 0.25 * omega;
  const double xm = gig_mode_standard(lambda, omega);
  const double nc = t * std::log(xm) - s * (xm + 1.0 / xm);
  // Extremes of (x - xm) sqrt(g(x)/g(xm)) are roots of x^3 + a x^2 + b x + c.
  const double a = -(2.0 * (lambda + 1.0) / omega + xm);
  const double b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
  const double c = xm;
  const double p = b - a * a / 3.0;
  const double q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
  const double fi = std::acos(std::clamp(-q / (2.0 * std::sqrt(-(p * p * p) / 27.0)), -1.0, 1.0));
  const double fak = 2.0 * std::sqrt(-p / 3.0);
  const double y1 = fak * std::cos(fi / 3.0) - a / 3.0;
  const double y2 = fak * std::cos(fi / 3.0 + 4.0 / 3.0 * kPi) - a / 3.0;
  const double uplus = (y1 - xm) * std::exp(t * std::log(y1) - s * (y1 + 1.0 / y1) - nc);
  const double uminus = (y2 - xm) * std::exp(t * std::log(y2) - s * (y2 + 1.0 / y2) - nc);
  for (;;) {
    const double u = uminus + rng.uniform() * (uplus - uminus);
    const double v = rng.uniform();
    const double x = u / v + xm;
    if (x > 0.0 && std::log(v) <= t * std::log(x) - s * (x + 1.0 / x) - nc) return x;
  }
}

// Rejection from a three-piece hat; for 0 <= lambda < 1 and small omega where
// the density is not T-concave.
double gig_small_omega(double lambda, double omega, RngHandle& rng) {
  const double xm = gig_mode_standard(lambda, omega);
  const double x0 = omega / (1.0 - lambda);
  const double k0 = std::exp((lambda - 1.0) * std::log(xm) - 0.5 * omega * (xm + 1.0 / xm));
  const double area0 = k0 * x0;
  double k1 = 0.0;
  double area1 = 0.0;
  double k2 = 0.0;
  double area2 = 0.0;
  if (x0 >= 2.0 / omega) {
    k2 = std::pow(x0, lambda - 1.0);
    area2 = k2 * 2.0 * std::exp(-omega * x0 / 2.0) / omega;
  } else {
    k1 = std::exp(-omega);
    area1 = lambda == 0.0 ? k1 * std::log(2.0 / (omega * omega))
                          : k1 / lambda * (std::pow(2.0 / omega, lambda) - std::pow(x0, lambda));
    k2 = std::pow(2.0 / omega, lambda - 1.0);
    area2 = k2 * 2.0 * std::exp(-1.0) / omega;
  }
  const double total = area0 + area1 + area2;
  const double tail_start = std::max(x0, 2.0 / omega);
  for (;;) {
    double v = total * rng.uniform();
    double x = 0.0;
    double hx = 0.0;
    if (v <= area0) {
      x = x0 * v / area0;
      hx = k0;
    } else if ((v -= area0) <= area1) {
      if (lambda == 0.0) {
        x = omega * std::exp(std::exp(omega) * v);
        hx = k1 / x;
      } else {
        x = std::pow(std::pow(x0, lambda) + lambda / k1 * v, 1.0 / lambda);
        hx = k1 * std::pow(x, lambda - 1.0);
      }
    } else {
      v -= area1;
      const double arg = std::exp(-omega / 2.0 * tail_start) - omega / (2.0 * k2) * v;
      if (arg <= 0.0) continue;
      x = -2.0 / omega * std::log(arg);
      hx = k2 * std::exp(-omega / 2.0 * x);
    }
    if (!(x > 0.0) || !std::isfinite(x)) continue;
    const double u = rng.uniform() * hx;
    if (std::log(u) <= (lambda - 1.0) * std::log(x) - omega / 2.0 * (x + 1.0 / x)) return x;
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// RngHandle

RngHandle::RngHandle(std::uint64_t seed, std::uint64_t stream) : seed_(seed), stream_(stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32),
                    0x74726565u};
  engine_.seed(seq);
}

std::uint64_t RngHandle::next_u64() { return engine_(); }

double RngHandle::uniform() {
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngHandle::normal() { return normal_(engine_); }

std::uint64_t RngHandle::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("below(0)");
  std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
  return dist(engine_);
}

// ---------------------------------------------------------------------------
// Samplers

double sample_log_gamma(double shape, double rate, RngHandle& rng) {
  require_positive(shape, "gamma shape");
  require_positive(rate, "gamma rate");
  if (shape >= 1.0) return log_gamma_unit_mt(shape, rng) - std::log(rate);
  // Boost: G(shape) = G(shape + 1) * U^(1/shape), kept in log space so that
  // shapes ~1e-4 and below do not collapse to zero.
  const double log_g = log_gamma_unit_mt(shape + 1.0, rng);
  return log_g + std::log(rng.uniform()) / shape - std::log(rate);
}

double sample_gamma(double shape, double rate, RngHandle& rng) {
  return std::clamp(std::exp(sample_log_gamma(shape, rate, rng)), std::numeric_limits<double>::min(),
                    std::numeric_limits<double>::max());
}

double sample_inverse_gamma(double shape, double scale, RngHandle& rng) {
  require_positive(shape, "inverse-gamma shape");
  require_positive(scale, "inverse-gamma scale");
  return std::clamp(std::exp(-sample_log_gamma(shape, scale, rng)), std::numeric_limits<double>::min(),
                    std::numeric_limits<double>::max());
}

std::vector<double> sample_dirichlet(std::span<const double> concentrations, RngHandle& rng) {
  if (concentrations.empty()) throw std::invalid_argument("dirichlet: empty concentration vector");
  for (double c : concentrations) require_positive(c, "dirichlet concentration");
  std::vector<double> out(concentrations.size());
  if (out.size() == 1) {
    out[0] = 1.0;
    return out;
  }
  double max_log = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sample_log_gamma(concentrations[i], 1.0, rng);
    max_log = std::max(max_log, out[i]);
  }
  double total = 0.0;
  for (double& v : out) {
    v = std::exp(v - max_log);
    total += v;
  }
  for (double& v : out) v /= total;
  return out;
}

void validate(const GigParams& params) {
  require_positive(params.a, "GIG a");
  require_positive(params.b, "GIG b");
  if (!std::isfinite(params.p)) throw std::invalid_argument("GIG p must be finite");
}

double sample_gig(const GigParams& params, RngHandle& rng) {
  validate(params);
  const double lambda = std::abs(params.p);
  const double omega = std::sqrt(params.a * params.b);
  const double scale = std::sqrt(params.b / params.a);
  double x = 0.0;
  if (lambda > 2.0 || omega > 3.0) {
    x = gig_rou_shift(lambda, omega, rng);
  } else if (lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2) {
    x = gig_rou_noshift(lambda, omega, rng);
  } else {
    x = gig_small_omega(lambda, omega, rng);
  }
  return params.p < 0.0 ? scale / x : scale * x;
}

// ---------------------------------------------------------------------------
// Bessel K and GIG moments

double log_bessel_k(double p, double x) {
  if (!(x > 0.0) || !std::isfinite(x)) {
    throw std::invalid_argument("bessel_k: x must be positive and finite, got " + std::to_string(x));
  }
  if (!std::isfinite(p)) throw std::invalid_argument("bessel_k: order must be finite");
  const double nu = std::abs(p);
  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const LogBesselPair base = log_bessel_k_base(mu, x);
  if (nl == 0) return base.log_kmu;
  // Upward recurrence K_{k+1} = 2(mu+k)/x K_k + K_{k-1}, carried as ratios.
  double log_k = base.log_kmu1;
  double ratio = std::exp(base.log_kmu1 - base.log_kmu);  // K_{mu+1}/K_mu
  for (int i = 1; i < nl; ++i) {
    ratio = 2.0 * (mu + i) / x + 1.0 / ratio;  // K_{mu+i+1}/K_{mu+i}
    log_k += std::log(ratio);
  }
  return log_k;
}

double bessel_k(double p, double x) { return std::exp(log_bessel_k(p, x)); }

double gig_mean(const GigParams& params) {
  validate(params);
  const double omega = std::sqrt(params.a * params.b);
  return std::sqrt(params.b / params.a) *
         std::exp(log_bessel_k(params.p + 1.0, omega) - log_bessel_k(params.p, omega));
}

double gig_inverse_mean(const GigParams& params) {
  validate(params);
  const double omega = std::sqrt(params.a * params.b);
  return std::sqrt(params.a / params.b) *
         std::exp(log_bessel_k(params.p - 1.0, omega) - log_bessel_k(params.p, omega));
}

double gig_mode(const GigParams& params) {
  validate(params);
  const double pm1 = params.p - 1.0;
  const double root = std::sqrt(pm1 * pm1 + params.a * params.b);
  if (pm1 >= 0.0) return (pm1 + root) / params.a;
  return params.b / (root - pm1);
}

double gig_log_normalizer(const GigParams& params) {
  validate(params);
  const double omega = std::sqrt(params.a * params.b);
  return std::log(2.0) + log_bessel_k(params.p, omega) + 0.5 * params.p * std::log(params.b / params.a);
}

double gig_log_density(double x, const GigParams& params) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return (params.p - 1.0) * std::log(x) - 0.5 * (params.a * x + params.b / x) - gig_log_normalizer(params);
}

}  // namespace treeshrink
