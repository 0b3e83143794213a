// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/sampler.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "engine.hpp"

namespace treeshrink {

using detail::Design;
using detail::kPrecisionFloor;

void ChainConfig::validate() const {
  if (samples <= 0) throw std::invalid_argument("chain needs a positive number of samples");
  if (burnin < 0 || burnin >= samples) {
    throw std::invalid_argument("burn-in (" + std::to_string(burnin) + ") must be smaller than the sample count (" +
                                std::to_string(samples) + ")");
  }
  if (acceptance_window <= 0) throw std::invalid_argument("acceptance window must be positive");
  hyper.validate();
}

ImageGrid PosteriorSummary::image(const Transform& basis) const {
  if (mean.size() != basis.size()) throw std::invalid_argument("summary does not match the basis");
  ImageGrid img(basis.layout().height(), basis.layout().width());
  basis.synthesize(mean, img.values);
  return img;
}

ModelState initial_state(std::span<const double> y, const SensingOperator& op, PriorStructure structure,
                         const Hyperparameters& hyper, bool spiky) {
  hyper.validate();
  if (y.size() != op.m()) throw std::invalid_argument("measurement vector length does not match the operator");
  ModelState st;
  st.hyper = hyper;
  auto layout = std::make_shared<const TreeLayout>(op.layout());
  st.x = TreePyramid(layout);
  st.shrinkage = make_shrinkage(layout, structure);
  st.shrinkage.gamma = st.shrinkage.gamma_tilde;
  double energy = 0.0;
  for (double v : y) energy += v * v;
  energy /= static_cast<double>(y.size());
  // Noise guessed at 10% of the measurement scale; the prior on x starts
  // essentially flat so the first sweeps follow the data.
  st.noise.alpha0 = energy > 0.0 ? 1.0 / (0.01 * energy) : 1.0;
  constexpr double kWeakTau = 1e-6;
  st.shrinkage.tau0 = kWeakTau;
  std::fill(st.shrinkage.tau.begin(), st.shrinkage.tau.end(), kWeakTau);
  if (spiky) st.noise.enable_spiky(op.m());
  return st;
}

void update_alpha(ModelState& state, RngHandle& rng) {
  ShrinkageState& s = state.shrinkage;
  const auto x = state.x.coefficients();
  const std::size_t ns = s.layout->num_scaling();
  const double a0 = state.noise.alpha0;
  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    const double tau = s.tau[static_cast<std::size_t>(s.layout->group_of(ns + d))];
    const double xv = x[ns + d];
    const GigParams prm{std::max(tau * a0 * xv * xv, kPrecisionFloor), 1.0 / s.gamma_tilde[d], -0.5};
    s.alpha[d] = sample_gig(prm, rng);
  }
}

AcceptanceStats update_gamma_metropolis(ModelState& state, RngHandle& rng) {
  ShrinkageState& s = state.shrinkage;
  const TreeIndex index(*s.layout);
  AcceptanceStats stats;
  std::vector<double> inv_alpha(s.num_detail());
  for (std::size_t d = 0; d < inv_alpha.size(); ++d) inv_alpha[d] = 1.0 / s.alpha[d];
  for (std::size_t g = 0; g < index.groups.size(); ++g) {
    const std::vector<double> shapes = detail::group_shapes(s, state.hyper, g);
    const std::vector<double> child_log = detail::group_child_log(s, index, g);
    detail::LevelProblem prob;
    prob.gamma = s.group_span(s.gamma, g);
    prob.inv_scale = s.group_span(inv_alpha, g);
    prob.shape = shapes;
    prob.rate = detail::group_rate(s, state.hyper, g);
    prob.child_log = child_log;
    prob.n_children = state.hyper.n_children;
    stats += detail::metropolis_level(prob, rng);
    s.renormalize(g);
  }
  return stats;
}

// ---------------------------------------------------------------------------

struct GibbsSampler::Impl {
  Impl(std::span<const double> y, const SensingOperator& op, ModelState st)
      : design(op, y), state(std::move(st)), index(state.layout()) {
    state.validate();
    if (!op.layout().same_shape(state.layout())) throw std::invalid_argument("sampler: state and operator layouts differ");
    if (state.noise.spiky) state.noise.validate(op.m());
    fit = design.fit(state.x.coefficients());
  }

  std::span<const double> w() const {
    return state.noise.spiky ? std::span<const double>(state.noise.w) : std::span<const double>();
  }

  std::vector<double> residual() const {
    const auto y = design.y();
    std::vector<double> r(y.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = y[i] - fit[i] - (state.noise.spiky ? state.noise.w[i] : 0.0);
    return r;
  }

  Design design;
  ModelState state;
  TreeIndex index;
  std::vector<double> fit;  // Psi x for the current x
};

GibbsSampler::GibbsSampler(std::span<const double> y, const SensingOperator& op, ModelState state)
    : impl_(std::make_unique<Impl>(y, op, std::move(state))) {}
GibbsSampler::~GibbsSampler() = default;
GibbsSampler::GibbsSampler(GibbsSampler&&) noexcept = default;
GibbsSampler& GibbsSampler::operator=(GibbsSampler&&) noexcept = default;

const ModelState& GibbsSampler::state() const { return impl_->state; }
ModelState& GibbsSampler::state() { return impl_->state; }

void GibbsSampler::update_x(RngHandle& rng) {
  ModelState& st = impl_->state;
  const ShrinkageState& s = st.shrinkage;
  const std::size_t ns = s.layout->num_scaling();
  const auto groups = s.layout->group_ids();
  const double a0 = st.noise.alpha0;
  auto x = st.x.coefficients();
  impl_->fit = impl_->design.sweep(x, impl_->w(), [&](std::size_t k, double c, double dk) {
    const double lambda = k < ns ? s.tau0 : s.tau[static_cast<std::size_t>(groups[k])] * s.alpha[k - ns];
    const double prec = lambda + dk;
    return c / prec + rng.normal() / std::sqrt(a0 * prec);
  });
}

void GibbsSampler::update_alpha(RngHandle& rng) { treeshrink::update_alpha(impl_->state, rng); }

AcceptanceStats GibbsSampler::update_gamma(RngHandle& rng) { return update_gamma_metropolis(impl_->state, rng); }

void GibbsSampler::update_tau_and_alpha0(RngHandle& rng) {
  ModelState& st = impl_->state;
  ShrinkageState& s = st.shrinkage;
  const Hyperparameters& hy = st.hyper;
  const auto x = st.x.coefficients();
  const std::size_t ns = s.layout->num_scaling();
  double a0 = st.noise.alpha0;

  double scaling_sq = 0.0;
  for (std::size_t k = 0; k < ns; ++k) scaling_sq += x[k] * x[k];
  std::vector<double> weighted(s.tau.size(), 0.0);
  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    weighted[static_cast<std::size_t>(s.layout->group_of(ns + d))] += s.alpha[d] * x[ns + d] * x[ns + d];
  }
  s.tau0 = sample_gamma(hy.a0 + 0.5 * static_cast<double>(ns), hy.b0 + 0.5 * a0 * scaling_sq, rng);
  for (std::size_t g = 0; g < s.tau.size(); ++g) {
    const double n_g = static_cast<double>(s.layout->groups()[g].size());
    s.tau[g] = sample_gamma(hy.a0 + 0.5 * n_g, hy.b0 + 0.5 * a0 * weighted[g], rng);
  }

  const std::vector<double> r = impl_->residual();
  double rss = 0.0;
  for (double v : r) rss += v * v;
  double prior_energy = s.tau0 * scaling_sq;
  for (std::size_t g = 0; g < s.tau.size(); ++g) prior_energy += s.tau[g] * weighted[g];
  const double m = static_cast<double>(r.size());
  double shape = hy.a0 + 0.5 * (m + static_cast<double>(x.size()));
  if (st.noise.spiky) {
    double spike_energy = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) spike_energy += st.noise.zeta[i] * st.noise.w[i] * st.noise.w[i];
    prior_energy += st.noise.nu * spike_energy;
    shape += 0.5 * m;
  }
  a0 = sample_gamma(shape, hy.b0 + 0.5 * (rss + prior_energy), rng);
  st.noise.alpha0 = a0;
}

AcceptanceStats GibbsSampler::update_spiky(RngHandle& rng) {
  ModelState& st = impl_->state;
  NoiseState& nz = st.noise;
  if (!nz.spiky) throw InvalidState("update_spiky: the spiky noise component is disabled");
  const auto y = impl_->design.y();
  const std::size_t m = y.size();
  const double a0 = nz.alpha0;
  for (std::size_t i = 0; i < m; ++i) {
    const double r = y[i] - impl_->fit[i];
    const double shrink = 1.0 + nz.nu * nz.zeta[i];
    nz.w[i] = r / shrink + rng.normal() / std::sqrt(a0 * shrink);
  }
  for (std::size_t i = 0; i < m; ++i) {
    const GigParams prm{std::max(nz.nu * a0 * nz.w[i] * nz.w[i], kPrecisionFloor), 1.0 / nz.p[i], -0.5};
    nz.zeta[i] = sample_gig(prm, rng);
  }
  std::vector<double> inv_zeta(m), shapes(m, 1.0 / static_cast<double>(m));
  for (std::size_t i = 0; i < m; ++i) inv_zeta[i] = 1.0 / nz.zeta[i];
  detail::LevelProblem prob;
  prob.gamma = nz.pi;
  prob.inv_scale = inv_zeta;
  prob.shape = shapes;
  prob.rate = 1.0;
  const AcceptanceStats stats = detail::metropolis_level(prob, rng);
  nz.renormalize_p();
  double energy = 0.0;
  for (std::size_t i = 0; i < m; ++i) energy += nz.zeta[i] * nz.w[i] * nz.w[i];
  nz.nu = sample_gamma(st.hyper.e0 + 0.5 * static_cast<double>(m), st.hyper.f0 + 0.5 * a0 * energy, rng);
  return stats;
}

AcceptanceStats GibbsSampler::sweep(RngHandle& rng) {
  update_x(rng);
  update_alpha(rng);
  const AcceptanceStats stats = update_gamma(rng);
  update_tau_and_alpha0(rng);
  if (impl_->state.noise.spiky) update_spiky(rng);
  return stats;
}

std::vector<double> GibbsSampler::residual() const { return impl_->residual(); }

double GibbsSampler::log_joint() const {
  return log_joint_terms_with_fit(impl_->state, impl_->design.y(), impl_->fit).total();
}

// ---------------------------------------------------------------------------

namespace {

double norm2(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

PosteriorSummary run_chain(std::span<const double> y, const SensingOperator& op, const ChainConfig& config) {
  config.validate();
  const auto t0 = std::chrono::steady_clock::now();
  GibbsSampler sampler(y, op, initial_state(y, op, config.structure, config.hyper, config.spiky));
  RngHandle rng(config.seed, config.stream);

  const std::size_t n = op.n();
  const std::size_t nd = n - op.layout().num_scaling();
  PosteriorSummary out;
  out.method = "mcmc";
  out.layout = sampler.state().x.layout_ptr();
  out.mean.assign(n, 0.0);
  out.variance.assign(n, 0.0);
  out.gamma_tilde_mean.assign(nd, 0.0);
  if (config.spiky) out.w_mean.assign(op.m(), 0.0);
  for (std::size_t idx : config.track) {
    if (idx >= n) throw std::invalid_argument("tracked coefficient index out of range");
    out.tracked.push_back({idx, {}});
  }

  AcceptanceStats window;
  double window_rate = 0.0;
  std::size_t kept = 0;
  double alpha0_sum = 0.0;
  double noise_std_sum = 0.0;
  for (int it = 0; it < config.samples; ++it) {
    const AcceptanceStats acc = sampler.sweep(rng);
    window += acc;
    if ((it + 1) % config.acceptance_window == 0) {
      window_rate = window.rate();
      window = {};
    }
    const ModelState& st = sampler.state();
    if (it >= config.burnin) {
      out.acceptance += acc;
      ++kept;
      const auto x = st.x.coefficients();
      const double inv = 1.0 / static_cast<double>(kept);
      for (std::size_t k = 0; k < n; ++k) {
        // Welford; variance holds the running sum of squared deviations.
        const double delta = x[k] - out.mean[k];
        out.mean[k] += delta * inv;
        out.variance[k] += delta * (x[k] - out.mean[k]);
      }
      for (std::size_t d = 0; d < nd; ++d) out.gamma_tilde_mean[d] += st.shrinkage.gamma_tilde[d];
      if (config.spiky)
        for (std::size_t i = 0; i < out.w_mean.size(); ++i) out.w_mean[i] += st.noise.w[i];
      alpha0_sum += st.noise.alpha0;
      noise_std_sum += 1.0 / std::sqrt(st.noise.alpha0);
      for (auto& tr : out.tracked) tr.samples.push_back(x[tr.index]);
    }
    TraceRow row;
    row.iteration = it + 1;
    row.alpha0 = st.noise.alpha0;
    row.acceptance = window_rate > 0.0 || (it + 1) >= config.acceptance_window ? window_rate : window.rate();
    row.residual_norm = norm2(sampler.residual());
    row.log_joint = config.log_joint_every > 0 && (it % config.log_joint_every == 0 || it + 1 == config.samples)
                        ? sampler.log_joint()
                        : std::numeric_limits<double>::quiet_NaN();
    out.trace.push_back(row);
  }
  const double kk = static_cast<double>(kept);
  for (double& v : out.variance) v /= kk;
  for (double& v : out.gamma_tilde_mean) v /= kk;
  for (double& v : out.w_mean) v /= kk;
  out.alpha0_mean = alpha0_sum / kk;
  out.noise_std = noise_std_sum / kk;
  out.acceptance_rate = out.acceptance.rate();
  out.retained = kept;
  out.iterations = config.samples;
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

PosteriorSummary merge_summaries(std::span<const PosteriorSummary> parts) {
  if (parts.empty()) throw std::invalid_argument("merge_summaries: nothing to merge");
  if (parts.size() == 1) return parts[0];
  PosteriorSummary out = parts[0];
  const std::size_t n = out.mean.size();
  double total = 0.0;
  for (const auto& p : parts) {
    if (p.mean.size() != n) throw std::invalid_argument("merge_summaries: summaries differ in size");
    total += static_cast<double>(p.retained);
  }
  if (total <= 0.0) throw std::invalid_argument("merge_summaries: no retained samples");
  auto pool = [&](auto member) {
    std::vector<double> acc((parts[0].*member).size(), 0.0);
    for (const auto& p : parts) {
      const double wgt = static_cast<double>(p.retained) / total;
      for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += wgt * (p.*member)[i];
    }
    return acc;
  };
  std::vector<double> second(n, 0.0);
  for (const auto& p : parts) {
    const double wgt = static_cast<double>(p.retained) / total;
    for (std::size_t k = 0; k < n; ++k) second[k] += wgt * (p.variance[k] + p.mean[k] * p.mean[k]);
  }
  out.mean = pool(&PosteriorSummary::mean);
  for (std::size_t k = 0; k < n; ++k) out.variance[k] = std::max(0.0, second[k] - out.mean[k] * out.mean[k]);
  out.gamma_tilde_mean = pool(&PosteriorSummary::gamma_tilde_mean);
  out.w_mean = pool(&PosteriorSummary::w_mean);
  out.alpha0_mean = 0.0;
  out.noise_std = 0.0;
  out.acceptance = {};
  out.seconds = 0.0;
  for (std::size_t c = 0; c < parts.size(); ++c) {
    const auto& p = parts[c];
    const double wgt = static_cast<double>(p.retained) / total;
    out.alpha0_mean += wgt * p.alpha0_mean;
    out.noise_std += wgt * p.noise_std;
    out.acceptance += p.acceptance;
    out.seconds += p.seconds;
    if (c > 0) {
      for (std::size_t t = 0; t < out.tracked.size() && t < p.tracked.size(); ++t) {
        out.tracked[t].samples.insert(out.tracked[t].samples.end(), p.tracked[t].samples.begin(),
                                      p.tracked[t].samples.end());
      }
    }
  }
  out.acceptance_rate = out.acceptance.rate();
  out.retained = static_cast<std::size_t>(total);
  return out;
}

PosteriorSummary run_chains(std::span<const double> y, const SensingOperator& op, const ChainConfig& config,
                            int chains) {
  if (chains < 1) throw std::invalid_argument("need at least one chain");
  std::vector<PosteriorSummary> parts;
  parts.reserve(static_cast<std::size_t>(chains));
  for (int c = 0; c < chains; ++c) {
    ChainConfig cc = config;
    cc.stream = config.stream + static_cast<std::uint64_t>(c);
    parts.push_back(run_chain(y, op, cc));
  }
  return merge_summaries(parts);
}

void write_trace_csv(std::ostream& out, const PosteriorSummary& summary) {
  out << "iteration,log_joint,alpha0,acceptance,residual_norm,mean_change\n";
  char buf[64];
  auto num = [&](double v) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
  };
  for (const TraceRow& r : summary.trace) {
    out << r.iteration << ',' << num(r.log_joint) << ',' << num(r.alpha0) << ',' << num(r.acceptance) << ','
        << num(r.residual_norm) << ',' << num(r.mean_change) << '\n';
  }
}

}  // namespace treeshrink
