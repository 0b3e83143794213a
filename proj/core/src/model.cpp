// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace treeshrink {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

bool all_positive(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x) && x > 0.0; });
}

void check_simplex(std::span<const double> v, const char* what) {
  double sum = 0.0;
  for (double x : v) {
    if (!(x >= 0.0) || !std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": invalid entry");
    sum += x;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(std::string(what) + ": does not sum to 1");
}

double log_normal_density(double x, double precision) {
  return 0.5 * (std::log(precision) - kLog2Pi) - 0.5 * precision * x * x;
}

double log_gamma_density(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

// InvGa(1, scale): scale / x^2 * exp(-scale / x).
double log_inv_gamma1_density(double x, double scale) {
  return std::log(scale) - 2.0 * std::log(x) - scale / x;
}

}  // namespace

void Hyperparameters::validate() const {
  if (!(a0 > 0 && b0 > 0 && root_rate > 0 && e0 > 0 && f0 > 0)) {
    throw std::invalid_argument("hyperparameters must be positive");
  }
  if (n_children != kChildrenPerNode) throw std::invalid_argument("only quadtrees (n_c = 4) are supported");
}

TreeIndex::TreeIndex(const TreeLayout& layout) : num_scaling(layout.num_scaling()) {
  groups.assign(layout.groups().begin(), layout.groups().end());
  const std::size_t nd = layout.num_coefficients() - num_scaling;
  group.assign(nd, -1);
  parent.assign(nd, -1);
  children.assign(kChildrenPerNode * nd, 0);
  child_flag.assign(nd, 0);
  const int levels = layout.n_levels();
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const LevelGroup& g = groups[gi];
    const std::size_t b = g.offset - num_scaling;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const std::size_t d = b + i;
      group[d] = static_cast<std::int32_t>(gi);
      if (g.level > 1) parent[d] = static_cast<std::int64_t>(begin(gi - 1) + layout.parent_index(g, i));
      if (g.level < levels) {
        child_flag[d] = 1;
        const auto kids = layout.child_indices(g, i);
        for (int c = 0; c < kChildrenPerNode; ++c) {
          children[kChildrenPerNode * d + c] = static_cast<std::uint32_t>(begin(gi + 1) + kids[c]);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// ShrinkageState

std::size_t ShrinkageState::detail_begin(std::size_t g) const {
  return layout->groups()[g].offset - layout->num_scaling();
}

std::span<double> ShrinkageState::group_span(std::vector<double>& v, std::size_t g) const {
  return std::span<double>(v).subspan(detail_begin(g), layout->groups()[g].size());
}

std::span<const double> ShrinkageState::group_span(const std::vector<double>& v, std::size_t g) const {
  return std::span<const double>(v).subspan(detail_begin(g), layout->groups()[g].size());
}

void ShrinkageState::renormalize(std::size_t g) {
  const auto src = group_span(gamma, g);
  auto dst = group_span(gamma_tilde, g);
  double sum = 0.0;
  for (double v : src) sum += v;
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / sum;
}

void ShrinkageState::renormalize_all() {
  for (std::size_t g = 0; g < layout->groups().size(); ++g) renormalize(g);
}

void ShrinkageState::validate() const {
  if (!layout) throw std::invalid_argument("shrinkage state has no layout");
  const std::size_t nd = layout->num_coefficients() - layout->num_scaling();
  if (gamma.size() != nd || gamma_tilde.size() != nd || alpha.size() != nd) {
    throw std::invalid_argument("shrinkage state: vector sizes do not match the layout");
  }
  if (tau.size() != layout->groups().size()) throw std::invalid_argument("shrinkage state: tau size");
  if (!all_positive(gamma) || !all_positive(alpha) || !all_positive(tau) || !(tau0 > 0.0)) {
    throw std::invalid_argument("shrinkage state: non-positive entries");
  }
  for (std::size_t g = 0; g < layout->groups().size(); ++g) check_simplex(group_span(gamma_tilde, g), "gamma_tilde");
}

GammaShapeRate gamma_prior(const ShrinkageState& s, const Hyperparameters& hyper, std::size_t d) {
  const std::size_t ns = s.layout->num_scaling();
  const int g = s.layout->group_of(d + ns);
  const LevelGroup& grp = s.layout->groups()[static_cast<std::size_t>(g)];
  const double n_g = static_cast<double>(grp.size());
  if (s.structure == PriorStructure::Flat) {
    return {hyper.flat_shape > 0.0 ? hyper.flat_shape : 1.0 / n_g, 1.0};
  }
  if (grp.level == 1) return {1.0 / n_g, hyper.root_rate};
  const LevelGroup& up = s.layout->groups()[static_cast<std::size_t>(g) - 1];
  const std::size_t parent = (up.offset - ns) + s.layout->parent_index(grp, d - (grp.offset - ns));
  return {s.gamma_tilde[parent] / hyper.n_children, 1.0};
}

// ---------------------------------------------------------------------------
// NoiseState

void NoiseState::enable_spiky(std::size_t m) {
  spiky = true;
  w.assign(m, 0.0);
  zeta.assign(m, 1.0);
  pi.assign(m, 1.0 / static_cast<double>(m));
  p.assign(m, 1.0 / static_cast<double>(m));
  nu = 1.0;
}

void NoiseState::renormalize_p() {
  double sum = 0.0;
  for (double v : pi) sum += v;
  for (std::size_t i = 0; i < pi.size(); ++i) p[i] = pi[i] / sum;
}

void NoiseState::validate(std::size_t m) const {
  if (!(alpha0 > 0.0) || !std::isfinite(alpha0)) throw std::invalid_argument("alpha0 must be positive");
  if (!spiky) return;
  if (w.size() != m || zeta.size() != m || pi.size() != m || p.size() != m) {
    throw std::invalid_argument("spiky state: vector sizes do not match m");
  }
  if (!all_positive(zeta) || !all_positive(pi) || !(nu > 0.0)) {
    throw std::invalid_argument("spiky state: non-positive entries");
  }
  check_simplex(p, "p");
}

void ModelState::validate() const {
  hyper.validate();
  shrinkage.validate();
  if (!x.layout_ptr() || !x.layout().same_shape(*shrinkage.layout)) {
    throw std::invalid_argument("model state: coefficient and shrinkage layouts differ");
  }
}

// ---------------------------------------------------------------------------
// Prior draws

ShrinkageState make_shrinkage(LayoutPtr layout, PriorStructure structure) {
  if (!layout) throw std::invalid_argument("make_shrinkage: missing layout");
  ShrinkageState s;
  s.structure = structure;
  const std::size_t nd = layout->num_coefficients() - layout->num_scaling();
  s.gamma.assign(nd, 1.0);
  s.gamma_tilde.assign(nd, 0.0);
  s.alpha.assign(nd, 1.0);
  s.tau.assign(layout->groups().size(), 1.0);
  s.layout = std::move(layout);
  s.renormalize_all();
  return s;
}

std::vector<double> normalize_gamma(std::span<const double> gamma) {
  if (gamma.empty()) throw std::invalid_argument("normalize_gamma: empty input");
  double sum = 0.0;
  for (double v : gamma) {
    if (!(v > 0.0) || !std::isfinite(v)) throw std::invalid_argument("normalize_gamma: entries must be positive");
    sum += v;
  }
  std::vector<double> out(gamma.size());
  for (std::size_t i = 0; i < gamma.size(); ++i) out[i] = gamma[i] / sum;
  return out;
}

ShrinkageState prior_draw_tree(LayoutPtr layout, const Hyperparameters& hyper, RngHandle& rng) {
  hyper.validate();
  ShrinkageState s = make_shrinkage(std::move(layout), PriorStructure::Tree);
  // Groups are band-major with levels ascending, so parents are always drawn
  // and normalized before their children.
  for (std::size_t g = 0; g < s.layout->groups().size(); ++g) {
    const std::size_t b = s.detail_begin(g);
    const std::size_t size = s.layout->groups()[g].size();
    for (std::size_t d = b; d < b + size; ++d) {
      const GammaShapeRate sr = gamma_prior(s, hyper, d);
      s.gamma[d] = std::max(sample_gamma(sr.shape, sr.rate, rng), kGammaFloor);
    }
    s.renormalize(g);
  }
  return s;
}

ShrinkageState prior_draw_flat(LayoutPtr layout, const Hyperparameters& hyper, RngHandle& rng) {
  hyper.validate();
  ShrinkageState s = make_shrinkage(std::move(layout), PriorStructure::Flat);
  for (std::size_t g = 0; g < s.layout->groups().size(); ++g) {
    const std::size_t b = s.detail_begin(g);
    const std::size_t size = s.layout->groups()[g].size();
    for (std::size_t d = b; d < b + size; ++d) {
      const GammaShapeRate sr = gamma_prior(s, hyper, d);
      s.gamma[d] = std::max(sample_gamma(sr.shape, sr.rate, rng), kGammaFloor);
    }
    s.renormalize(g);
  }
  return s;
}

TreePyramid prior_draw_coefficients(ShrinkageState& s, double alpha0, RngHandle& rng) {
  s.validate();
  if (!(alpha0 > 0.0)) throw std::invalid_argument("alpha0 must be positive");
  const std::size_t ns = s.layout->num_scaling();
  std::vector<double> x(s.layout->num_coefficients());
  for (std::size_t k = 0; k < ns; ++k) x[k] = rng.normal() / std::sqrt(s.tau0 * alpha0);
  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    s.alpha[d] = sample_inverse_gamma(1.0, 1.0 / (2.0 * s.gamma_tilde[d]), rng);
    const double tau = s.tau[static_cast<std::size_t>(s.layout->group_of(d + ns))];
    x[ns + d] = rng.normal() / std::sqrt(tau * s.alpha[d] * alpha0);
  }
  return TreePyramid(s.layout, std::move(x));
}

// ---------------------------------------------------------------------------
// Log joint

LogJointTerms log_joint_terms(const ModelState& state, std::span<const double> y, const SensingOperator& op) {
  if (!op.layout().same_shape(state.layout())) throw std::invalid_argument("log_joint: operator layout differs");
  if (y.size() != op.m()) throw std::invalid_argument("log_joint: y has the wrong length");
  return log_joint_terms_with_fit(state, y, op.apply_psi(state.x.coefficients()));
}

LogJointTerms log_joint_terms_with_fit(const ModelState& state, std::span<const double> y,
                                       std::span<const double> fit) {
  state.validate();
  if (fit.size() != y.size()) throw std::invalid_argument("log_joint: fit and y lengths differ");
  const NoiseState& noise = state.noise;
  noise.validate(y.size());
  const ShrinkageState& s = state.shrinkage;
  const Hyperparameters& hy = state.hyper;
  const double a0 = noise.alpha0;
  LogJointTerms t;

  double rss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double r = y[i] - fit[i] - (noise.spiky ? noise.w[i] : 0.0);
    rss += r * r;
  }
  const double m = static_cast<double>(y.size());
  t.likelihood = 0.5 * m * (std::log(a0) - kLog2Pi) - 0.5 * a0 * rss;

  const auto x = state.x.coefficients();
  const std::size_t ns = s.layout->num_scaling();
  for (std::size_t k = 0; k < ns; ++k) t.scaling_prior += log_normal_density(x[k], s.tau0 * a0);
  for (std::size_t d = 0; d < s.num_detail(); ++d) {
    const double tau = s.tau[static_cast<std::size_t>(s.layout->group_of(d + ns))];
    t.coefficient_prior += log_normal_density(x[ns + d], tau * s.alpha[d] * a0);
    t.alpha_prior += log_inv_gamma1_density(s.alpha[d], 1.0 / (2.0 * s.gamma_tilde[d]));
    const GammaShapeRate sr = gamma_prior(s, hy, d);
    t.gamma_prior += log_gamma_density(s.gamma[d], sr.shape, sr.rate);
  }

  t.scale_prior = log_gamma_density(s.tau0, hy.a0, hy.b0) + log_gamma_density(a0, hy.a0, hy.b0);
  for (double tau : s.tau) t.scale_prior += log_gamma_density(tau, hy.a0, hy.b0);

  if (noise.spiky) {
    const double shape = 1.0 / m;
    for (std::size_t i = 0; i < y.size(); ++i) {
      t.spiky_prior += log_normal_density(noise.w[i], a0 * noise.nu * noise.zeta[i]);
      t.spiky_prior += log_inv_gamma1_density(noise.zeta[i], 1.0 / (2.0 * noise.p[i]));
      t.spiky_prior += log_gamma_density(noise.pi[i], shape, 1.0);
    }
    t.spiky_prior += log_gamma_density(noise.nu, hy.e0, hy.f0);
  }
  return t;
}

double log_joint(const ModelState& state, std::span<const double> y, const SensingOperator& op) {
  return log_joint_terms(state, y, op).total();
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::string_view kMagic = "treeshrink-state";
constexpr int kFormatVersion = 1;

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& token) {
  double v = 0.0;
  const auto res = std::from_chars(token.data(), token.data() + token.size(), v);
  if (res.ec != std::errc() || res.ptr != token.data() + token.size()) {
    if (token == "inf") return std::numeric_limits<double>::infinity();
    throw std::invalid_argument("state file: bad number '" + token + "'");
  }
  return v;
}

void write_vector(std::ostream& out, std::string_view key, const std::vector<double>& v) {
  out << key << ' ' << v.size();
  for (double x : v) out << ' ' << format_double(x);
  out << '\n';
}

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream expect(std::string_view key) {
    std::string line;
    while (std::getline(in_, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ss(line);
      std::string k;
      ss >> k;
      if (k != key) throw std::invalid_argument("state file: expected '" + std::string(key) + "', got '" + k + "'");
      return ss;
    }
    throw std::invalid_argument("state file: missing '" + std::string(key) + "'");
  }

  double scalar(std::string_view key) {
    auto ss = expect(key);
    std::string tok;
    ss >> tok;
    return parse_double(tok);
  }

  std::vector<double> vector(std::string_view key) {
    auto ss = expect(key);
    std::size_t n = 0;
    if (!(ss >> n)) throw std::invalid_argument("state file: missing length for '" + std::string(key) + "'");
    std::vector<double> v(n);
    std::string tok;
    for (std::size_t i = 0; i < n; ++i) {
      if (!(ss >> tok)) throw std::invalid_argument("state file: short vector '" + std::string(key) + "'");
      v[i] = parse_double(tok);
    }
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_state(std::ostream& out, const ModelState& state) {
  const TreeLayout& L = state.layout();
  const Hyperparameters& h = state.hyper;
  const ShrinkageState& s = state.shrinkage;
  const NoiseState& nz = state.noise;
  out << kMagic << ' ' << kFormatVersion << '\n';
  out << "layout " << to_string(L.basis()) << ' ' << L.height() << ' ' << L.width() << ' ' << L.n_levels() << '\n';
  out << "structure " << to_string(s.structure) << '\n';
  out << "hyper " << format_double(h.a0) << ' ' << format_double(h.b0) << ' ' << format_double(h.root_rate) << ' '
      << h.n_children << ' ' << format_double(h.e0) << ' ' << format_double(h.f0) << ' '
      << format_double(h.flat_shape) << '\n';
  out << "alpha0 " << format_double(nz.alpha0) << '\n';
  out << "tau0 " << format_double(s.tau0) << '\n';
  write_vector(out, "tau", s.tau);
  write_vector(out, "x", flatten(state.x));
  write_vector(out, "gamma", s.gamma);
  write_vector(out, "gamma_tilde", s.gamma_tilde);
  write_vector(out, "alpha", s.alpha);
  out << "spiky " << (nz.spiky ? 1 : 0) << '\n';
  out << "nu " << format_double(nz.nu) << '\n';
  write_vector(out, "w", nz.w);
  write_vector(out, "zeta", nz.zeta);
  write_vector(out, "pi", nz.pi);
  write_vector(out, "p", nz.p);
  out << "end\n";
}

ModelState load_state(std::istream& in) {
  LineReader rd(in);
  {
    auto ss = rd.expect(kMagic);
    int version = 0;
    ss >> version;
    if (version != kFormatVersion) throw std::invalid_argument("state file: unsupported version");
  }
  LayoutPtr layout;
  {
    auto ss = rd.expect("layout");
    std::string basis;
    std::size_t h = 0, w = 0;
    int levels = 0;
    ss >> basis >> h >> w >> levels;
    if (!ss) throw std::invalid_argument("state file: bad layout line");
    layout = std::make_shared<const TreeLayout>(parse_basis(basis) == Basis::Daub4 ? TreeLayout::wavelet(h, w, levels)
                                                                                    : TreeLayout::block_dct(h, w));
  }
  PriorStructure structure;
  {
    auto ss = rd.expect("structure");
    std::string name;
    ss >> name;
    structure = parse_structure(name);
  }
  ModelState st;
  {
    auto ss = rd.expect("hyper");
    std::string a0, b0, rr, e0, f0, fs;
    int nc = 0;
    ss >> a0 >> b0 >> rr >> nc >> e0 >> f0 >> fs;
    if (!ss) throw std::invalid_argument("state file: bad hyper line");
    st.hyper = {parse_double(a0), parse_double(b0), parse_double(rr), nc, parse_double(e0), parse_double(f0),
                parse_double(fs)};
  }
  st.noise.alpha0 = rd.scalar("alpha0");
  st.shrinkage.layout = layout;
  st.shrinkage.structure = structure;
  st.shrinkage.tau0 = rd.scalar("tau0");
  st.shrinkage.tau = rd.vector("tau");
  st.x = unflatten(rd.vector("x"), layout);
  st.shrinkage.gamma = rd.vector("gamma");
  st.shrinkage.gamma_tilde = rd.vector("gamma_tilde");
  st.shrinkage.alpha = rd.vector("alpha");
  st.noise.spiky = rd.scalar("spiky") != 0.0;
  st.noise.nu = rd.scalar("nu");
  st.noise.w = rd.vector("w");
  st.noise.zeta = rd.vector("zeta");
  st.noise.pi = rd.vector("pi");
  st.noise.p = rd.vector("p");
  rd.expect("end");
  st.validate();
  if (st.noise.spiky) st.noise.validate(st.noise.w.size());
  return st;
}

// ---------------------------------------------------------------------------
// Synthetic signal

TreePyramid draw_tree_sparse_signal(LayoutPtr layout, const TreeSignalConfig& cfg, RngHandle& rng) {
  if (!layout) throw std::invalid_argument("draw_tree_sparse_signal: missing layout");
  const TreeIndex index(*layout);
  const std::size_t ns = layout->num_scaling();
  std::vector<double> x(layout->num_coefficients(), 0.0);
  for (std::size_t k = 0; k < ns; ++k) x[k] = cfg.scaling_mean + cfg.scaling_sd * rng.normal();
  std::vector<std::uint8_t> active(index.group.size(), 0);
  for (std::size_t g = 0; g < index.groups.size(); ++g) {
    const LevelGroup& grp = index.groups[g];
    const double sd = cfg.root_sd * std::pow(cfg.level_decay, grp.level - 1);
    for (std::size_t d = index.begin(g); d < index.begin(g) + grp.size(); ++d) {
      const double p_on = index.parent[d] < 0 ? cfg.p_root_active
                          : active[static_cast<std::size_t>(index.parent[d])] ? cfg.p_child_active
                                                                                : 0.0;
      active[d] = rng.uniform() < p_on ? 1 : 0;
      x[ns + d] = (active[d] ? sd : sd * cfg.inactive_sd) * rng.normal();
    }
  }
  return TreePyramid(std::move(layout), std::move(x));
}

}  // namespace treeshrink
