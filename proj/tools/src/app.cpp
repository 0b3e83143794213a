// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "app.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

#include "treeshrink/model.hpp"
#include "treeshrink/variational.hpp"

namespace treeshrink::app {

namespace fs = std::filesystem;

std::string version() { return TREESHRINK_VERSION; }

// ---------------------------------------------------------------------------
// Manifest

namespace {

std::string num(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

double to_double(const std::string& key, const std::string& text) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != text.size()) {
    if (text == "inf") return std::numeric_limits<double>::infinity();
    throw UserError("manifest: bad number for " + key + ": '" + text + "'");
  }
  return v;
}

}  // namespace

void write_manifest(std::ostream& out, const RunManifest& m) {
  const ExperimentSpec& s = m.spec;
  out << "# treeshrink run manifest\n";
  out << "command = " << m.command << '\n';
  out << "version = " << m.version << '\n';
  out << "image = " << s.image_path << '\n';
  out << "basis = " << to_string(s.basis) << '\n';
  out << "levels = " << s.levels << '\n';
  out << "csr = " << num(s.csr) << '\n';
  out << "noise_sigma = " << num(s.noise_sigma) << '\n';
  out << "spike_rate = " << num(s.spike_rate) << '\n';
  out << "spike_lo = " << num(s.spike_lo) << '\n';
  out << "spike_hi = " << num(s.spike_hi) << '\n';
  out << "seed = " << s.seed << '\n';
  out << "method = " << s.method << '\n';
  out << "iters = " << s.iterations << '\n';
  out << "burnin = " << s.burnin << '\n';
  out << "model = " << to_string(s.structure) << '\n';
  out << "chains = " << s.chains << '\n';
  out << "seconds = " << num(m.seconds) << '\n';
  out << "iterations_run = " << m.iterations << '\n';
  out << "psnr = " << num(m.psnr) << '\n';
  if (m.command == "denoise") {
    out << "input_psnr = " << num(m.input_psnr) << '\n';
    out << "spike_recall = " << num(m.spike_recall) << '\n';
  }
  out << "noise_std = " << num(m.noise_std) << '\n';
  out << "acceptance_rate = " << num(m.acceptance_rate) << '\n';
  for (const auto& f : m.outputs) out << "output = " << f << '\n';
}

RunManifest read_manifest(std::istream& in) {
  RunManifest m;
  ExperimentSpec& s = m.spec;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw UserError("manifest: malformed line '" + line + "'");
    const std::string key = line.substr(0, eq);
    const std::string val = line.substr(eq + 3);
    if (key == "command") m.command = val;
    else if (key == "version") m.version = val;
    else if (key == "image") s.image_path = val;
    else if (key == "basis") s.basis = parse_basis(val);
    else if (key == "levels") s.levels = static_cast<int>(to_double(key, val));
    else if (key == "csr") s.csr = to_double(key, val);
    else if (key == "noise_sigma") s.noise_sigma = to_double(key, val);
    else if (key == "spike_rate") s.spike_rate = to_double(key, val);
    else if (key == "spike_lo") s.spike_lo = to_double(key, val);
    else if (key == "spike_hi") s.spike_hi = to_double(key, val);
    else if (key == "seed") s.seed = std::stoull(val);
    else if (key == "method") s.method = val;
    else if (key == "iters") s.iterations = static_cast<int>(to_double(key, val));
    else if (key == "burnin") s.burnin = static_cast<int>(to_double(key, val));
    else if (key == "model") s.structure = parse_structure(val);
    else if (key == "chains") s.chains = static_cast<int>(to_double(key, val));
    else if (key == "seconds") m.seconds = to_double(key, val);
    else if (key == "iterations_run") m.iterations = static_cast<int>(to_double(key, val));
    else if (key == "psnr") m.psnr = to_double(key, val);
    else if (key == "input_psnr") m.input_psnr = to_double(key, val);
    else if (key == "spike_recall") m.spike_recall = to_double(key, val);
    else if (key == "noise_std") m.noise_std = to_double(key, val);
    else if (key == "acceptance_rate") m.acceptance_rate = to_double(key, val);
    else if (key == "output") m.outputs.push_back(val);
    else throw UserError("manifest: unknown key '" + key + "'");
  }
  return m;
}

// ---------------------------------------------------------------------------
// Shared plumbing

LayoutPtr make_layout(const ExperimentSpec& spec, std::size_t height, std::size_t width) {
  try {
    if (spec.basis == Basis::BlockDct8) return std::make_shared<const TreeLayout>(TreeLayout::block_dct(height, width));
    const int levels = spec.levels > 0 ? spec.levels : default_levels(height, width);
    return std::make_shared<const TreeLayout>(TreeLayout::wavelet(height, width, levels));
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
}

PosteriorSummary run_inference(std::span<const double> y, const SensingOperator& op, const ExperimentSpec& spec,
                               bool spiky) {
  if (spec.method == "mcmc") {
    ChainConfig cfg;
    cfg.samples = spec.iterations > 0 ? spec.iterations : 5000;
    cfg.burnin = spec.burnin;
    cfg.seed = spec.seed;
    cfg.spiky = spiky;
    cfg.structure = spec.structure;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw UserError(e.what());
    }
    return spec.chains > 1 ? run_chains(y, op, cfg, spec.chains) : run_chain(y, op, cfg);
  }
  SolverConfig cfg;
  try {
    parse_solver_method(spec.method, cfg);
  } catch (const std::invalid_argument& e) {
    throw UserError(std::string(e.what()) + "; use mcmc|avb|vb:<s>|em");
  }
  cfg.max_iterations = spec.iterations > 0 ? spec.iterations : 100;
  cfg.seed = spec.seed;
  cfg.spiky = spiky;
  cfg.structure = spec.structure;
  return run_solver(y, op, cfg);
}

namespace {

ImageGrid load(const ExperimentSpec& spec) {
  if (spec.image_path.empty()) throw UserError("--image is required");
  try {
    return read_image(spec.image_path);
  } catch (const std::exception& e) {
    throw UserError(e.what());
  }
}

void validate(const ExperimentSpec& spec) {
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UserError(e.what());
  }
}

std::string file_tag(const ExperimentSpec& spec) {
  std::string method = spec.method;
  std::replace(method.begin(), method.end(), ':', '-');
  return std::string(to_string(spec.structure)) + "_" + method;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UserError("cannot write " + path.string());
  out << text;
}

/// Writes image, trace CSV and manifest for one run.
void emit(const fs::path& out_dir, const std::string& stem, RunManifest& m, const ImageGrid& recon,
          const PosteriorSummary& summary) {
  const std::string image_name = stem + "_recon.png";
  const std::string trace_name = stem + "_trace.csv";
  const std::string manifest_name = stem + "_manifest.txt";
  write_image(out_dir / image_name, recon);
  {
    std::ostringstream csv;
    write_trace_csv(csv, summary);
    write_text(out_dir / trace_name, csv.str());
  }
  m.outputs.insert(m.outputs.begin(), {image_name, trace_name});
  m.outputs.push_back(manifest_name);
  std::ostringstream text;
  write_manifest(text, m);
  write_text(out_dir / manifest_name, text.str());
}

void prepare(const fs::path& out_dir) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw UserError("cannot create output directory " + out_dir.string() + ": " + ec.message());
}

ImageGrid clipped(ImageGrid img) {
  for (double& v : img.values) v = std::clamp(v, 0.0, 1.0);
  return img;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Data simulation draws from its own stream so chains are unaffected.
constexpr std::uint64_t kDataStream = 1000;

}  // namespace

std::vector<RunManifest> cmd_cs(const ExperimentSpec& spec, const fs::path& out_dir, bool ablation) {
  validate(spec);
  const ImageGrid image = load(spec);
  Transform basis(make_layout(spec, image.height, image.width));
  prepare(out_dir);

  RngHandle rng(spec.seed, kDataStream);
  const std::size_t n = basis.size();
  const SensingOperator op = make_gaussian_operator(measurement_count(spec.csr, n), n, basis, rng);
  const std::vector<double> y = add_gaussian_noise(op.apply_h(image.values), spec.noise_sigma, rng);

  std::vector<PriorStructure> models{spec.structure};
  if (ablation) models = {PriorStructure::Tree, PriorStructure::Flat};
  std::vector<RunManifest> out;
  for (PriorStructure structure : models) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec run = spec;
    run.structure = structure;
    const PosteriorSummary summary = run_inference(y, op, run, false);
    const ImageGrid recon = summary.image(basis);
    RunManifest m;
    m.command = "cs";
    m.spec = run;
    m.version = version();
    m.psnr = psnr(image, recon);
    m.noise_std = summary.noise_std;
    m.acceptance_rate = summary.acceptance_rate;
    m.iterations = summary.iterations;
    m.seconds = seconds_since(t0);
    emit(out_dir, "cs_" + file_tag(run), m, clipped(recon), summary);
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<RunManifest> cmd_denoise(const ExperimentSpec& spec, const fs::path& out_dir, bool ablation) {
  validate(spec);
  const ImageGrid image = load(spec);
  Transform basis(make_layout(spec, image.height, image.width));
  prepare(out_dir);

  RngHandle rng(spec.seed, kDataStream);
  const SpikyCorruption spiky = add_spiky_noise(image, spec.spike_rate, spec.spike_lo, spec.spike_hi, rng);
  ImageGrid noisy = spiky.image;
  noisy.values = add_gaussian_noise(noisy.values, spec.noise_sigma, rng);
  const SensingOperator op = SensingOperator::identity(basis);
  write_image(out_dir / "denoise_input.png", clipped(noisy));

  std::vector<PriorStructure> models{spec.structure};
  if (ablation) models = {PriorStructure::Tree, PriorStructure::Flat};
  std::vector<RunManifest> out;
  for (PriorStructure structure : models) {
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentSpec run = spec;
    run.structure = structure;
    const PosteriorSummary summary = run_inference(noisy.values, op, run, true);
    const ImageGrid recon = summary.image(basis);

    // Spike map |<w>| scaled to its maximum, and recall of the injected spikes
    // among the rate * n largest entries.
    const std::size_t n = image.size();
    ImageGrid spike_map(image.height, image.width);
    double peak = 0.0;
    for (std::size_t i = 0; i < n; ++i) peak = std::max(peak, std::abs(summary.w_mean[i]));
    for (std::size_t i = 0; i < n; ++i) spike_map.values[i] = peak > 0.0 ? std::abs(summary.w_mean[i]) / peak : 0.0;
    const auto top = static_cast<std::size_t>(std::llround(spec.spike_rate * static_cast<double>(n)));
    double recall = 0.0;
    if (spiky.count > 0 && top > 0) {
      std::vector<std::size_t> order(n);
      std::iota(order.begin(), order.end(), std::size_t{0});
      std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(std::min(top, n)), order.end(),
                        [&](std::size_t a, std::size_t b) {
                          const double wa = std::abs(summary.w_mean[a]), wb = std::abs(summary.w_mean[b]);
                          return wa != wb ? wa > wb : a < b;
                        });
      std::size_t hits = 0;
      for (std::size_t k = 0; k < std::min(top, n); ++k) hits += spiky.mask[order[k]];
      recall = static_cast<double>(hits) / static_cast<double>(spiky.count);
    }

    RunManifest m;
    m.command = "denoise";
    m.spec = run;
    m.version = version();
    m.psnr = psnr(image, recon);
    m.input_psnr = psnr(image, noisy);
    m.spike_recall = recall;
    m.noise_std = summary.noise_std;
    m.acceptance_rate = summary.acceptance_rate;
    m.iterations = summary.iterations;
    m.seconds = seconds_since(t0);
    const std::string stem = "denoise_" + file_tag(run);
    write_image(out_dir / (stem + "_spikes.png"), spike_map);
    m.outputs = {"denoise_input.png", stem + "_spikes.png"};
    emit(out_dir, stem, m, clipped(recon), summary);
    out.push_back(std::move(m));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prior sampling

PriorSampleReport cmd_prior_sample(const PriorSampleSpec& spec, const fs::path& out_dir) {
  if (spec.count < 1) throw UserError("--count must be >= 1");
  ExperimentSpec layout_spec;
  layout_spec.basis = spec.basis;
  layout_spec.levels = spec.levels;
  const LayoutPtr layout = make_layout(layout_spec, spec.height, spec.width);
  const Transform basis(layout);
  prepare(out_dir);

  const Hyperparameters hyper;
  RngHandle rng(spec.seed, 0);
  const int n_levels = layout->n_levels();
  PriorSampleReport report;
  std::vector<std::vector<double>> pooled(static_cast<std::size_t>(n_levels));
  std::ostringstream csv;
  csv << "draw,band,level,increment_sum,coefficient_variance\n";
  for (int k = 0; k < spec.count; ++k) {
    ShrinkageState s = prior_draw_tree(layout, hyper, rng);
    const TreePyramid x = prior_draw_coefficients(s, 1.0, rng);
    std::vector<double> sums(static_cast<std::size_t>(n_levels), 0.0);
    for (std::size_t g = 0; g < layout->groups().size(); ++g) {
      const LevelGroup& grp = layout->groups()[g];
      const auto tilde = s.group_span(s.gamma_tilde, g);
      const double sum = std::accumulate(tilde.begin(), tilde.end(), 0.0);
      const auto coeffs = x.detail(grp.band, grp.level);
      double var = 0.0;
      for (double v : coeffs) var += v * v;
      var /= static_cast<double>(coeffs.size());
      auto& pool = pooled[static_cast<std::size_t>(grp.level - 1)];
      pool.insert(pool.end(), coeffs.begin(), coeffs.end());
      sums[static_cast<std::size_t>(grp.level - 1)] = sum;
      csv << k << ',' << to_string(grp.band) << ',' << grp.level << ',' << num(sum) << ',' << num(var) << '\n';
    }
    report.increment_sums.push_back(sums);
    ImageGrid img(spec.height, spec.width);
    basis.synthesize(x.coefficients(), img.values);
    // Display scaling: map [min, max] to [0, 1].
    const auto [lo, hi] = std::minmax_element(img.values.begin(), img.values.end());
    const double a = *lo, span = *hi - *lo;
    for (double& v : img.values) v = span > 0.0 ? (v - a) / span : 0.5;
    const std::string name = "prior_" + std::to_string(k) + ".png";
    write_image(out_dir / name, img);
    report.outputs.push_back(name);
  }
  for (const auto& pool : pooled) {
    const double cnt = static_cast<double>(pool.size());
    const double mean = std::accumulate(pool.begin(), pool.end(), 0.0) / cnt;
    double m2 = 0.0, m4 = 0.0;
    for (double v : pool) {
      const double d = (v - mean) * (v - mean);
      m2 += d;
      m4 += d * d;
    }
    m2 /= cnt;
    m4 /= cnt;
    report.level_kurtosis.push_back(m2 > 0.0 ? m4 / (m2 * m2) - 3.0 : 0.0);
  }
  write_text(out_dir / "prior_stats.csv", csv.str());
  report.outputs.push_back("prior_stats.csv");
  return report;
}

}  // namespace treeshrink::app
