// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/measurement.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>

namespace treeshrink {

std::string_view to_string(SensingKind kind) {
  switch (kind) {
    case SensingKind::DenseGaussian: return "dense-gaussian";
    case SensingKind::Identity: return "identity";
    case SensingKind::RowMask: return "row-mask";
  }
  return "?";
}

SensingOperator SensingOperator::identity(Transform basis) {
  SensingOperator op(SensingKind::Identity, std::move(basis));
  op.m_ = op.n();
  return op;
}

SensingOperator SensingOperator::dense(Transform basis, Eigen::MatrixXd h) {
  SensingOperator op(SensingKind::DenseGaussian, std::move(basis));
  if (static_cast<std::size_t>(h.cols()) != op.n()) {
    throw std::invalid_argument("dense operator: H has " + std::to_string(h.cols()) +
                                " columns, basis has " + std::to_string(op.n()));
  }
  if (h.rows() == 0 || static_cast<std::size_t>(h.rows()) > op.n()) {
    throw std::invalid_argument("dense operator: need 0 < m <= n");
  }
  if (!h.allFinite()) throw std::invalid_argument("dense operator: non-finite entries");
  op.m_ = static_cast<std::size_t>(h.rows());
  op.h_ = std::move(h);
  return op;
}

SensingOperator SensingOperator::row_mask(Transform basis, std::vector<std::size_t> rows) {
  SensingOperator op(SensingKind::RowMask, std::move(basis));
  if (rows.empty() || rows.size() > op.n()) throw std::invalid_argument("row mask: need 0 < m <= n");
  for (std::size_t r : rows) {
    if (r >= op.n()) throw std::invalid_argument("row mask: index out of range");
  }
  op.m_ = rows.size();
  op.rows_ = std::move(rows);
  return op;
}

std::vector<double> SensingOperator::apply_h(std::span<const double> f) const {
  if (f.size() != n()) throw std::invalid_argument("apply_h: expected length " + std::to_string(n()));
  switch (kind_) {
    case SensingKind::Identity: return {f.begin(), f.end()};
    case SensingKind::RowMask: {
      std::vector<double> y(m_);
      for (std::size_t i = 0; i < m_; ++i) y[i] = f[rows_[i]];
      return y;
    }
    case SensingKind::DenseGaussian: {
      std::vector<double> y(m_);
      Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(m_)) =
          h_ * Eigen::Map<const Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(f.size()));
      return y;
    }
  }
  return {};
}

std::vector<double> SensingOperator::apply_h_adjoint(std::span<const double> y) const {
  if (y.size() != m_) throw std::invalid_argument("apply_h_adjoint: expected length " + std::to_string(m_));
  switch (kind_) {
    case SensingKind::Identity: return {y.begin(), y.end()};
    case SensingKind::RowMask: {
      std::vector<double> f(n(), 0.0);
      for (std::size_t i = 0; i < m_; ++i) f[rows_[i]] += y[i];
      return f;
    }
    case SensingKind::DenseGaussian: {
      std::vector<double> f(n());
      Eigen::Map<Eigen::VectorXd>(f.data(), static_cast<Eigen::Index>(n())) =
          h_.transpose() * Eigen::Map<const Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(m_));
      return f;
    }
  }
  return {};
}

std::vector<double> SensingOperator::apply_psi(std::span<const double> x) const {
  if (x.size() != n()) throw std::invalid_argument("apply_psi: expected length " + std::to_string(n()));
  std::vector<double> f(n());
  basis_.synthesize(x, f);
  return apply_h(f);
}

std::vector<double> SensingOperator::apply_psi_adjoint(std::span<const double> r) const {
  const std::vector<double> f = apply_h_adjoint(r);
  std::vector<double> x(n());
  basis_.analyze(f, x);
  return x;
}

Eigen::MatrixXd SensingOperator::psi_matrix() const {
  const std::size_t nn = n();
  Eigen::MatrixXd psi(static_cast<Eigen::Index>(m_), static_cast<Eigen::Index>(nn));
  if (kind_ == SensingKind::DenseGaussian) {
    // Psi^T = T^T H^T: analyze every row of H.
    std::vector<double> row(nn), coeffs(nn);
    for (std::size_t i = 0; i < m_; ++i) {
      for (std::size_t j = 0; j < nn; ++j) row[j] = h_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      basis_.analyze(row, coeffs);
      for (std::size_t k = 0; k < nn; ++k) psi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = coeffs[k];
    }
    return psi;
  }
  std::vector<double> e(nn, 0.0), col(nn);
  for (std::size_t k = 0; k < nn; ++k) {
    e[k] = 1.0;
    basis_.synthesize(e, col);
    e[k] = 0.0;
    for (std::size_t i = 0; i < m_; ++i) {
      const std::size_t src = kind_ == SensingKind::RowMask ? rows_[i] : i;
      psi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = col[src];
    }
  }
  return psi;
}

std::vector<double> SensingOperator::psi_column_norms() const {
  if (kind_ == SensingKind::Identity) return std::vector<double>(n(), 1.0);
  const Eigen::MatrixXd psi = psi_matrix();
  std::vector<double> d(n());
  for (std::size_t k = 0; k < n(); ++k) d[k] = psi.col(static_cast<Eigen::Index>(k)).squaredNorm();
  return d;
}

std::size_t measurement_count(double csr, std::size_t n) {
  if (!(csr > 0.0 && csr <= 1.0)) throw std::invalid_argument("CS ratio must lie in (0, 1]");
  const auto m = static_cast<std::size_t>(std::floor(csr * static_cast<double>(n)));
  return std::max<std::size_t>(m, 1);
}

SensingOperator make_gaussian_operator(std::size_t m, std::size_t n, Transform basis, RngHandle& rng) {
  if (n != basis.size()) throw std::invalid_argument("make_gaussian_operator: n does not match the basis");
  if (m == 0 || m > n) {
    throw std::invalid_argument("make_gaussian_operator: need 0 < m <= n, got m=" + std::to_string(m) +
                                " n=" + std::to_string(n));
  }
  Eigen::MatrixXd h(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
  // Filled row by row so the draw order does not depend on storage order.
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j) h(i, j) = rng.normal();
  return SensingOperator::dense(std::move(basis), std::move(h));
}

std::vector<double> add_gaussian_noise(std::span<const double> y, double sigma, RngHandle& rng) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("noise sigma must be >= 0");
  std::vector<double> out(y.begin(), y.end());
  if (sigma == 0.0) return out;
  for (double& v : out) v += sigma * rng.normal();
  return out;
}

SpikyCorruption add_spiky_noise(const ImageGrid& image, double rate, double amp_lo, double amp_hi,
                                RngHandle& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("spike rate must lie in [0, 1]");
  if (!(amp_lo <= amp_hi)) throw std::invalid_argument("spike range must satisfy lo <= hi");
  SpikyCorruption out{image, std::vector<std::uint8_t>(image.size(), 0), 0};
  for (std::size_t i = 0; i < image.size(); ++i) {
    if (rng.uniform() >= rate) continue;
    const double amp = amp_lo + (amp_hi - amp_lo) * rng.uniform();
    out.image.values[i] = std::clamp(out.image.values[i] + amp, 0.0, 1.0);
    out.mask[i] = 1;
    ++out.count;
  }
  return out;
}

double psnr(const ImageGrid& reference, const ImageGrid& estimate) {
  if (reference.height != estimate.height || reference.width != estimate.width ||
      reference.values.size() != estimate.values.size()) {
    throw std::invalid_argument("psnr: image shapes differ");
  }
  if (reference.values.empty()) throw std::invalid_argument("psnr: empty images");
  double sse = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double d = reference.values[i] - estimate.values[i];
    sse += d * d;
  }
  if (sse == 0.0) return kPsnrIdentical;
  const double mse = sse / static_cast<double>(reference.size());
  return -10.0 * std::log10(mse);
}

// ---------------------------------------------------------------------------
// Image files

namespace {

std::uint8_t to_byte(double v) {
  return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
}

void skip_pgm_space(std::istream& in) {
  for (;;) {
    const int c = in.peek();
    if (c == '#') {
      std::string line;
      std::getline(in, line);
    } else if (std::isspace(c)) {
      in.get();
    } else {
      return;
    }
  }
}

ImageGrid read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open image: " + path.string());
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  if (magic != "P5") throw std::invalid_argument("not a binary PGM (P5) or PNG file: " + path.string());
  std::size_t w = 0, h = 0;
  int maxval = 0;
  skip_pgm_space(in);
  in >> w;
  skip_pgm_space(in);
  in >> h;
  skip_pgm_space(in);
  in >> maxval;
  in.get();
  if (!in || w == 0 || h == 0 || maxval <= 0 || maxval > 255) {
    throw std::invalid_argument("unsupported PGM header (need 8-bit P5): " + path.string());
  }
  std::vector<unsigned char> raw(w * h);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!in) throw std::invalid_argument("truncated PGM data: " + path.string());
  ImageGrid img(h, w);
  for (std::size_t i = 0; i < raw.size(); ++i) img.values[i] = raw[i] / 255.0;
  return img;
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

ImageGrid read_png(const std::filesystem::path& path) {
  png_image image{};
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) {
    throw std::invalid_argument("cannot read PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> buffer(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
    std::string msg = image.message;
    png_image_free(&image);
    throw std::invalid_argument("cannot decode PNG " + path.string() + ": " + msg);
  }
  ImageGrid img(image.height, image.width);
  for (std::size_t i = 0; i < img.size(); ++i) img.values[i] = buffer[i] / 255.0;
  return img;
}

}  // namespace

ImageGrid read_image(const std::filesystem::path& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) throw std::invalid_argument("cannot open image: " + path.string());
  unsigned char sig[8] = {};
  probe.read(reinterpret_cast<char*>(sig), 8);
  probe.close();
  if (png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  return read_pgm(path);
}

void write_pgm(const std::filesystem::path& path, const ImageGrid& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::invalid_argument("cannot write " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> raw(image.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = static_cast<char>(to_byte(image.values[i]));
  out.write(raw.data(), static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("write failed: " + path.string());
}

void write_png(const std::filesystem::path& path, const ImageGrid& image) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_GRAY;
  std::vector<png_byte> raw(image.size());
  for (std::size_t i = 0; i < raw.size(); ++i) raw[i] = to_byte(image.values[i]);
  if (!png_image_write_to_file(&png, path.c_str(), 0, raw.data(), 0, nullptr)) {
    throw std::runtime_error("cannot write PNG " + path.string() + ": " + png.message);
  }
}

void write_image(const std::filesystem::path& path, const ImageGrid& image) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    write_png(path, image);
  } else {
    write_pgm(path, image);
  }
}

// ---------------------------------------------------------------------------
// Experiment description

std::string_view to_string(PriorStructure s) { return s == PriorStructure::Tree ? "tree" : "flat"; }

PriorStructure parse_structure(std::string_view name) {
  if (name == "tree") return PriorStructure::Tree;
  if (name == "flat") return PriorStructure::Flat;
  throw std::invalid_argument("unknown model structure '" + std::string(name) + "' (tree|flat)");
}

int default_levels(std::size_t height, std::size_t width) {
  int levels = 0;
  std::size_t h = height, w = width;
  while (h > 8 && w > 8 && h % 2 == 0 && w % 2 == 0) {
    h /= 2;
    w /= 2;
    ++levels;
  }
  return std::max(levels, 1);
}

void ExperimentSpec::validate() const {
  if (!(csr > 0.0 && csr <= 1.0)) throw std::invalid_argument("--csr must lie in (0, 1]");
  if (!(noise_sigma >= 0.0)) throw std::invalid_argument("--noise-sigma must be >= 0");
  if (!(spike_rate >= 0.0 && spike_rate <= 1.0)) throw std::invalid_argument("--spike-rate must lie in [0, 1]");
  if (!(spike_lo <= spike_hi)) throw std::invalid_argument("--spike-range must satisfy lo <= hi");
  if (levels < 0) throw std::invalid_argument("--levels must be >= 0");
  if (iterations < 0 || burnin < 0) throw std::invalid_argument("iteration counts must be >= 0");
  if (chains < 1) throw std::invalid_argument("--chains must be >= 1");
}

}  // namespace treeshrink
