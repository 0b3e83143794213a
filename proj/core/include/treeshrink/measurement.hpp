// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "treeshrink/randmath.hpp"
#include "treeshrink/transform.hpp"

namespace treeshrink {

enum class SensingKind : std::uint8_t { DenseGaussian, Identity, RowMask };

std::string_view to_string(SensingKind kind);

/// Linear measurement y = H f composed with a basis synthesis f = T x, so that
/// y = Psi x with Psi = H T. Immutable after construction; apply is reentrant.
class SensingOperator {
 public:
  static SensingOperator identity(Transform basis);
  /// H is m x n, column-major.
  static SensingOperator dense(Transform basis, Eigen::MatrixXd h);
  /// Keeps the listed pixel rows of the identity (inpainting).
  static SensingOperator row_mask(Transform basis, std::vector<std::size_t> rows);

  SensingKind kind() const { return kind_; }
  std::size_t m() const { return m_; }
  std::size_t n() const { return basis_.size(); }
  const Transform& basis() const { return basis_; }
  const TreeLayout& layout() const { return basis_.layout(); }
  const Eigen::MatrixXd& matrix() const { return h_; }
  std::span<const std::size_t> mask_rows() const { return rows_; }

  /// True when Psi has orthonormal columns and m == n.
  bool orthonormal() const { return kind_ == SensingKind::Identity; }

  std::vector<double> apply_h(std::span<const double> f) const;
  std::vector<double> apply_h_adjoint(std::span<const double> y) const;
  std::vector<double> apply_psi(std::span<const double> x) const;
  std::vector<double> apply_psi_adjoint(std::span<const double> r) const;

  /// Dense m x n Psi. Cost O(n^2 m); meant for modest n.
  Eigen::MatrixXd psi_matrix() const;
  /// Psi_k^T Psi_k for every column k.
  std::vector<double> psi_column_norms() const;

 private:
  SensingOperator(SensingKind kind, Transform basis) : kind_(kind), basis_(std::move(basis)) {}

  SensingKind kind_;
  Transform basis_;
  std::size_t m_ = 0;
  Eigen::MatrixXd h_;
  std::vector<std::size_t> rows_;
};

/// floor(csr * n), at least 1.
std::size_t measurement_count(double csr, std::size_t n);

/// Dense H with i.i.d. N(0, 1) entries.
SensingOperator make_gaussian_operator(std::size_t m, std::size_t n, Transform basis, RngHandle& rng);

std::vector<double> add_gaussian_noise(std::span<const double> y, double sigma, RngHandle& rng);

struct SpikyCorruption {
  ImageGrid image;
  std::vector<std::uint8_t> mask;  // 1 where a spike was added
  std::size_t count = 0;
};

/// Each pixel independently receives an additive spike with probability rate,
/// amplitude ~ U(amp_lo, amp_hi); the result is clipped to [0, 1].
SpikyCorruption add_spiky_noise(const ImageGrid& image, double rate, double amp_lo, double amp_hi,
                                RngHandle& rng);

/// 10 log10(1 / MSE) with peak 1; +infinity when the images are identical.
double psnr(const ImageGrid& reference, const ImageGrid& estimate);
inline constexpr double kPsnrIdentical = std::numeric_limits<double>::infinity();

/// 8-bit grayscale PGM (P5) or PNG, by content. Values scaled to [0, 1].
ImageGrid read_image(const std::filesystem::path& path);
/// Format from the extension (.png, otherwise PGM). Values clipped to [0, 1].
void write_image(const std::filesystem::path& path, const ImageGrid& image);
void write_pgm(const std::filesystem::path& path, const ImageGrid& image);
void write_png(const std::filesystem::path& path, const ImageGrid& image);

enum class PriorStructure : std::uint8_t { Tree, Flat };
std::string_view to_string(PriorStructure s);
PriorStructure parse_structure(std::string_view name);

struct ExperimentSpec {
  std::string image_path;
  Basis basis = Basis::Daub4;
  int levels = 0;  // 0: deepest level leaving an 8x8 scaling block
  double csr = 0.4;
  double noise_sigma = 0.0;
  double spike_rate = 0.0;
  double spike_lo = 0.0;
  double spike_hi = 1.0;
  std::uint64_t seed = 1;
  std::string method = "mcmc";
  int iterations = 0;  // 0: method default
  int burnin = 1000;
  PriorStructure structure = PriorStructure::Tree;
  int chains = 1;

  void validate() const;
};

/// Wavelet depth leaving an 8x8 scaling block (at least 1).
int default_levels(std::size_t height, std::size_t width);

}  // namespace treeshrink
