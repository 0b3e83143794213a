// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace treeshrink {

/// Row-major 2D intensity array.
struct ImageGrid {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> values;

  ImageGrid() = default;
  ImageGrid(std::size_t h, std::size_t w, double fill = 0.0)
      : height(h), width(w), values(h * w, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return values[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return values[r * width + c]; }
  std::size_t size() const { return values.size(); }
};

enum class Band : std::uint8_t { LL = 0, HH = 1, HL = 2, LH = 3 };
enum class Basis : std::uint8_t { Daub4, BlockDct8 };

std::string_view to_string(Band band);
std::string_view to_string(Basis basis);
Basis parse_basis(std::string_view name);

/// Detail bands in flattening order.
inline constexpr std::array<Band, 3> kDetailBands{Band::HH, Band::HL, Band::LH};
inline constexpr int kChildrenPerNode = 4;

/// One (band, level) slice of the quadtree. Nodes are stored row-major on a
/// rows x cols grid; level l has (root_rows * 2^(l-1)) x (root_cols * 2^(l-1))
/// nodes, so the parent of grid cell (r, c) is (r/2, c/2) one level up.
struct LevelGroup {
  Band band = Band::HH;
  int level = 1;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t offset = 0;  // first flat index

  std::size_t size() const { return rows * cols; }
};

/// Location of one coefficient in the tree. Scaling coefficients have
/// band LL, level 0, no parent and no children.
struct NodeRecord {
  Band band = Band::LL;
  int level = 0;
  std::size_t index = 0;
  std::size_t flat = 0;
  std::optional<std::size_t> parent;     // flat index
  std::vector<std::size_t> children;     // flat indices, empty at the leaf level
  std::size_t plane_row = 0;             // position in the coefficient plane
  std::size_t plane_col = 0;
};

/// Quadtree organisation of a wavelet or 8x8 block-DCT coefficient plane.
///
/// Flat ordering: the scaling block first (row-major), then for each band in
/// kDetailBands order, levels 1..L, each level row-major.
class TreeLayout {
 public:
  static TreeLayout wavelet(std::size_t height, std::size_t width, int levels);
  static TreeLayout block_dct(std::size_t height, std::size_t width);

  Basis basis() const { return basis_; }
  std::size_t height() const { return height_; }
  std::size_t width() const { return width_; }
  int n_levels() const { return levels_; }
  std::size_t num_coefficients() const { return height_ * width_; }
  std::size_t num_scaling() const { return root_rows_ * root_cols_; }
  std::size_t root_rows() const { return root_rows_; }
  std::size_t root_cols() const { return root_cols_; }

  /// Detail groups in flat order (band-major, then level).
  std::span<const LevelGroup> groups() const { return groups_; }
  std::size_t group_index(Band band, int level) const;
  const LevelGroup& group(Band band, int level) const { return groups_[group_index(band, level)]; }

  /// Group id of a flat index, or -1 for scaling coefficients.
  int group_of(std::size_t flat) const { return group_of_[flat]; }
  std::span<const std::int32_t> group_ids() const { return group_of_; }

  /// Index (within the level above) of the parent of node i of group g.
  std::size_t parent_index(const LevelGroup& g, std::size_t i) const;
  /// Indices (within the level below) of the four children of node i of group g.
  std::array<std::size_t, kChildrenPerNode> child_indices(const LevelGroup& g, std::size_t i) const;

  NodeRecord node(std::size_t flat) const;
  std::size_t flat_index(Band band, int level, std::size_t index) const;

  /// Row-major position in the coefficient plane of every flat index.
  std::span<const std::uint32_t> plane_positions() const { return plane_pos_; }

  bool same_shape(const TreeLayout& other) const {
    return basis_ == other.basis_ && height_ == other.height_ && width_ == other.width_ &&
           levels_ == other.levels_;
  }

 private:
  TreeLayout() = default;
  void build_groups();

  Basis basis_ = Basis::Daub4;
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  int levels_ = 0;
  std::size_t root_rows_ = 0;
  std::size_t root_cols_ = 0;
  std::vector<LevelGroup> groups_;
  std::vector<std::int32_t> group_of_;
  std::vector<std::uint32_t> plane_pos_;
};

using LayoutPtr = std::shared_ptr<const TreeLayout>;

TreeLayout build_wavelet_tree_layout(std::size_t height, std::size_t width, int levels);
TreeLayout build_bdct_tree_layout(std::size_t height, std::size_t width);

/// Coefficients of one image organised by a TreeLayout.
class TreePyramid {
 public:
  TreePyramid() = default;
  TreePyramid(LayoutPtr layout, std::vector<double> coefficients);
  explicit TreePyramid(LayoutPtr layout);

  const TreeLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }

  std::span<const double> coefficients() const { return coeffs_; }
  std::span<double> coefficients() { return coeffs_; }

  std::span<const double> scaling() const;
  std::span<double> scaling();
  std::span<const double> detail(Band band, int level) const;
  std::span<double> detail(Band band, int level);

  bool operator==(const TreePyramid& other) const;

 private:
  LayoutPtr layout_;
  std::vector<double> coeffs_;
};

std::vector<double> flatten(const TreePyramid& pyramid);
TreePyramid unflatten(std::span<const double> coefficients, LayoutPtr layout);

/// Orthonormal 4-tap lowpass; the highpass is its quadrature mirror.
struct WaveletFilter {
  std::array<double, 4> lowpass;
  static WaveletFilter daub4();
};

TreePyramid dwt2_forward(const ImageGrid& image, int levels,
                         const WaveletFilter& filter = WaveletFilter::daub4());
ImageGrid dwt2_inverse(const TreePyramid& pyramid,
                       const WaveletFilter& filter = WaveletFilter::daub4());
TreePyramid bdct_forward(const ImageGrid& image);
ImageGrid bdct_inverse(const TreePyramid& pyramid);

/// Reusable analysis/synthesis operator T on flat vectors for a fixed layout.
/// analyze computes x = T^T f, synthesize computes f = T x. Reentrant.
class Transform {
 public:
  explicit Transform(LayoutPtr layout, WaveletFilter filter = WaveletFilter::daub4());

  const TreeLayout& layout() const { return *layout_; }
  const LayoutPtr& layout_ptr() const { return layout_; }
  std::size_t size() const { return layout_->num_coefficients(); }

  void analyze(std::span<const double> image, std::span<double> coefficients) const;
  void synthesize(std::span<const double> coefficients, std::span<double> image) const;

 private:
  void plane_forward(std::vector<double>& plane) const;
  void plane_inverse(std::vector<double>& plane) const;

  LayoutPtr layout_;
  WaveletFilter filter_;
};

/// Dense n x n synthesis matrix (column k = T e_k). Only for small layouts.
std::vector<double> dense_synthesis_matrix(const Transform& transform);

}  // namespace treeshrink
