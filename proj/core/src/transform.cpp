// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include "treeshrink/transform.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace treeshrink {

namespace {

constexpr std::size_t kBlock = 8;
constexpr int kDctLevels = 3;

bool divisible(std::size_t value, std::size_t by) { return by != 0 && value % by == 0; }

// 8-point orthonormal DCT-II matrix, row k = frequency.
const std::array<double, kBlock * kBlock>& dct8_matrix() {
  static const auto matrix = [] {
    std::array<double, kBlock * kBlock> m{};
    for (std::size_t k = 0; k < kBlock; ++k) {
      const double s = k == 0 ? std::sqrt(1.0 / kBlock) : std::sqrt(2.0 / kBlock);
      for (std::size_t i = 0; i < kBlock; ++i) {
        m[k * kBlock + i] =
            s * std::cos(std::numbers::pi * (2.0 * static_cast<double>(i) + 1.0) *
                         static_cast<double>(k) / (2.0 * kBlock));
      }
    }
    return m;
  }();
  return matrix;
}

// Periodic single-level analysis of n (even) samples with stride.
void analyze_line(const WaveletFilter& f, double* data, std::size_t n, std::size_t stride,
                  std::vector<double>& scratch) {
  const auto& h = f.lowpass;
  const std::array<double, 4> g{h[3], -h[2], h[1], -h[0]};
  scratch.resize(n);
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    double a = 0.0;
    double d = 0.0;
    for (std::size_t j = 0; j < 4; ++j) {
      const double v = data[((2 * k + j) % n) * stride];
      a += h[j] * v;
      d += g[j] * v;
    }
    scratch[k] = a;
    scratch[half + k] = d;
  }
  for (std::size_t i = 0; i < n; ++i) data[i * stride] = scratch[i];
}

void synthesize_line(const WaveletFilter& f, double* data, std::size_t n, std::size_t stride,
                     std::vector<double>& scratch) {
  const auto& h = f.lowpass;
  const std::array<double, 4> g{h[3], -h[2], h[1], -h[0]};
  scratch.assign(n, 0.0);
  const std::size_t half = n / 2;
  for (std::size_t k = 0; k < half; ++k) {
    const double a = data[k * stride];
    const double d = data[(half + k) * stride];
    for (std::size_t j = 0; j < 4; ++j) scratch[(2 * k + j) % n] += h[j] * a + g[j] * d;
  }
  for (std::size_t i = 0; i < n; ++i) data[i * stride] = scratch[i];
}

void dct_block(double* block, std::size_t stride, bool inverse, std::array<double, 64>& tmp) {
  const auto& c = dct8_matrix();
  // tmp = C * B (forward) or C^T * B (inverse), then result = tmp * C^T (or tmp * C).
  for (std::size_t k = 0; k < kBlock; ++k) {
    for (std::size_t j = 0; j < kBlock; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < kBlock; ++i) {
        const double cki = inverse ? c[i * kBlock + k] : c[k * kBlock + i];
        s += cki * block[i * stride + j];
      }
      tmp[k * kBlock + j] = s;
    }
  }
  for (std::size_t r = 0; r < kBlock; ++r) {
    for (std::size_t k = 0; k < kBlock; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < kBlock; ++j) {
        const double ckj = inverse ? c[j * kBlock + k] : c[k * kBlock + j];
        s += tmp[r * kBlock + j] * ckj;
      }
      block[r * stride + k] = s;
    }
  }
}

}  // namespace

std::string_view to_string(Band band) {
  switch (band) {
    case Band::LL: return "LL";
    case Band::HH: return "HH";
    case Band::HL: return "HL";
    case Band::LH: return "LH";
  }
  return "?";
}

std::string_view to_string(Basis basis) {
  return basis == Basis::Daub4 ? "daub4" : "bdct8";
}

Basis parse_basis(std::string_view name) {
  if (name == "daub4") return Basis::Daub4;
  if (name == "bdct8") return Basis::BlockDct8;
  throw std::invalid_argument("unknown basis '" + std::string(name) + "' (expected daub4 or bdct8)");
}

// ---------------------------------------------------------------------------
// TreeLayout

TreeLayout TreeLayout::wavelet(std::size_t height, std::size_t width, int levels) {
  if (levels < 1 || levels > 30) throw std::invalid_argument("wavelet layout: levels must be in [1, 30]");
  const std::size_t factor = std::size_t{1} << levels;
  if (height == 0 || width == 0 || !divisible(height, factor) || !divisible(width, factor)) {
    throw std::invalid_argument("wavelet layout: " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible by 2^" +
                                std::to_string(levels));
  }
  TreeLayout layout;
  layout.basis_ = Basis::Daub4;
  layout.height_ = height;
  layout.width_ = width;
  layout.levels_ = levels;
  layout.root_rows_ = height / factor;
  layout.root_cols_ = width / factor;
  layout.build_groups();
  return layout;
}

TreeLayout TreeLayout::block_dct(std::size_t height, std::size_t width) {
  if (height == 0 || width == 0 || !divisible(height, kBlock) || !divisible(width, kBlock)) {
    throw std::invalid_argument("block-DCT layout: " + std::to_string(height) + "x" +
                                std::to_string(width) + " is not divisible by 8");
  }
  TreeLayout layout;
  layout.basis_ = Basis::BlockDct8;
  layout.height_ = height;
  layout.width_ = width;
  layout.levels_ = kDctLevels;
  layout.root_rows_ = height / kBlock;
  layout.root_cols_ = width / kBlock;
  layout.build_groups();
  return layout;
}

void TreeLayout::build_groups() {
  const std::size_t n = height_ * width_;
  group_of_.assign(n, -1);
  plane_pos_.assign(n, 0);
  groups_.clear();

  std::size_t offset = num_scaling();
  for (Band band : kDetailBands) {
    for (int level = 1; level <= levels_; ++level) {
      const std::size_t scale = std::size_t{1} << (level - 1);
      groups_.push_back({band, level, root_rows_ * scale, root_cols_ * scale, offset});
      offset += groups_.back().size();
    }
  }

  // Scaling block.
  for (std::size_t r = 0; r < root_rows_; ++r) {
    for (std::size_t c = 0; c < root_cols_; ++c) {
      const std::size_t flat = r * root_cols_ + c;
      const std::size_t pr = basis_ == Basis::Daub4 ? r : r * kBlock;
      const std::size_t pc = basis_ == Basis::Daub4 ? c : c * kBlock;
      plane_pos_[flat] = static_cast<std::uint32_t>(pr * width_ + pc);
    }
  }

  for (std::size_t gi = 0; gi < groups_.size(); ++gi) {
    const LevelGroup& g = groups_[gi];
    const bool row_high = g.band == Band::HH || g.band == Band::LH;
    const bool col_high = g.band == Band::HH || g.band == Band::HL;
    for (std::size_t r = 0; r < g.rows; ++r) {
      for (std::size_t c = 0; c < g.cols; ++c) {
        const std::size_t flat = g.offset + r * g.cols + c;
        group_of_[flat] = static_cast<std::int32_t>(gi);
        std::size_t pr = 0;
        std::size_t pc = 0;
        if (basis_ == Basis::Daub4) {
          // Mallat layout: level l subbands are g.rows x g.cols, placed next
          // to the l-1 approximation block of the same size.
          pr = (row_high ? g.rows : 0) + r;
          pc = (col_high ? g.cols : 0) + c;
        } else {
          const std::size_t s = std::size_t{1} << (g.level - 1);
          const std::size_t br = r / s, bc = c / s;
          const std::size_t u = (row_high ? s : 0) + r % s;
          const std::size_t v = (col_high ? s : 0) + c % s;
          pr = br * kBlock + u;
          pc = bc * kBlock + v;
        }
        plane_pos_[flat] = static_cast<std::uint32_t>(pr * width_ + pc);
      }
    }
  }
}

std::size_t TreeLayout::group_index(Band band, int level) const {
  if (band == Band::LL) throw std::invalid_argument("LL has no tree group");
  if (level < 1 || level > levels_) throw std::invalid_argument("level out of range");
  const std::size_t b = static_cast<std::size_t>(band) - 1;
  return b * static_cast<std::size_t>(levels_) + static_cast<std::size_t>(level - 1);
}

std::size_t TreeLayout::parent_index(const LevelGroup& g, std::size_t i) const {
  const std::size_t r = i / g.cols, c = i % g.cols;
  return (r / 2) * (g.cols / 2) + c / 2;
}

std::array<std::size_t, kChildrenPerNode> TreeLayout::child_indices(const LevelGroup& g,
                                                                    std::size_t i) const {
  const std::size_t r = i / g.cols, c = i % g.cols;
  const std::size_t cols2 = 2 * g.cols;
  return {(2 * r) * cols2 + 2 * c, (2 * r) * cols2 + 2 * c + 1, (2 * r + 1) * cols2 + 2 * c,
          (2 * r + 1) * cols2 + 2 * c + 1};
}

std::size_t TreeLayout::flat_index(Band band, int level, std::size_t index) const {
  if (band == Band::LL) {
    if (index >= num_scaling()) throw std::out_of_range("scaling index out of range");
    return index;
  }
  const LevelGroup& g = group(band, level);
  if (index >= g.size()) throw std::out_of_range("node index out of range");
  return g.offset + index;
}

NodeRecord TreeLayout::node(std::size_t flat) const {
  if (flat >= num_coefficients()) throw std::out_of_range("flat index out of range");
  NodeRecord rec;
  rec.flat = flat;
  rec.plane_row = plane_pos_[flat] / width_;
  rec.plane_col = plane_pos_[flat] % width_;
  const int gi = group_of_[flat];
  if (gi < 0) {
    rec.index = flat;
    return rec;
  }
  const LevelGroup& g = groups_[static_cast<std::size_t>(gi)];
  rec.band = g.band;
  rec.level = g.level;
  rec.index = flat - g.offset;
  if (g.level > 1) {
    rec.parent = group(g.band, g.level - 1).offset + parent_index(g, rec.index);
  }
  if (g.level < levels_) {
    const std::size_t child_offset = group(g.band, g.level + 1).offset;
    for (std::size_t ci : child_indices(g, rec.index)) rec.children.push_back(child_offset + ci);
  }
  return rec;
}

TreeLayout build_wavelet_tree_layout(std::size_t height, std::size_t width, int levels) {
  return TreeLayout::wavelet(height, width, levels);
}

TreeLayout build_bdct_tree_layout(std::size_t height, std::size_t width) {
  return TreeLayout::block_dct(height, width);
}

// ---------------------------------------------------------------------------
// TreePyramid

TreePyramid::TreePyramid(LayoutPtr layout, std::vector<double> coefficients)
    : layout_(std::move(layout)), coeffs_(std::move(coefficients)) {
  if (!layout_) throw std::invalid_argument("pyramid requires a layout");
  if (coeffs_.size() != layout_->num_coefficients()) {
    throw std::invalid_argument("pyramid: expected " + std::to_string(layout_->num_coefficients()) +
                                " coefficients, got " + std::to_string(coeffs_.size()));
  }
}

TreePyramid::TreePyramid(LayoutPtr layout)
    : TreePyramid(layout, std::vector<double>(layout ? layout->num_coefficients() : 0, 0.0)) {}

std::span<const double> TreePyramid::scaling() const {
  return std::span<const double>(coeffs_).first(layout_->num_scaling());
}
std::span<double> TreePyramid::scaling() { return std::span<double>(coeffs_).first(layout_->num_scaling()); }

std::span<const double> TreePyramid::detail(Band band, int level) const {
  const LevelGroup& g = layout_->group(band, level);
  return std::span<const double>(coeffs_).subspan(g.offset, g.size());
}
std::span<double> TreePyramid::detail(Band band, int level) {
  const LevelGroup& g = layout_->group(band, level);
  return std::span<double>(coeffs_).subspan(g.offset, g.size());
}

bool TreePyramid::operator==(const TreePyramid& other) const {
  if (!layout_ || !other.layout_) return layout_ == other.layout_ && coeffs_ == other.coeffs_;
  return layout_->same_shape(*other.layout_) && coeffs_ == other.coeffs_;
}

std::vector<double> flatten(const TreePyramid& pyramid) {
  const auto c = pyramid.coefficients();
  return {c.begin(), c.end()};
}

TreePyramid unflatten(std::span<const double> coefficients, LayoutPtr layout) {
  if (!layout) throw std::invalid_argument("unflatten: missing layout");
  if (coefficients.size() != layout->num_coefficients()) {
    throw std::invalid_argument("unflatten: size mismatch (" + std::to_string(coefficients.size()) +
                                " vs " + std::to_string(layout->num_coefficients()) + ")");
  }
  return TreePyramid(std::move(layout), {coefficients.begin(), coefficients.end()});
}

// ---------------------------------------------------------------------------
// Transforms

WaveletFilter WaveletFilter::daub4() {
  const double s3 = std::sqrt(3.0);
  const double d = 4.0 * std::numbers::sqrt2;
  return {{(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d}};
}

Transform::Transform(LayoutPtr layout, WaveletFilter filter)
    : layout_(std::move(layout)), filter_(filter) {
  if (!layout_) throw std::invalid_argument("transform requires a layout");
}

void Transform::plane_forward(std::vector<double>& plane) const {
  std::vector<double> tmp_line;
  const std::size_t width = layout_->width();
  if (layout_->basis() == Basis::BlockDct8) {
    std::array<double, 64> tmp{};
    for (std::size_t br = 0; br < layout_->height(); br += kBlock)
      for (std::size_t bc = 0; bc < width; bc += kBlock)
        dct_block(plane.data() + br * width + bc, width, false, tmp);
    return;
  }
  std::size_t h = layout_->height(), w = width;
  for (int level = 0; level < layout_->n_levels(); ++level) {
    for (std::size_t r = 0; r < h; ++r) analyze_line(filter_, plane.data() + r * width, w, 1, tmp_line);
    for (std::size_t c = 0; c < w; ++c) analyze_line(filter_, plane.data() + c, h, width, tmp_line);
    h /= 2;
    w /= 2;
  }
}

void Transform::plane_inverse(std::vector<double>& plane) const {
  std::vector<double> tmp_line;
  const std::size_t width = layout_->width();
  if (layout_->basis() == Basis::BlockDct8) {
    std::array<double, 64> tmp{};
    for (std::size_t br = 0; br < layout_->height(); br += kBlock)
      for (std::size_t bc = 0; bc < width; bc += kBlock)
        dct_block(plane.data() + br * width + bc, width, true, tmp);
    return;
  }
  const int levels = layout_->n_levels();
  for (int level = levels - 1; level >= 0; --level) {
    const std::size_t h = layout_->height() >> level;
    const std::size_t w = width >> level;
    for (std::size_t c = 0; c < w; ++c) synthesize_line(filter_, plane.data() + c, h, width, tmp_line);
    for (std::size_t r = 0; r < h; ++r) synthesize_line(filter_, plane.data() + r * width, w, 1, tmp_line);
  }
}

void Transform::analyze(std::span<const double> image, std::span<double> coefficients) const {
  const std::size_t n = size();
  if (image.size() != n || coefficients.size() != n) {
    throw std::invalid_argument("Transform::analyze: size mismatch");
  }
  std::vector<double> plane(image.begin(), image.end());
  plane_forward(plane);
  const auto pos = layout_->plane_positions();
  for (std::size_t k = 0; k < n; ++k) coefficients[k] = plane[pos[k]];
}

void Transform::synthesize(std::span<const double> coefficients, std::span<double> image) const {
  const std::size_t n = size();
  if (image.size() != n || coefficients.size() != n) {
    throw std::invalid_argument("Transform::synthesize: size mismatch");
  }
  std::vector<double> plane(n);
  const auto pos = layout_->plane_positions();
  for (std::size_t k = 0; k < n; ++k) plane[pos[k]] = coefficients[k];
  plane_inverse(plane);
  std::copy(plane.begin(), plane.end(), image.begin());
}

std::vector<double> dense_synthesis_matrix(const Transform& transform) {
  const std::size_t n = transform.size();
  std::vector<double> matrix(n * n, 0.0);  // column-major
  std::vector<double> e(n, 0.0), col(n);
  for (std::size_t k = 0; k < n; ++k) {
    e[k] = 1.0;
    transform.synthesize(e, col);
    std::copy(col.begin(), col.end(), matrix.begin() + static_cast<std::ptrdiff_t>(k * n));
    e[k] = 0.0;
  }
  return matrix;
}

TreePyramid dwt2_forward(const ImageGrid& image, int levels, const WaveletFilter& filter) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(image.height, image.width, levels));
  if (image.values.size() != image.height * image.width) {
    throw std::invalid_argument("dwt2_forward: image storage does not match its dimensions");
  }
  Transform t(layout, filter);
  std::vector<double> coeffs(image.size());
  t.analyze(image.values, coeffs);
  return TreePyramid(std::move(layout), std::move(coeffs));
}

ImageGrid dwt2_inverse(const TreePyramid& pyramid, const WaveletFilter& filter) {
  if (!pyramid.layout_ptr() || pyramid.layout().basis() != Basis::Daub4) {
    throw std::invalid_argument("dwt2_inverse: pyramid does not carry a wavelet layout");
  }
  Transform t(pyramid.layout_ptr(), filter);
  ImageGrid out(pyramid.layout().height(), pyramid.layout().width());
  t.synthesize(pyramid.coefficients(), out.values);
  return out;
}

TreePyramid bdct_forward(const ImageGrid& image) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::block_dct(image.height, image.width));
  if (image.values.size() != image.height * image.width) {
    throw std::invalid_argument("bdct_forward: image storage does not match its dimensions");
  }
  Transform t(layout);
  std::vector<double> coeffs(image.size());
  t.analyze(image.values, coeffs);
  return TreePyramid(std::move(layout), std::move(coeffs));
}

ImageGrid bdct_inverse(const TreePyramid& pyramid) {
  if (!pyramid.layout_ptr() || pyramid.layout().basis() != Basis::BlockDct8) {
    throw std::invalid_argument("bdct_inverse: pyramid does not carry a block-DCT layout");
  }
  Transform t(pyramid.layout_ptr());
  ImageGrid out(pyramid.layout().height(), pyramid.layout().width());
  t.synthesize(pyramid.coefficients(), out.values);
  return out;
}

}  // namespace treeshrink
