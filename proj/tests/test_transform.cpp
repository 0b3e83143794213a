// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The treeshrink Authors

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "treeshrink/transform.hpp"

namespace treeshrink {
namespace {

ImageGrid random_image(std::size_t h, std::size_t w, std::uint32_t seed) {
  std::mt19937 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ImageGrid img(h, w);
  for (double& v : img.values) v = u(gen);
  return img;
}

double energy(std::span<const double> v) {
  double e = 0.0;
  for (double x : v) e += x * x;
  return e;
}

// Orthonormal 8-point DCT-II matrix, built directly from its definition.
double dct_entry(std::size_t u, std::size_t x) {
  const double scale = u == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
  return scale * std::cos(std::numbers::pi * (2.0 * static_cast<double>(x) + 1.0) * static_cast<double>(u) / 16.0);
}

TEST(Daub4Filter, TapsMatchClosedForm) {
  const auto f = WaveletFilter::daub4();
  EXPECT_NEAR(f.lowpass[0], 0.48296291314453416, 1e-15);
  EXPECT_NEAR(f.lowpass[1], 0.83651630373780794, 1e-15);
  EXPECT_NEAR(f.lowpass[2], 0.22414386804201339, 1e-15);
  EXPECT_NEAR(f.lowpass[3], -0.12940952255126037, 1e-15);
}

TEST(Dwt2, ConstantImageHasNoDetail) {
  const ImageGrid img(16, 16, 0.37);
  const TreePyramid p = dwt2_forward(img, 1);
  for (Band b : kDetailBands)
    for (double v : p.detail(b, 1)) EXPECT_NEAR(v, 0.0, 1e-13);
  EXPECT_NEAR(energy(p.scaling()), energy(img.values), 1e-12);
}

TEST(Dwt2, RoundtripAndParseval) {
  const ImageGrid img = random_image(16, 16, 3);
  const TreePyramid p = dwt2_forward(img, 1);
  const ImageGrid back = dwt2_inverse(p);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.values[i], img.values[i], 1e-10);
  EXPECT_NEAR(energy(p.coefficients()), energy(img.values), 1e-10 * energy(img.values));
}

TEST(Dwt2, ImpulseMatchesDenseMatrixRow) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(8, 8, 1));
  const Transform t(layout);
  const std::vector<double> dense = dense_synthesis_matrix(t);  // column k = T e_k
  ImageGrid img(8, 8);
  img(0, 0) = 1.0;
  const TreePyramid p = dwt2_forward(img, 1);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(p.coefficients()[k], dense[k * 64 + 0], 1e-14);
}

TEST(Dwt2, ScalingUnitGivesMatrixColumn) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(16, 16, 2));
  const std::vector<double> dense = dense_synthesis_matrix(Transform(layout));
  TreePyramid p(layout);
  p.coefficients()[5] = 1.0;
  const ImageGrid img = dwt2_inverse(p);
  for (std::size_t i = 0; i < 256; ++i) EXPECT_NEAR(img.values[i], dense[5 * 256 + i], 1e-14);
}

TEST(Dwt2, ZeroPyramidGivesZeroImage) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(16, 16, 2));
  const ImageGrid img = dwt2_inverse(TreePyramid(layout));
  for (double v : img.values) EXPECT_EQ(v, 0.0);
}

TEST(Dwt2, RejectsIndivisibleShapes) {
  EXPECT_THROW(dwt2_forward(ImageGrid(24, 16), 4), std::invalid_argument);
  EXPECT_THROW(TreeLayout::wavelet(16, 16, 0), std::invalid_argument);
}

TEST(Bdct, ConstantBlock) {
  const ImageGrid img(8, 8, 0.25);
  const TreePyramid p = bdct_forward(img);
  ASSERT_EQ(p.scaling().size(), 1u);
  EXPECT_NEAR(p.scaling()[0], 8.0 * 0.25, 1e-14);
  for (Band b : kDetailBands)
    for (int l = 1; l <= 3; ++l)
      for (double v : p.detail(b, l)) EXPECT_NEAR(v, 0.0, 1e-14);
}

TEST(Bdct, MatchesDenseDctOfEachBlockPosition) {
  const ImageGrid img = random_image(8, 8, 11);
  const TreePyramid p = bdct_forward(img);
  const TreeLayout& layout = p.layout();
  for (std::size_t k = 0; k < 64; ++k) {
    const NodeRecord node = layout.node(k);
    double expect = 0.0;
    for (std::size_t r = 0; r < 8; ++r)
      for (std::size_t c = 0; c < 8; ++c) expect += dct_entry(node.plane_row, r) * dct_entry(node.plane_col, c) * img(r, c);
    EXPECT_NEAR(p.coefficients()[k], expect, 1e-13) << "flat " << k;
  }
}

TEST(Bdct, RoundtripEnergyAndZero) {
  const ImageGrid img = random_image(32, 16, 5);
  const TreePyramid p = bdct_forward(img);
  const ImageGrid back = bdct_inverse(p);
  for (std::size_t i = 0; i < img.size(); ++i) EXPECT_NEAR(back.values[i], img.values[i], 1e-10);
  EXPECT_NEAR(energy(p.coefficients()), energy(img.values), 1e-10 * energy(img.values));
  const ImageGrid zero = bdct_inverse(TreePyramid(p.layout_ptr()));
  for (double v : zero.values) EXPECT_EQ(v, 0.0);
  EXPECT_THROW(bdct_forward(ImageGrid(12, 16)), std::invalid_argument);
}

TEST(Layout, Wavelet64Counts) {
  const TreeLayout l = TreeLayout::wavelet(64, 64, 3);
  EXPECT_EQ(l.num_scaling(), 64u);
  for (Band b : kDetailBands) {
    EXPECT_EQ(l.group(b, 1).size(), 64u);
    EXPECT_EQ(l.group(b, 2).size(), 256u);
    EXPECT_EQ(l.group(b, 3).size(), 1024u);
  }
  EXPECT_EQ(l.num_coefficients(), 3u * 1344u + 64u);
  // Scaling block, then the HH roots.
  EXPECT_EQ(l.flat_index(Band::HH, 2, 0), 128u);
}

TEST(Layout, Wavelet128HasEightByEightScalingBlock) {
  const TreeLayout l = TreeLayout::wavelet(128, 128, 4);
  EXPECT_EQ(l.root_rows(), 8u);
  EXPECT_EQ(l.root_cols(), 8u);
}

void expect_consistent_tree(const TreeLayout& l) {
  std::size_t detail = 0;
  for (std::size_t flat = l.num_scaling(); flat < l.num_coefficients(); ++flat) {
    const NodeRecord node = l.node(flat);
    ++detail;
    if (node.level == 1) {
      EXPECT_FALSE(node.parent.has_value());
    } else {
      ASSERT_TRUE(node.parent.has_value());
      const NodeRecord parent = l.node(*node.parent);
      EXPECT_EQ(parent.level, node.level - 1);
      EXPECT_EQ(parent.band, node.band);
      EXPECT_NE(std::find(parent.children.begin(), parent.children.end(), flat), parent.children.end());
    }
    if (node.level == l.n_levels()) {
      EXPECT_TRUE(node.children.empty());
    } else {
      ASSERT_EQ(node.children.size(), 4u);
      for (std::size_t c : node.children) EXPECT_EQ(l.node(c).parent, flat);
    }
  }
  EXPECT_EQ(detail + l.num_scaling(), l.num_coefficients());
  for (Band b : kDetailBands)
    for (int lv = 2; lv <= l.n_levels(); ++lv) EXPECT_EQ(l.group(b, lv).size(), 4 * l.group(b, lv - 1).size());
}

TEST(Layout, ParentChildConsistency) {
  expect_consistent_tree(TreeLayout::wavelet(64, 64, 3));
  expect_consistent_tree(TreeLayout::wavelet(32, 64, 2));
  expect_consistent_tree(TreeLayout::block_dct(32, 16));
}

TEST(Layout, WaveletParentIsHalvedGridPosition) {
  const TreeLayout l = TreeLayout::wavelet(32, 32, 2);
  const LevelGroup& g = l.group(Band::HL, 2);
  for (std::size_t i = 0; i < g.size(); ++i) {
    const std::size_t r = i / g.cols, c = i % g.cols;
    EXPECT_EQ(l.parent_index(g, i), (r / 2) * l.group(Band::HL, 1).cols + c / 2);
  }
}

TEST(Layout, BlockDctSingleBlock) {
  const TreeLayout l = TreeLayout::block_dct(8, 8);
  EXPECT_EQ(l.num_scaling(), 1u);
  std::size_t per_band = 0;
  for (int lv = 1; lv <= 3; ++lv) per_band += l.group(Band::HH, lv).size();
  EXPECT_EQ(per_band, 21u);
  // Frequency (1,1) has children (2,2), (2,3), (3,2), (3,3).
  for (std::size_t flat = 0; flat < 64; ++flat) {
    const NodeRecord n = l.node(flat);
    if (n.plane_row != 1 || n.plane_col != 1) continue;
    std::vector<std::pair<std::size_t, std::size_t>> got;
    for (std::size_t c : n.children) got.emplace_back(l.node(c).plane_row, l.node(c).plane_col);
    std::sort(got.begin(), got.end());
    const std::vector<std::pair<std::size_t, std::size_t>> want{{2, 2}, {2, 3}, {3, 2}, {3, 3}};
    EXPECT_EQ(got, want);
  }
}

TEST(Layout, BlockDct64Counts) {
  const TreeLayout l = TreeLayout::block_dct(64, 64);
  EXPECT_EQ(l.num_scaling(), 64u);
  std::size_t roots = 0;
  for (Band b : kDetailBands) roots += l.group(b, 1).size();
  EXPECT_EQ(roots, 192u);
}

TEST(Pyramid, FlattenRoundtrip) {
  auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(16, 16, 2));
  const ImageGrid img = random_image(16, 16, 9);
  const TreePyramid p = dwt2_forward(img, 2);
  const std::vector<double> v = flatten(p);
  EXPECT_EQ(v.size(), 256u);
  EXPECT_EQ(unflatten(v, p.layout_ptr()), p);
  EXPECT_THROW(unflatten(std::vector<double>(10), layout), std::invalid_argument);
}

TEST(Transform, OrthonormalDenseMatrices) {
  for (const TreeLayout& l : {TreeLayout::wavelet(16, 16, 1), TreeLayout::wavelet(16, 16, 2), TreeLayout::block_dct(16, 16)}) {
    const std::vector<double> m = dense_synthesis_matrix(Transform(std::make_shared<const TreeLayout>(l)));
    double worst = 0.0;
    for (std::size_t a = 0; a < 256; ++a)
      for (std::size_t b = 0; b < 256; ++b) {
        double dot = 0.0;
        for (std::size_t i = 0; i < 256; ++i) dot += m[a * 256 + i] * m[b * 256 + i];
        worst = std::max(worst, std::abs(dot - (a == b ? 1.0 : 0.0)));
      }
    EXPECT_LT(worst, 1e-10);
  }
}

TEST(Transform, CorruptedFilterBreaksOrthonormality) {
  WaveletFilter bad = WaveletFilter::daub4();
  bad.lowpass[1] += 1e-3;
  const auto layout = std::make_shared<const TreeLayout>(TreeLayout::wavelet(16, 16, 1));
  const ImageGrid img = random_image(16, 16, 2);
  std::vector<double> x(256), back(256);
  const Transform t(layout, bad);
  t.analyze(img.values, x);
  t.synthesize(x, back);
  double worst = 0.0;
  for (std::size_t i = 0; i < 256; ++i) worst = std::max(worst, std::abs(back[i] - img.values[i]));
  EXPECT_GT(worst, 1e-6);
}

TEST(Basis, NamesRoundtrip) {
  EXPECT_EQ(parse_basis("daub4"), Basis::Daub4);
  EXPECT_EQ(parse_basis(to_string(Basis::BlockDct8)), Basis::BlockDct8);
  EXPECT_THROW(parse_basis("haar"), std::invalid_argument);
}

}  // namespace
}  // namespace treeshrink
