#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "fracperim/kernel.hpp"

using namespace fracperim;

namespace {

// Exact 1D double integral over [0,1] x [d, d+1] of |x - y|^{-(1+s)}.
double w1d(int d, double s) {
  return (2.0 * std::pow(d, 1.0 - s) - std::pow(d + 1.0, 1.0 - s) - std::pow(d - 1.0, 1.0 - s)) / (s * (1.0 - s));
}

KernelParams params(int dim, double s, double h = 1.0, int depth = 4) {
  KernelParams p;
  p.dim = dim;
  p.s = s;
  p.h = h;
  p.subdivision_depth = depth;
  return p;
}

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("fracperim_kernel_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

}  // namespace

TEST(Kernel, OneDimensionalClosedForm) {
  // s = 1/2, d = 2 reduces to 4 (2 sqrt 2 - sqrt 3 - 1).
  EXPECT_NEAR(cell_weight(params(1, 0.5), {2, 0, 0}), 4.0 * (2.0 * std::sqrt(2.0) - std::sqrt(3.0) - 1.0), 1e-6);
  for (double s : {0.2, 0.5, 0.8})
    for (int d : {1, 2, 3}) EXPECT_NEAR(cell_weight(params(1, s), {d, 0, 0}), w1d(d, s), 1e-6 * w1d(d, s)) << s << " " << d;
}

TEST(Kernel, FarFieldIsTheMidpointRule) {
  for (int d : {4, 5, 9}) EXPECT_DOUBLE_EQ(cell_weight(params(1, 0.5), {d, 0, 0}), std::pow(d, -1.5));
  EXPECT_DOUBLE_EQ(cell_weight(params(2, 0.5, 0.5), {3, 4, 0}), std::pow(0.5, 4) * std::pow(2.5, -2.5));
}

TEST(Kernel, TouchingCellsOneDimension) {
  EXPECT_NEAR(cell_weight(params(1, 0.5), {1, 0, 0}), 4.0 * (2.0 - std::sqrt(2.0)), 1e-6);
}

TEST(Kernel, TwoDimensionalAgainstHighPrecisionQuadrature) {
  // Tent-weighted difference integrals evaluated separately at 20 digits.
  struct Ref {
    double s;
    Coord d;
    double w;
  };
  const Ref refs[] = {
      {0.3, {1, 0, 0}, 2.5965302408767732}, {0.3, {1, 1, 0}, 0.65990481465682576}, {0.3, {2, 0, 0}, 0.22841650014470575},
      {0.5, {1, 0, 0}, 3.6470875154972008}, {0.5, {1, 1, 0}, 0.67600839868594708}, {0.5, {2, 0, 0}, 0.20328767214612800},
      {0.7, {1, 0, 0}, 6.1982105734496832}, {0.7, {1, 1, 0}, 0.70615524613843641}, {0.7, {2, 0, 0}, 0.18128089341269046},
  };
  for (const auto& r : refs) EXPECT_NEAR(cell_weight(params(2, r.s), r.d), r.w, 1e-6 * r.w) << r.s;
}

TEST(Kernel, Symmetric) {
  const auto p = params(3, 0.4);
  const double w = cell_weight(p, {2, 1, 0});
  EXPECT_DOUBLE_EQ(cell_weight(p, {-2, 1, 0}), w);
  EXPECT_DOUBLE_EQ(cell_weight(p, {1, 0, -2}), w);
  EXPECT_DOUBLE_EQ(cell_weight(p, {0, -2, -1}), w);
}

TEST(Kernel, ScalesLikeHToTheNMinusS) {
  for (int dim : {1, 2, 3}) {
    const double a = cell_weight(params(dim, 0.5, 1.0), {2, 1, 0});
    const double b = cell_weight(params(dim, 0.5, 2.0), {2, 1, 0});
    EXPECT_NEAR(b / a, std::pow(2.0, dim - 0.5), 1e-12);
  }
}

TEST(Kernel, DecreasesAlongAnAxis) {
  const auto p = params(2, 0.5);
  double prev = cell_weight(p, {1, 0, 0});
  for (int d = 2; d < 12; ++d) {
    const double w = cell_weight(p, {d, 0, 0});
    EXPECT_LT(w, prev);
    prev = w;
  }
}

TEST(Kernel, FarFieldMatchesPointApproximation) {
  const auto p = params(2, 0.5);
  const double w = cell_weight(p, {40, 0, 0});
  EXPECT_NEAR(w, std::pow(40.0, -2.5), 1e-3 * w);
}

TEST(Kernel, DepthIncrementsShrinkGeometrically) {
  for (double s : {0.3, 0.5, 0.7}) {
    std::vector<double> v;
    for (int depth = 2; depth <= 6; ++depth) v.push_back(cell_weight(params(2, s, 1.0, depth), {2, 1, 0}));
    for (std::size_t i = 2; i < v.size(); ++i) {
      const double prev = std::abs(v[i - 1] - v[i - 2]), cur = std::abs(v[i] - v[i - 1]);
      if (prev > 1e-15) EXPECT_LE(cur, 0.5 * prev) << "s " << s << " step " << i;
    }
  }
}

TEST(Kernel, ExteriorTail) {
  EXPECT_NEAR(exterior_tail(params(2, 0.5), 1.0), 4.0 * std::numbers::pi, 1e-12);
  EXPECT_NEAR(exterior_tail(params(1, 0.5), 4.0), 2.0, 1e-12);
  EXPECT_THROW(exterior_tail(params(2, 0.5), 0.0), std::invalid_argument);
}

TEST(Kernel, PointCellWeightOneDimension) {
  // x = 0 against [2, 3]: (1/s)(2^{-s} - 3^{-s}) at s = 1/2.
  EXPECT_NEAR(point_cell_weight(params(1, 0.5), {0.0, 0.0, 0.0}, {2, 0, 0}),
              2.0 * (1.0 / std::sqrt(2.0) - 1.0 / std::sqrt(3.0)), 1e-8);
  // Adjacent cell, point half a cell away.
  const double near = 2.0 * (std::pow(0.5, -0.5) - std::pow(1.5, -0.5));
  EXPECT_NEAR(point_cell_weight(params(1, 0.5), {0.5, 0.0, 0.0}, {1, 0, 0}), near, 1e-5 * near);
}

TEST(Kernel, InvalidParameters) {
  EXPECT_THROW(cell_weight(params(2, 1.0), {1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(cell_weight(params(2, 0.0), {1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(cell_weight(params(2, 0.5, -1.0), {1, 0, 0}), std::invalid_argument);
  EXPECT_THROW(cell_weight(params(2, 0.5, 1.0, 0), {1, 0, 0}), std::invalid_argument);
}

TEST(KernelTable, MatchesDirectWeights) {
  const auto p = params(2, 0.5, 0.25);
  const KernelTable t(p);
  for (const Coord d : {Coord{1, 0, 0}, Coord{2, 3, 0}, Coord{-3, 1, 0}, Coord{7, 0, 0}})
    EXPECT_NEAR(t.weight(d), cell_weight(p, d), 1e-14 * cell_weight(p, d));
}

TEST(KernelTable, CacheRoundTripIsBitIdentical) {
  const auto dir = scratch("cache");
  const auto p = params(2, 0.3, 0.5);
  const KernelTable built = KernelTable::load_or_build(p, dir);
  const auto file = dir / KernelTable::cache_file_name(p);
  ASSERT_TRUE(std::filesystem::exists(file));
  const auto loaded = KernelTable::load(file, p);
  ASSERT_TRUE(loaded.has_value());
  for (int a = -4; a <= 4; ++a)
    for (int b = -4; b <= 4; ++b) {
      if (a == 0 && b == 0) continue;
      EXPECT_EQ(loaded->weight({a, b, 0}), built.weight({a, b, 0}));
    }
  // Different parameters never reuse the file.
  EXPECT_FALSE(KernelTable::load(file, params(2, 0.31, 0.5)).has_value());
}

TEST(KernelTable, CorruptCacheIsRebuilt) {
  const auto dir = scratch("corrupt");
  const auto p = params(2, 0.5);
  { std::ofstream(dir / KernelTable::cache_file_name(p)) << "garbage"; }
  EXPECT_FALSE(KernelTable::load(dir / KernelTable::cache_file_name(p), p).has_value());
  const KernelTable t = KernelTable::load_or_build(p, dir);
  EXPECT_NEAR(t.weight({1, 0, 0}), cell_weight(p, {1, 0, 0}), 1e-14);
}

TEST(WindowKernel, RowSumsCloseToCellTotal) {
  const Lattice lat(2, 0.5, {6, 6});
  const WindowKernel k(KernelTable(params(2, 0.5, 0.5)), lat);
  for (std::size_t i = 0; i < lat.size(); ++i) {
    EXPECT_NEAR(k.window_sum(i) + k.exterior(i), k.cell_total(), 1e-12 * k.cell_total());
    EXPECT_GT(k.exterior(i), 0.0);
  }
  EXPECT_EQ(k.weight(3, 9), k.weight(9, 3));
}

TEST(WindowKernel, OneDimensionalCellPerimeter) {
  // P_s of a unit interval is 2 / (s (1 - s)); a wide near field keeps the midpoint error out.
  for (double s : {0.3, 0.5, 0.7}) {
    KernelParams p = params(1, s);
    p.near_field_radius = 64;
    const WindowKernel k(KernelTable(p), Lattice(1, 1.0, {8}));
    EXPECT_NEAR(k.cell_total(), 2.0 / (s * (1.0 - s)), 1e-4 * k.cell_total()) << s;
  }
}

TEST(WindowKernel, RejectsMismatchedLattice) {
  EXPECT_THROW(WindowKernel(KernelTable(params(2, 0.5, 1.0)), Lattice(2, 0.5, {4, 4})), std::invalid_argument);
  EXPECT_THROW(WindowKernel(KernelTable(params(1, 0.5, 1.0)), Lattice(2, 1.0, {4, 4})), std::invalid_argument);
}
