#include <gtest/gtest.h>

#include <cmath>

#include "fracperim/minimizer.hpp"
#include "fracperim/oracle.hpp"

using namespace fracperim;

namespace {

KernelParams params(double s, double h) {
  KernelParams p;
  p.s = s;
  p.h = h;
  return p;
}

}  // namespace

TEST(Oracle, EmptySet) {
  const Lattice lat(2, 1.0, {3, 3});
  const auto r = enumerate_min(lat, params(0.5, 1.0), Potential::constant(2, 0.0), 0);
  EXPECT_TRUE(r.best_set.empty());
  EXPECT_EQ(r.best_energy, 0.0);
  EXPECT_EQ(r.instances_evaluated, 1u);
}

TEST(Oracle, FourCellsFormABlock) {
  const Lattice lat(2, 1.0, {4, 4});
  const auto r = enumerate_min(lat, params(0.5, 1.0), Potential::constant(2, 0.0), 4);
  EXPECT_EQ(r.instances_evaluated, 1820u);
  ASSERT_EQ(r.best_set.count(), 4u);
  const auto m = r.best_set.members();
  const Coord a = lat.coord(m[0]);
  for (std::size_t i : m) {
    const Coord c = lat.coord(i);
    EXPECT_LE(c[0] - a[0], 1);
    EXPECT_LE(std::abs(c[1] - a[1]), 1);
  }
  EXPECT_NEAR(r.best_energy, direct_ps(r.best_set, params(0.5, 1.0)), 1e-12 * r.best_energy);
}

TEST(Oracle, DirectSumMatchesWindowKernel) {
  const Lattice lat(2, 0.125, {8, 8});
  Rng rng(21);
  for (double s : {0.3, 0.7}) {
    const auto p = params(s, 0.125);
    const WindowKernel k(KernelTable(p), lat);
    for (int t = 0; t < 5; ++t) {
      GridSet e(lat);
      for (std::size_t i = 0; i < lat.size(); ++i)
        if (rng.uniform() < 0.3) e.insert(i);
      const double a = ps(e, k).total, b = direct_ps(e, p);
      EXPECT_LE(std::abs(a - b), 1e-9 * std::abs(b));
    }
  }
}

TEST(Oracle, DirectCrossIsSymmetric) {
  const Lattice lat(2, 0.5, {6, 6});
  GridSet a(lat), b(lat);
  for (std::size_t i = 0; i < lat.size(); ++i) (i % 3 == 0 ? a : b).insert(i);
  const auto p = params(0.4, 0.5);
  EXPECT_NEAR(direct_cross(a, b, p), direct_cross(b, a, p), 1e-12 * direct_cross(a, b, p));
}

TEST(Oracle, ByCardinalityAgreesWithEnumeration) {
  const Lattice lat(2, 0.25, {3, 4});
  const auto p = params(0.5, 0.25);
  const Potential g = Potential::periodic(2, 6.0, {1, 1, 1}, {0.2, 0.7, 0.0});
  const auto all = enumerate_by_cardinality(lat, p, g);
  ASSERT_EQ(all.size(), lat.size() + 1);
  for (std::size_t k = 0; k <= lat.size(); ++k) {
    const auto one = enumerate_min(lat, p, g, k);
    EXPECT_NEAR(all[k].best_energy, one.best_energy, 1e-12 * std::max(1.0, std::abs(one.best_energy))) << k;
    EXPECT_EQ(all[k].best_set.members(), one.best_set.members()) << k;
    EXPECT_EQ(static_cast<double>(all[k].instances_evaluated), detail::binomial(lat.size(), k));
  }
}

TEST(Oracle, PenalizedOptimumReachesTheTargetVolume) {
  const Lattice lat(2, 0.25, {4, 4});
  const auto p = params(0.5, 0.25);
  const Potential g = Potential::periodic(2, 8.0, {1, 1, 1});
  const auto all = enumerate_by_cardinality(lat, p, g);
  for (std::size_t target : {2u, 5u, 9u}) {
    const auto opt = penalized_optimum(all, target, lat.cell_volume(), 1e-3);
    EXPECT_EQ(opt.set.count(), target);
    EXPECT_NEAR(opt.energy, all[target].best_energy, 1e-12 * std::max(1.0, std::abs(opt.energy)));
    EXPECT_GT(opt.doublings, 0);
  }
  EXPECT_THROW(penalized_optimum(all, 99, lat.cell_volume(), 1.0), std::invalid_argument);
  EXPECT_THROW(penalized_optimum(all, 2, lat.cell_volume(), 0.0), std::invalid_argument);
}

TEST(Oracle, Guards) {
  const Lattice big(2, 1.0, {10, 10});
  EXPECT_THROW(enumerate_min(big, params(0.5, 1.0), Potential::constant(2, 0.0), 50), std::invalid_argument);
  EXPECT_THROW(enumerate_by_cardinality(Lattice(2, 1.0, {5, 5}), params(0.5, 1.0), Potential::constant(2, 0.0)),
               std::invalid_argument);
  EXPECT_THROW(enumerate_min(Lattice(2, 1.0, {2, 2}), params(0.5, 1.0), Potential::constant(2, 0.0), 5),
               std::invalid_argument);
}
