#pragma once

// Brute-force ground truth for tiny windows. Only cell_weight and
// resolve_far_radius are shared with the production path: the exterior of
// the window is handled by an explicit ghost-cell loop out to R_far.

#include <cmath>
#include <limits>
#include <map>
#include <vector>

#include "kernel.hpp"
#include "lattice.hpp"
#include "potential.hpp"

namespace fracperim {

struct OracleResult {
  GridSet best_set;
  double best_energy = 0.0;
  std::uint64_t instances_evaluated = 0;
};

class DirectEvaluator {
 public:
  DirectEvaluator(const KernelParams& p, const Lattice& lat) : p_(p), lat_(lat) {
    p.validate();
    require(p.dim == lat.dim() && p.h == lat.h(), "kernel parameters do not match the lattice");
    const double rfar = resolve_far_radius(p, lat);
    rc2_ = (rfar / p.h) * (rfar / p.h);
    reach_ = static_cast<int>(std::floor(rfar / p.h));
    // The tail picks up at the radius of a ball as large as the cells counted.
    std::size_t cells = 0;
    const int r1 = p.dim > 1 ? reach_ : 0, r2 = p.dim > 2 ? reach_ : 0;
    for (int a = -reach_; a <= reach_; ++a)
      for (int b = -r1; b <= r1; ++b)
        for (int z = -r2; z <= r2; ++z)
          cells += static_cast<double>(a) * a + static_cast<double>(b) * b + static_cast<double>(z) * z <= rc2_;
    const double rho = p.h * std::pow(static_cast<double>(cells) / unit_ball_volume(p.dim), 1.0 / p.dim);
    tail_ = lat.cell_volume() * exterior_tail(p, rho);
  }

  double weight(const Coord& d) {
    const Coord c = canonical_offset(d);
    if (c[0] > p_.near_field_radius) return cell_weight(p_, d);
    auto it = memo_.find(c);
    if (it != memo_.end()) return it->second;
    const double w = cell_weight(p_, c);
    memo_.emplace(c, w);
    return w;
  }

  /// Interaction of cell i with everything outside the window.
  double ghost(std::size_t i) {
    const Coord c = lat_.coord(i);
    const int r1 = p_.dim > 1 ? reach_ : 0, r2 = p_.dim > 2 ? reach_ : 0;
    double acc = 0.0;
    for (int a = -reach_; a <= reach_; ++a)
      for (int b = -r1; b <= r1; ++b)
        for (int z = -r2; z <= r2; ++z) {
          const double d2 = static_cast<double>(a) * a + static_cast<double>(b) * b + static_cast<double>(z) * z;
          if (d2 > rc2_) continue;
          if (lat_.contains({c[0] + a, c[1] + b, c[2] + z})) continue;
          acc += weight({a, b, z});
        }
    return acc + tail_;
  }

  /// W(i - j) for window cells; 0 on the diagonal.
  double pair(std::size_t i, std::size_t j) {
    if (i == j) return 0.0;
    const Coord a = lat_.coord(i), b = lat_.coord(j);
    return weight({a[0] - b[0], a[1] - b[1], a[2] - b[2]});
  }

 private:
  KernelParams p_;
  Lattice lat_;
  double rc2_ = 0.0;
  int reach_ = 0;
  double tail_ = 0.0;
  std::map<Coord, double> memo_;
};

/// Sum over i in E, j in window \ E of W plus the ghost-cell exterior sums.
inline double direct_ps(const GridSet& e, const KernelParams& p) {
  const Lattice& lat = e.lattice();
  const double work = static_cast<double>(e.count()) * static_cast<double>(lat.size() - e.count());
  require(work <= 1e7, "direct_ps guard exceeded");
  DirectEvaluator ev(p, lat);
  double cross = 0.0, ext = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (!e.contains(i)) continue;
    for (std::size_t j = 0; j < lat.size(); ++j)
      if (!e.contains(j)) cross += ev.pair(i, j);
    ext += ev.ghost(i);
  }
  return cross + ext;
}

/// Cross sum over A x B, for the complement-symmetry check.
inline double direct_cross(const GridSet& a, const GridSet& b, const KernelParams& p) {
  DirectEvaluator ev(p, a.lattice());
  double acc = 0.0;
  for (std::size_t i : a.members())
    for (std::size_t j : b.members()) acc += ev.pair(i, j);
  return acc;
}

namespace detail {

/// Pairwise weights, ghost sums and cell potentials of a tiny window.
struct OracleTables {
  std::size_t m = 0;
  std::vector<double> w;
  std::vector<double> ghost;
  std::vector<double> g;

  OracleTables(const KernelParams& p, const Lattice& lat, const Potential& pot) : m(lat.size()) {
    DirectEvaluator ev(p, lat);
    w.resize(m * m);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < m; ++j) w[i * m + j] = ev.pair(i, j);
    for (std::size_t i = 0; i < m; ++i) {
      ghost.push_back(ev.ghost(i));
      g.push_back(pot.eval(lat.center(i)) * lat.cell_volume());
    }
  }

  double energy(const std::vector<std::uint8_t>& in) const {
    double per = 0.0, pot = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!in[i]) continue;
      for (std::size_t j = 0; j < m; ++j)
        if (!in[j]) per += w[i * m + j];
      per += ghost[i];
      pot += g[i];
    }
    return per - pot;
  }
};

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

}  // namespace detail

/// Exact minimizer of F over all k-cell subsets, enumerated in lexicographic
/// order of the sorted index tuple; the first optimum found is kept.
inline OracleResult enumerate_min(const Lattice& lat, const KernelParams& p, const Potential& g, std::size_t k) {
  const std::size_t m = lat.size();
  require(k <= m, "k exceeds the number of cells");
  require(detail::binomial(m, k) <= 1e8, "enumeration guard exceeded: C(M, k) > 1e8");
  const detail::OracleTables tab(p, lat, g);

  std::vector<std::size_t> comb(k);
  for (std::size_t i = 0; i < k; ++i) comb[i] = i;
  std::vector<std::uint8_t> in(m, 0);
  OracleResult res{GridSet(lat), std::numeric_limits<double>::infinity(), 0};
  std::vector<std::size_t> best;
  while (true) {
    std::fill(in.begin(), in.end(), 0);
    for (std::size_t c : comb) in[c] = 1;
    const double e = tab.energy(in);
    ++res.instances_evaluated;
    if (e < res.best_energy) {
      res.best_energy = e;
      best = comb;
    }
    std::size_t i = k;
    while (i > 0 && comb[i - 1] == m - k + i - 1) --i;
    if (i == 0) break;
    ++comb[i - 1];
    for (std::size_t j = i; j < k; ++j) comb[j] = comb[j - 1] + 1;
  }
  for (std::size_t c : best) res.best_set.insert(c);
  return res;
}

/// Optimum for every cardinality 0..M from one pass over all 2^M subsets.
inline std::vector<OracleResult> enumerate_by_cardinality(const Lattice& lat, const KernelParams& p,
                                                          const Potential& g) {
  const std::size_t m = lat.size();
  require(m <= 24, "enumerate_by_cardinality is limited to 24 cells");
  const detail::OracleTables tab(p, lat, g);
  std::vector<double> best_e(m + 1, std::numeric_limits<double>::infinity());
  std::vector<std::uint64_t> best_mask(m + 1, 0), seen(m + 1, 0);
  std::vector<std::uint8_t> in(m, 0);
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    std::size_t count = 0;
    // Bit m-1-i holds cell i, so increasing masks visit each cardinality's
    // subsets in reverse lexicographic order; prefer the larger mask on ties.
    for (std::size_t i = 0; i < m; ++i) {
      in[i] = static_cast<std::uint8_t>((mask >> (m - 1 - i)) & 1);
      count += in[i];
    }
    const double e = tab.energy(in);
    ++seen[count];
    if (e <= best_e[count]) {
      best_e[count] = e;
      best_mask[count] = mask;
    }
  }
  std::vector<OracleResult> out;
  for (std::size_t c = 0; c <= m; ++c) {
    GridSet s(lat);
    for (std::size_t i = 0; i < m; ++i)
      if ((best_mask[c] >> (m - 1 - i)) & 1) s.insert(i);
    out.push_back({s, best_e[c], seen[c]});
  }
  return out;
}

struct PenalizedOptimum {
  GridSet set;
  double energy = 0.0;
  double mu = 0.0;
  int doublings = 0;
};

/// Exact minimizer of F + mu | |E| - m | from per-cardinality optima, doubling
/// mu from mu_start until the optimum has exactly `target` cells.
inline PenalizedOptimum penalized_optimum(const std::vector<OracleResult>& by_count, std::size_t target,
                                          double cell_volume, double mu_start, int max_doublings = 60) {
  require(target < by_count.size(), "target count out of range");
  require(mu_start > 0.0, "mu_start must be positive");
  double mu = mu_start;
  for (int d = 0;; ++d, mu *= 2.0) {
    std::size_t best = 0;
    double best_e = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < by_count.size(); ++c) {
      const double gap = std::abs(static_cast<double>(c) - static_cast<double>(target)) * cell_volume;
      const double e = by_count[c].best_energy + mu * gap;
      if (e < best_e) {
        best_e = e;
        best = c;
      }
    }
    if (best == target || d == max_doublings) return {by_count[best].best_set, best_e, mu, d};
  }
}

}  // namespace fracperim
