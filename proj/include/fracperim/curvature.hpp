#pragma once

// Nonlocal mean curvature with the sign convention
//   H(x) = c_N * PV int (chi_{E^c}(y) - chi_E(y)) |x - y|^{-(N+s)} dy,
// positive on convex sets, so that volume-constrained minimizers of
// P_s - int_E g satisfy H = g + mu on the boundary.
//
// The default scheme evaluates the integral on lattice faces between a member
// a and a non-member b. The cell-averaged integrals over a and over b each
// miss their own cell, and the two omissions cancel in the average, giving
//   H_f = (P_cell - phi(a) - phi(b)) / h^N,   phi(i) = sum_{j in E, j != i} W(i - j).
// Face values carry staircase noise of order h^{-s}, so the value reported at
// a boundary cell is a tent-weighted average of nearby faces whose normals
// agree with the local mean normal.

#include <cmath>
#include <memory>
#include <optional>
#include <vector>

#include "kernel.hpp"
#include "lattice.hpp"
#include "potential.hpp"

namespace fracperim {

struct CurvatureOptions {
  enum class Normalization { omega, raw };
  enum class Exterior { complement, truncated };
  enum class Scheme { smoothed_face, cell_center };

  /// omega: divide by omega_{N-2} (omega_0 = 1, omega_1 = 2); N = 1 stays raw.
  Normalization normalization = Normalization::omega;
  /// complement: the window exterior counts as outside E; truncated: it is ignored.
  Exterior exterior = Exterior::complement;
  Scheme scheme = Scheme::smoothed_face;
  /// Averaging radius of the face scheme, in cells.
  double smoothing_cells = 6.0;
};

inline double curvature_normalization(int dim, CurvatureOptions::Normalization n) {
  if (n == CurvatureOptions::Normalization::raw || dim < 2) return 1.0;
  return 1.0 / unit_ball_volume(dim - 2);
}

struct CurvatureSample {
  Coord cell{0, 0, 0};
  Point x{0.0, 0.0, 0.0};
  double hs = 0.0;
  double g_at_x = 0.0;
  double residual = 0.0;
};

class CurvatureEvaluator {
 public:
  CurvatureEvaluator(const GridSet& e, const WindowKernel& k, CurvatureOptions opt = {})
      : set_(e), kernel_(k), opt_(opt) {
    if (!(e.lattice() == k.lattice())) throw InvalidArgument("set and kernel were built for different lattices");
    const Lattice& lat = e.lattice();
    norm_ = curvature_normalization(lat.dim(), opt.normalization);
    members_ = e.members();
    if (opt.scheme == CurvatureOptions::Scheme::smoothed_face) build_faces();
    else point_kernel_ = std::make_unique<PointWindowKernel>(k.params(), lat);
  }

  double hs_at(const Coord& cell) const {
    const Lattice& lat = set_.lattice();
    if (!lat.contains(cell) || !set_.contains(cell)) throw InvalidArgument("curvature requested at a non-member cell");
    const std::size_t idx = lat.index(cell);
    if (!is_boundary_cell(set_, idx)) throw InvalidArgument("curvature is only defined at boundary cells");
    return opt_.scheme == CurvatureOptions::Scheme::smoothed_face ? face_average(cell) : cell_center(idx);
  }

 private:
  struct Face {
    Point mid;
    Point normal;
    double value;
  };

  // phi(i) for a cell anywhere on the integer grid (ghost cells allowed).
  double phi_direct(const Coord& c) const {
    const Lattice& lat = set_.lattice();
    double acc = 0.0;
    for (std::size_t j : members_) {
      const Coord q = lat.coord(j);
      const Coord d{c[0] - q[0], c[1] - q[1], c[2] - q[2]};
      if (d[0] || d[1] || d[2]) acc += kernel_.weight_offset(d);
    }
    return acc;
  }

  double window_sum_ghost(const Coord& c) const {
    const Lattice& lat = set_.lattice();
    double acc = 0.0;
    for (std::size_t j = 0; j < lat.size(); ++j) {
      const Coord q = lat.coord(j);
      acc += kernel_.weight_offset({c[0] - q[0], c[1] - q[1], c[2] - q[2]});
    }
    return acc;
  }

  // Cell-averaged (complement - E) integral from cell c, times h^N.
  double kappa(const Coord& c, bool in_window, std::size_t idx) const {
    const double phi = in_window ? phi_[idx] : phi_direct(c);
    if (opt_.exterior == CurvatureOptions::Exterior::complement) return kernel_.cell_total() - 2.0 * phi;
    const double s = in_window ? kernel_.window_sum(idx) : window_sum_ghost(c);
    return s - 2.0 * phi;
  }

  void build_faces() {
    const Lattice& lat = set_.lattice();
    phi_.assign(lat.size(), 0.0);
    for (std::size_t j : members_)
      kernel_.visit_row(j, [&](std::size_t i, double w) { phi_[i] += w; });
    const double hn = lat.cell_volume();
    const auto dirs = face_directions(lat.dim());
    for (std::size_t a : members_) {
      const Coord ca = lat.coord(a);
      std::optional<double> ka;
      for (const Coord& d : dirs) {
        const Coord cb = add(ca, d);
        const bool inside = lat.contains(cb);
        if (inside && set_.contains(lat.index(cb))) continue;
        if (!ka) ka = kappa(ca, true, a);
        const double kb = kappa(cb, inside, inside ? lat.index(cb) : 0);
        Face f;
        const Point pa = lat.center(ca);
        for (int k = 0; k < 3; ++k) {
          f.mid[k] = pa[k] + 0.5 * d[k] * lat.h();
          f.normal[k] = d[k];
        }
        f.value = 0.5 * (*ka + kb) / hn;
        faces_.push_back(f);
      }
    }
  }

  double face_average(const Coord& cell) const {
    const Lattice& lat = set_.lattice();
    const Point x = lat.center(cell);
    const double reach = opt_.smoothing_cells * lat.h();
    std::vector<std::pair<const Face*, double>> near;
    Point nu{0.0, 0.0, 0.0};
    for (const Face& f : faces_) {
      const double w = 1.0 - std::sqrt(distance2(f.mid, x)) / reach;
      if (w <= 0.0) continue;
      near.emplace_back(&f, w);
      for (int k = 0; k < 3; ++k) nu[k] += w * f.normal[k];
    }
    const double len = std::sqrt(nu[0] * nu[0] + nu[1] * nu[1] + nu[2] * nu[2]);
    double num = 0.0, den = 0.0;
    if (len > 1e-12) {
      for (const auto& [f, w] : near) {
        const double align = (f->normal[0] * nu[0] + f->normal[1] * nu[1] + f->normal[2] * nu[2]) / len;
        if (align <= 0.0) continue;
        num += w * align * f->value;
        den += w * align;
      }
    }
    if (den <= 1e-12) {
      num = den = 0.0;
      for (const auto& [f, w] : near) {
        num += w * f->value;
        den += w;
      }
    }
    return norm_ * num / den;
  }

  // Point evaluation at the cell center; the self cell contributes 0.
  double cell_center(std::size_t idx) const {
    const Lattice& lat = set_.lattice();
    const Coord c = lat.coord(idx);
    double acc = 0.0;
    for (std::size_t j = 0; j < lat.size(); ++j) {
      if (j == idx) continue;
      const Coord q = lat.coord(j);
      const double v = point_kernel_->weight({q[0] - c[0], q[1] - c[1], q[2] - c[2]});
      acc += set_.contains(j) ? -v : v;
    }
    if (opt_.exterior == CurvatureOptions::Exterior::complement) acc += point_kernel_->exterior(idx);
    return norm_ * acc;
  }

  const GridSet& set_;
  const WindowKernel& kernel_;
  CurvatureOptions opt_;
  double norm_ = 1.0;
  std::vector<std::size_t> members_;
  std::vector<double> phi_;
  std::vector<Face> faces_;
  std::unique_ptr<PointWindowKernel> point_kernel_;
};

inline double hs_at(const GridSet& e, const Coord& cell, const WindowKernel& k, CurvatureOptions opt = {}) {
  return CurvatureEvaluator(e, k, opt).hs_at(cell);
}

/// One sample per boundary cell, in lexicographic cell order.
inline std::vector<CurvatureSample> boundary_profile(const GridSet& e, const Potential& g, const WindowKernel& k,
                                                     CurvatureOptions opt = {}) {
  if (e.empty() || e.count() == e.lattice().size())
    throw InvalidArgument("boundary profile needs a set with nonempty complement");
  const CurvatureEvaluator eval(e, k, opt);
  const Lattice& lat = e.lattice();
  const auto cells = boundary_cells(e);
  std::vector<CurvatureSample> out(cells.size());
  parallel_for(cells.size(), [&](std::size_t n) {
    CurvatureSample& c = out[n];
    c.cell = lat.coord(cells[n]);
    c.x = lat.center(cells[n]);
    c.hs = eval.hs_at(c.cell);
    c.g_at_x = g.eval(c.x);
    c.residual = c.hs - c.g_at_x;
  });
  return out;
}

struct MuEstimate {
  double mean = 0.0;
  /// Population standard deviation of the residuals over max(|mean|, floor).
  double spread = 0.0;
};

inline MuEstimate mu_estimate(const std::vector<CurvatureSample>& profile, double floor = 1e-12) {
  require(!profile.empty(), "mu estimate needs a nonempty profile");
  double mean = 0.0;
  for (const auto& c : profile) mean += c.residual;
  mean /= static_cast<double>(profile.size());
  double var = 0.0;
  for (const auto& c : profile) var += (c.residual - mean) * (c.residual - mean);
  var /= static_cast<double>(profile.size());
  return {mean, std::sqrt(var) / std::max(std::abs(mean), floor)};
}

}  // namespace fracperim
