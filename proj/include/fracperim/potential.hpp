#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "common.hpp"
#include "lattice.hpp"

namespace fracperim {

enum class PotentialKind { constant, periodic, coercive, sampled };

inline std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::constant: return "constant";
    case PotentialKind::periodic: return "periodic";
    case PotentialKind::coercive: return "coercive";
    case PotentialKind::sampled: return "sampled";
  }
  return "?";
}

/// Scalar field g. Periodic fields are
///   product: A prod_k cos(2 pi f_k (x_k - x0_k))     sum: (A/N) sum_k cos(2 pi f_k (x_k - x0_k))
/// with integer f_k, hence Z^N-periodic. Coercive fields are -a |x - x0|^2 + b.
/// Sampled fields interpolate node values multilinearly.
class Potential {
 public:
  static Potential constant(int dim, double c) {
    Potential g(PotentialKind::constant, dim);
    g.c_ = c;
    return g;
  }

  static Potential periodic(int dim, double amplitude, Coord freq, Point shift = {0.0, 0.0, 0.0},
                            bool sum_form = false) {
    Potential g(PotentialKind::periodic, dim);
    g.c_ = amplitude;
    g.freq_ = freq;
    g.x0_ = shift;
    g.sum_form_ = sum_form;
    return g;
  }

  static Potential coercive(int dim, double a, Point x0 = {0.0, 0.0, 0.0}, double b = 0.0) {
    require(a > 0.0, "coercive potential needs a > 0");
    Potential g(PotentialKind::coercive, dim);
    g.c_ = a;
    g.x0_ = x0;
    g.b_ = b;
    return g;
  }

  /// Node k sits at origin + k * spacing; values are row-major with the first axis slowest.
  static Potential sampled(int dim, double spacing, Coord extents, Point origin, std::vector<double> values) {
    require(spacing > 0.0, "sampled potential needs positive spacing");
    std::size_t n = 1;
    for (int k = 0; k < dim; ++k) {
      require(extents[k] >= 2, "sampled potential needs at least 2 nodes per axis");
      n *= static_cast<std::size_t>(extents[k]);
    }
    for (int k = dim; k < 3; ++k) extents[k] = 1;
    require(values.size() == n, "sampled potential payload size does not match extents");
    Potential g(PotentialKind::sampled, dim);
    g.spacing_ = spacing;
    g.nodes_ = extents;
    g.x0_ = origin;
    g.values_ = std::move(values);
    return g;
  }

  PotentialKind kind() const { return kind_; }
  int dim() const { return dim_; }

  double eval(const Point& x) const {
    switch (kind_) {
      case PotentialKind::constant: return c_;
      case PotentialKind::periodic: return eval_periodic(x);
      case PotentialKind::coercive: {
        double r2 = 0.0;
        for (int k = 0; k < dim_; ++k) r2 += (x[k] - x0_[k]) * (x[k] - x0_[k]);
        return b_ - c_ * r2;
      }
      case PotentialKind::sampled: return eval_sampled(x);
    }
    return 0.0;
  }

  /// g(x / lambda); the lambda^{-s} prefactor belongs to the energy assembly.
  double rescaled_eval(const Point& x, double lambda) const {
    require(lambda > 0.0, "rescaling factor must be positive");
    if (lambda == 1.0) return eval(x);
    Point y{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) y[k] = x[k] / lambda;
    return eval(y);
  }

 private:
  Potential(PotentialKind kind, int dim) : kind_(kind), dim_(dim) {
    require(dim >= 1 && dim <= 3, "potential dimension must be 1, 2 or 3");
  }

  double eval_periodic(const Point& x) const {
    double prod = 1.0, sum = 0.0;
    for (int k = 0; k < dim_; ++k) {
      const double t = x[k] - x0_[k];
      const double frac = t - std::floor(t);
      const double v = std::cos(2.0 * std::numbers::pi * freq_[k] * frac);
      prod *= v;
      sum += v;
    }
    return sum_form_ ? c_ * sum / dim_ : c_ * prod;
  }

  double eval_sampled(const Point& x) const {
    std::array<std::size_t, 3> base{0, 0, 0};
    std::array<double, 3> frac{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) {
      const double u = (x[k] - x0_[k]) / spacing_;
      const double top = nodes_[k] - 1;
      if (!(u >= 0.0 && u <= top)) throw DomainError("point outside the sampled potential domain");
      const double fl = std::min(std::floor(u), top - 1.0);
      base[k] = static_cast<std::size_t>(fl);
      frac[k] = u - fl;
    }
    double acc = 0.0;
    for (int corner = 0; corner < (1 << dim_); ++corner) {
      double w = 1.0;
      std::size_t idx = 0;
      for (int k = 0; k < 3; ++k) {
        const int bit = k < dim_ ? (corner >> k) & 1 : 0;
        if (k < dim_) w *= bit ? frac[k] : 1.0 - frac[k];
        idx = idx * nodes_[k] + base[k] + bit;
      }
      acc += w * values_[idx];
    }
    return acc;
  }

  PotentialKind kind_;
  int dim_;
  double c_ = 0.0;
  double b_ = 0.0;
  Coord freq_{1, 1, 1};
  Point x0_{0.0, 0.0, 0.0};
  bool sum_form_ = false;
  double spacing_ = 1.0;
  Coord nodes_{1, 1, 1};
  std::vector<double> values_;
};

/// Midpoint rule: sum over members of g(center) h^N.
inline double integral_over(const Potential& g, const GridSet& e) {
  const Lattice& lat = e.lattice();
  double acc = 0.0;
  for (std::size_t i : e.members()) acc += g.eval(lat.center(i));
  return acc * lat.cell_volume();
}

/// g at every cell center of the window.
inline std::vector<double> sample_cells(const Potential& g, const Lattice& lat) {
  std::vector<double> out(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) out[i] = g.eval(lat.center(i));
  return out;
}

struct WindowStats {
  double sup = 0.0;
  double sup_abs = 0.0;
  /// Largest difference quotient between face-adjacent cell centers.
  double lipschitz = 0.0;
};

inline WindowStats window_stats(const Potential& g, const Lattice& lat) {
  const auto vals = sample_cells(g, lat);
  WindowStats st;
  st.sup = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < lat.size(); ++i) {
    st.sup = std::max(st.sup, vals[i]);
    st.sup_abs = std::max(st.sup_abs, std::abs(vals[i]));
    const Coord c = lat.coord(i);
    for (int k = 0; k < lat.dim(); ++k) {
      Coord n = c;
      ++n[k];
      if (!lat.contains(n)) continue;
      st.lipschitz = std::max(st.lipschitz, std::abs(vals[lat.index(n)] - vals[i]) / lat.h());
    }
  }
  return st;
}

}  // namespace fracperim
