#pragma once

// Discrete geometry substrate: the computational window, indicator sets of
// cells on it, ball rasterization, set algebra and shape diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "common.hpp"

namespace fracperim {

/// Axis-aligned window of N-dimensional cubic cells of side h.
class Lattice {
 public:
  Lattice() = default;

  Lattice(int dim, double h, const std::vector<int>& extents, const std::vector<double>& origin = {})
      : dim_(dim), h_(h) {
    require(dim >= 1 && dim <= 3, "lattice dimension must be 1, 2 or 3");
    require(std::isfinite(h) && h > 0.0, "lattice cell size must be positive");
    require(static_cast<int>(extents.size()) == dim, "lattice extents must have one entry per axis");
    require(origin.empty() || static_cast<int>(origin.size()) == dim,
            "lattice origin must have one entry per axis");
    for (int k = 0; k < dim; ++k) {
      require(extents[k] >= 1, "lattice extents must be >= 1");
      extents_[k] = extents[k];
      if (!origin.empty()) origin_[k] = origin[k];
    }
    size_ = static_cast<std::size_t>(extents_[0]) * extents_[1] * extents_[2];
    cell_volume_ = ipow(h_, dim_);
  }

  int dim() const { return dim_; }
  double h() const { return h_; }
  const Coord& extents() const { return extents_; }
  const Point& origin() const { return origin_; }
  /// Number of cells M.
  std::size_t size() const { return size_; }
  /// h^N.
  double cell_volume() const { return cell_volume_; }

  /// Row-major index; the first axis is most significant so index order is
  /// lexicographic order of coordinates.
  std::size_t index(const Coord& c) const {
    return (static_cast<std::size_t>(c[0]) * extents_[1] + c[1]) * extents_[2] + c[2];
  }

  Coord coord(std::size_t idx) const {
    Coord c{0, 0, 0};
    c[2] = static_cast<int>(idx % extents_[2]);
    idx /= extents_[2];
    c[1] = static_cast<int>(idx % extents_[1]);
    c[0] = static_cast<int>(idx / extents_[1]);
    return c;
  }

  bool contains(const Coord& c) const {
    for (int k = 0; k < 3; ++k)
      if (c[k] < 0 || c[k] >= extents_[k]) return false;
    return true;
  }

  Point center(const Coord& c) const {
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) x[k] = origin_[k] + (c[k] + 0.5) * h_;
    return x;
  }
  Point center(std::size_t idx) const { return center(coord(idx)); }

  Point upper_corner() const {
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < dim_; ++k) x[k] = origin_[k] + extents_[k] * h_;
    return x;
  }

  /// Window diameter in cell units.
  double diameter_cells() const {
    double d2 = 0.0;
    for (int k = 0; k < dim_; ++k) d2 += static_cast<double>(extents_[k]) * extents_[k];
    return std::sqrt(d2);
  }
  double diameter() const { return diameter_cells() * h_; }

  friend bool operator==(const Lattice& a, const Lattice& b) {
    return a.dim_ == b.dim_ && a.h_ == b.h_ && a.extents_ == b.extents_ && a.origin_ == b.origin_;
  }

 private:
  int dim_ = 1;
  double h_ = 1.0;
  Coord extents_{1, 1, 1};
  Point origin_{0.0, 0.0, 0.0};
  std::size_t size_ = 1;
  double cell_volume_ = 1.0;
};

inline double distance2(const Point& a, const Point& b) {
  double d2 = 0.0;
  for (int k = 0; k < 3; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
  return d2;
}

/// Ball B(center, radius).
struct Ball {
  Point center{0.0, 0.0, 0.0};
  double radius = 1.0;

  Ball() = default;
  Ball(Point c, double r) : center(c), radius(r) { require(r > 0.0, "ball radius must be positive"); }
};

/// A finite set of lattice cells, stored as a membership mask over the window.
class GridSet {
 public:
  GridSet() = default;
  explicit GridSet(Lattice lattice) : lattice_(std::move(lattice)), mask_(lattice_.size(), 0) {}

  static GridSet full(const Lattice& lattice) {
    GridSet e(lattice);
    std::fill(e.mask_.begin(), e.mask_.end(), std::uint8_t{1});
    e.count_ = lattice.size();
    return e;
  }

  static GridSet from_indices(const Lattice& lattice, std::span<const std::size_t> indices) {
    GridSet e(lattice);
    for (std::size_t i : indices) {
      require(i < lattice.size(), "cell index outside the lattice");
      e.insert(i);
    }
    return e;
  }

  static GridSet from_coords(const Lattice& lattice, std::span<const Coord> coords) {
    GridSet e(lattice);
    for (const Coord& c : coords) {
      require(lattice.contains(c), "cell outside the lattice");
      e.insert(lattice.index(c));
    }
    return e;
  }

  const Lattice& lattice() const { return lattice_; }
  std::size_t count() const { return count_; }
  bool empty() const { return count_ == 0; }
  /// |E| = count * h^N.
  double volume() const { return static_cast<double>(count_) * lattice_.cell_volume(); }

  bool contains(std::size_t idx) const { return mask_[idx] != 0; }
  bool contains(const Coord& c) const { return lattice_.contains(c) && mask_[lattice_.index(c)] != 0; }

  void insert(std::size_t idx) {
    if (!mask_[idx]) {
      mask_[idx] = 1;
      ++count_;
    }
  }
  void erase(std::size_t idx) {
    if (mask_[idx]) {
      mask_[idx] = 0;
      --count_;
    }
  }
  void toggle(std::size_t idx) { contains(idx) ? erase(idx) : insert(idx); }

  /// Sorted member indices.
  std::vector<std::size_t> members() const {
    std::vector<std::size_t> out;
    out.reserve(count_);
    for (std::size_t i = 0; i < mask_.size(); ++i)
      if (mask_[i]) out.push_back(i);
    return out;
  }

  const std::vector<std::uint8_t>& mask() const { return mask_; }

  friend bool operator==(const GridSet& a, const GridSet& b) {
    return a.lattice_ == b.lattice_ && a.mask_ == b.mask_;
  }

 private:
  Lattice lattice_;
  std::vector<std::uint8_t> mask_;
  std::size_t count_ = 0;
};

inline double volume(const GridSet& e) { return e.volume(); }

namespace detail {
inline void require_same_lattice(const GridSet& a, const GridSet& b) {
  if (!(a.lattice() == b.lattice())) throw InvalidArgument("sets live on different lattices");
}

template <class Op>
GridSet combine(const GridSet& a, const GridSet& b, Op op) {
  require_same_lattice(a, b);
  GridSet out(a.lattice());
  for (std::size_t i = 0; i < a.lattice().size(); ++i)
    if (op(a.contains(i), b.contains(i))) out.insert(i);
  return out;
}
}  // namespace detail

inline GridSet unite(const GridSet& a, const GridSet& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x || y; });
}
inline GridSet intersect(const GridSet& a, const GridSet& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x && y; });
}
inline GridSet subtract(const GridSet& a, const GridSet& b) {
  return detail::combine(a, b, [](bool x, bool y) { return x && !y; });
}
/// Complement within the window.
inline GridSet complement(const GridSet& a) {
  GridSet out(a.lattice());
  for (std::size_t i = 0; i < a.lattice().size(); ++i)
    if (!a.contains(i)) out.insert(i);
  return out;
}

inline bool disjoint(const GridSet& a, const GridSet& b) {
  detail::require_same_lattice(a, b);
  for (std::size_t i = 0; i < a.lattice().size(); ++i)
    if (a.contains(i) && b.contains(i)) return false;
  return true;
}

/// |A Δ B| = h^N * #(members(A) Δ members(B)).
inline double symdiff_volume(const GridSet& a, const GridSet& b) {
  detail::require_same_lattice(a, b);
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.lattice().size(); ++i) n += (a.contains(i) != b.contains(i));
  return static_cast<double>(n) * a.lattice().cell_volume();
}

/// Integer translation. Throws if a member would leave the window.
inline GridSet translate(const GridSet& e, const Coord& shift) {
  const Lattice& lat = e.lattice();
  GridSet out(lat);
  for (std::size_t i : e.members()) {
    Coord c = lat.coord(i);
    for (int k = 0; k < 3; ++k) c[k] += shift[k];
    require(lat.contains(c), "translation moves the set outside the window");
    out.insert(lat.index(c));
  }
  return out;
}

/// Unit face-neighbour offsets of the lattice dimension, ordered (-e_0, +e_0, -e_1, ...).
inline std::vector<Coord> face_directions(int dim) {
  std::vector<Coord> dirs;
  for (int k = 0; k < dim; ++k) {
    Coord m{0, 0, 0}, p{0, 0, 0};
    m[k] = -1;
    p[k] = 1;
    dirs.push_back(m);
    dirs.push_back(p);
  }
  return dirs;
}

inline Coord add(const Coord& a, const Coord& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }

/// Member with at least one face neighbour outside E (the window exterior counts as outside).
inline bool is_boundary_cell(const GridSet& e, std::size_t idx) {
  if (!e.contains(idx)) return false;
  const Lattice& lat = e.lattice();
  const Coord c = lat.coord(idx);
  for (const Coord& d : face_directions(lat.dim()))
    if (!e.contains(add(c, d))) return true;
  return false;
}

/// Non-member with at least one face neighbour in E.
inline bool is_exterior_adjacent(const GridSet& e, std::size_t idx) {
  if (e.contains(idx)) return false;
  const Lattice& lat = e.lattice();
  const Coord c = lat.coord(idx);
  for (const Coord& d : face_directions(lat.dim()))
    if (e.contains(add(c, d))) return true;
  return false;
}

inline std::vector<std::size_t> boundary_cells(const GridSet& e) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < e.lattice().size(); ++i)
    if (is_boundary_cell(e, i)) out.push_back(i);
  return out;
}

/// Cells whose centers lie strictly inside the ball.
inline GridSet rasterize_ball(const Lattice& lat, const Ball& b) {
  GridSet out(lat);
  const double h = lat.h();
  Coord lo{0, 0, 0}, hi{0, 0, 0};
  for (int k = 0; k < lat.dim(); ++k) {
    const double a = (b.center[k] - b.radius - lat.origin()[k]) / h - 0.5;
    const double z = (b.center[k] + b.radius - lat.origin()[k]) / h - 0.5;
    lo[k] = std::max(0, static_cast<int>(std::floor(a)));
    hi[k] = std::min(lat.extents()[k] - 1, static_cast<int>(std::ceil(z)));
    if (lo[k] > hi[k]) return out;
  }
  const double r2 = b.radius * b.radius;
  Coord c{0, 0, 0};
  for (c[0] = lo[0]; c[0] <= hi[0]; ++c[0])
    for (c[1] = lo[1]; c[1] <= hi[1]; ++c[1])
      for (c[2] = lo[2]; c[2] <= hi[2]; ++c[2])
        if (distance2(lat.center(c), b.center) < r2) out.insert(lat.index(c));
  return out;
}

/// The k cells nearest to `center` (ties broken by index). An exact-count
/// stand-in for a ball of volume k h^N.
inline GridSet nearest_cells(const Lattice& lat, const Point& center, std::size_t k) {
  require(k <= lat.size(), "more cells requested than the window holds");
  std::vector<std::pair<double, std::size_t>> order;
  order.reserve(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) order.emplace_back(distance2(lat.center(i), center), i);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end());
  GridSet out(lat);
  for (std::size_t j = 0; j < k; ++j) out.insert(order[j].second);
  return out;
}

/// Barycenter of the member cell centers.
inline Point barycenter(const GridSet& e) {
  require(!e.empty(), "barycenter of an empty set");
  Point acc{0.0, 0.0, 0.0};
  for (std::size_t i : e.members()) {
    const Point x = e.lattice().center(i);
    for (int k = 0; k < 3; ++k) acc[k] += x[k];
  }
  for (double& v : acc) v /= static_cast<double>(e.count());
  return acc;
}

struct AsymmetryResult {
  double value = 0.0;
  Point center{0.0, 0.0, 0.0};
};

/// min_x |E Δ B(x, r)| over ball centers at every cell center for which the
/// ball fits inside the window, refined on an h/4 grid within one cell of the
/// best integer candidate. The result is an upper bound on the continuum value.
inline AsymmetryResult best_translate_asymmetry(const GridSet& e, double r) {
  require(!e.empty(), "asymmetry of an empty set is undefined");
  require(r > 0.0, "asymmetry radius must be positive");
  const Lattice& lat = e.lattice();
  const int dim = lat.dim();
  const double h = lat.h();
  const Point lo_corner = lat.origin();
  const Point hi_corner = lat.upper_corner();

  auto fits = [&](const Point& x) {
    for (int k = 0; k < dim; ++k)
      if (x[k] - r < lo_corner[k] || x[k] + r > hi_corner[k]) return false;
    return true;
  };

  // Ball pattern for a center sitting on a cell center.
  const int reach = static_cast<int>(std::ceil(r / h));
  std::vector<Coord> pattern;
  {
    Coord d{0, 0, 0};
    const int r0 = reach, r1 = dim > 1 ? reach : 0, r2 = dim > 2 ? reach : 0;
    for (d[0] = -r0; d[0] <= r0; ++d[0])
      for (d[1] = -r1; d[1] <= r1; ++d[1])
        for (d[2] = -r2; d[2] <= r2; ++d[2]) {
          const double dd = (static_cast<double>(d[0]) * d[0] + static_cast<double>(d[1]) * d[1] +
                             static_cast<double>(d[2]) * d[2]) * h * h;
          if (dd < r * r) pattern.push_back(d);
        }
  }

  bool any_fit = false;
  for (std::size_t i = 0; i < lat.size() && !any_fit; ++i) any_fit = fits(lat.center(i));

  const double cv = lat.cell_volume();
  double best = std::numeric_limits<double>::infinity();
  Point best_center{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Point x = lat.center(i);
    if (any_fit && !fits(x)) continue;
    const Coord c = lat.coord(i);
    std::size_t inside = 0, overlap = 0;
    for (const Coord& d : pattern) {
      const Coord q = add(c, d);
      if (!lat.contains(q)) continue;
      ++inside;
      overlap += e.contains(lat.index(q));
    }
    const double v = static_cast<double>(e.count() + inside - 2 * overlap) * cv;
    if (v < best) {
      best = v;
      best_center = x;
    }
  }

  const Point base = best_center;
  const int r0 = 4, r1 = dim > 1 ? 4 : 0, r2 = dim > 2 ? 4 : 0;
  for (int a = -r0; a <= r0; ++a)
    for (int b = -r1; b <= r1; ++b)
      for (int c = -r2; c <= r2; ++c) {
        if (a == 0 && b == 0 && c == 0) continue;
        Point x = base;
        x[0] += a * 0.25 * h;
        x[1] += b * 0.25 * h;
        x[2] += c * 0.25 * h;
        if (any_fit && !fits(x)) continue;
        const double v = symdiff_volume(e, rasterize_ball(lat, Ball(x, r)));
        if (v < best) {
          best = v;
          best_center = x;
        }
      }
  return {best, best_center};
}

struct TailSample {
  double r = 0.0;
  double mass = 0.0;
};

/// f(r) = |E \ B(center, r)| at r = k h, k = 0 .. K, where K h exceeds the
/// largest distance from `center` to a window corner.
inline std::vector<TailSample> tail_mass_profile(const GridSet& e, const Point& center) {
  const Lattice& lat = e.lattice();
  const double h = lat.h();
  double far2 = 0.0;
  const Point lo = lat.origin(), hi = lat.upper_corner();
  for (int k = 0; k < lat.dim(); ++k) {
    const double m = std::max(std::abs(center[k] - lo[k]), std::abs(center[k] - hi[k]));
    far2 += m * m;
  }
  const int kmax = static_cast<int>(std::ceil(std::sqrt(far2) / h)) + 1;

  std::vector<double> dist;
  dist.reserve(e.count());
  for (std::size_t i : e.members()) dist.push_back(std::sqrt(distance2(lat.center(i), center)));
  std::sort(dist.begin(), dist.end());

  std::vector<TailSample> out;
  out.reserve(static_cast<std::size_t>(kmax) + 1);
  std::size_t below = 0;  // members with distance < r
  for (int k = 0; k <= kmax; ++k) {
    const double r = k * h;
    while (below < dist.size() && dist[below] < r) ++below;
    out.push_back({r, static_cast<double>(dist.size() - below) * lat.cell_volume()});
  }
  return out;
}

/// Smallest sampled radius at which the tail mass vanishes.
inline double tail_vanishing_radius(const std::vector<TailSample>& profile) {
  for (const auto& t : profile)
    if (t.mass == 0.0) return t.r;
  return std::numeric_limits<double>::infinity();
}

}  // namespace fracperim
