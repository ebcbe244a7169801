#pragma once

// Quadrature of the Riesz kernel |x - y|^{-(N+s)} over pairs of lattice
// cells, point-to-cell integrals, and the analytic exterior tail.
//
// Cell weights are homogeneous: W_h(d) = h^{N-s} W_1(d), so tables are built
// once for unit cells and scaled. For unit cells at offset d:
//   * |d|_inf > near_field_radius: single midpoint |d|^{-(N+s)}.
//   * 2 <= |d|_inf <= near_field_radius: both cells are split dyadically into
//     2^{lN} leaves and leaf pairs are evaluated at their midpoints; levels
//     depth-2..depth are Richardson-extrapolated (the integrand is smooth).
//   * |d|_inf == 1 (touching cells, singular integrand): splitting both cells
//     once expresses W(d) through the same touching weights scaled by
//     2^{-(N-s)} plus non-touching children. The resulting linear system over
//     the 3^N - 1 touching offsets is solved exactly; only the children
//     carry quadrature error.

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "common.hpp"
#include "lattice.hpp"

namespace fracperim {

struct KernelParams {
  double s = 0.5;
  int dim = 2;
  double h = 1.0;
  int near_field_radius = 3;
  int subdivision_depth = 4;
  /// Physical radius of the explicit far-field sum; 0 selects 4x the window diameter.
  double far_radius = 0.0;

  void validate() const {
    require(s > 0.0 && s < 1.0, "kernel exponent s must lie in (0, 1)");
    require(dim >= 1 && dim <= 3, "kernel dimension must be 1, 2 or 3");
    require(std::isfinite(h) && h > 0.0, "kernel cell size must be positive");
    require(near_field_radius >= 1, "near_field_radius must be >= 1");
    require(subdivision_depth >= 1 && subdivision_depth <= 8, "subdivision_depth must lie in [1, 8]");
    require(far_radius >= 0.0, "far_radius must be nonnegative");
  }
};

/// (N omega_N / s) rho^{-s}: the kernel integrated over the complement of B(x, rho).
inline double exterior_tail(const KernelParams& p, double rho) {
  require(rho > 0.0, "exterior_tail needs rho > 0");
  return p.dim * unit_ball_volume(p.dim) / p.s * std::pow(rho, -p.s);
}

/// Sorted absolute values, largest first.
inline Coord canonical_offset(const Coord& d) {
  Coord a{std::abs(d[0]), std::abs(d[1]), std::abs(d[2])};
  std::sort(a.begin(), a.end(), std::greater<>());
  return a;
}

namespace detail {

/// Leaf-pair midpoint sum for unit cells at offset e, 2^level leaves per axis.
/// Leaf pairs are grouped by their integer separation, which turns the
/// (2^{lN})^2 pair sum into a (2^{l+1}-1)^N sum with tent multiplicities.
inline double leaf_pair_midpoint(const Coord& e, int dim, double s, int level) {
  const long n = 1L << level;
  const double expo = -0.5 * (dim + s);
  std::array<std::vector<std::pair<double, double>>, 3> axes;
  for (int k = 0; k < 3; ++k) {
    if (k >= dim) {
      axes[k].emplace_back(0.0, 1.0);
      continue;
    }
    for (long t = -(n - 1); t <= n - 1; ++t) {
      const double q = static_cast<double>(e[k] * n + t);
      axes[k].emplace_back(q * q, static_cast<double>(n - std::labs(t)));
    }
  }
  double sum = 0.0;
  for (const auto& [q0, w0] : axes[0])
    for (const auto& [q1, w1] : axes[1]) {
      double inner = 0.0;
      for (const auto& [q2, w2] : axes[2]) {
        const double r2 = q0 + q1 + q2;
        if (r2 > 0.0) inner += w2 * std::pow(r2, expo);
      }
      sum += w0 * w1 * inner;
    }
  return sum * std::pow(static_cast<double>(n), s - dim);
}

/// Richardson-extrapolated leaf midpoint rule for a non-touching pair.
inline double smooth_pair_integral(const Coord& e, int dim, double s, int depth) {
  const int l0 = std::max(0, depth - 2);
  std::vector<double> r;
  for (int l = l0; l <= depth; ++l) r.push_back(leaf_pair_midpoint(e, dim, s, l));
  double factor = 4.0;
  while (r.size() > 1) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) r[i] = (factor * r[i + 1] - r[i]) / (factor - 1.0);
    r.pop_back();
    factor *= 4.0;
  }
  return r[0];
}

inline int ternary_code(const Coord& d, int dim) {
  int code = 0, base = 1;
  for (int k = 0; k < dim; ++k) {
    code += (d[k] + 1) * base;
    base *= 3;
  }
  return code;
}

/// Unit weights of all touching offsets (|d|_inf == 1), indexed by ternary code.
inline std::vector<double> touching_unit_weights(int dim, double s, int depth) {
  int count = 1;
  for (int k = 0; k < dim; ++k) count *= 3;
  const int zero = ternary_code({0, 0, 0}, dim);

  std::vector<Coord> offsets(count);
  for (int code = 0; code < count; ++code) {
    int c = code;
    Coord d{0, 0, 0};
    for (int k = 0; k < dim; ++k) {
      d[k] = c % 3 - 1;
      c /= 3;
    }
    offsets[code] = d;
  }

  std::map<Coord, double> child_cache;
  auto smooth = [&](const Coord& e) {
    const Coord key = canonical_offset(e);
    auto it = child_cache.find(key);
    if (it != child_cache.end()) return it->second;
    const double v = smooth_pair_integral(key, dim, s, depth);
    child_cache.emplace(key, v);
    return v;
  };

  // (I - A) u = b over all codes; the zero code row is the identity.
  std::vector<double> a(static_cast<std::size_t>(count) * count, 0.0), b(count, 0.0);
  const double f = std::pow(2.0, -(dim - s));
  const int children = 1 << dim;
  for (int code = 0; code < count; ++code) {
    a[code * count + code] = 1.0;
    if (code == zero) continue;
    const Coord& d = offsets[code];
    for (int ma = 0; ma < children; ++ma)
      for (int mb = 0; mb < children; ++mb) {
        Coord e{0, 0, 0};
        int linf = 0;
        for (int k = 0; k < dim; ++k) {
          e[k] = 2 * d[k] + ((mb >> k) & 1) - ((ma >> k) & 1);
          linf = std::max(linf, std::abs(e[k]));
        }
        if (linf <= 1)
          a[code * count + ternary_code(e, dim)] -= f;
        else
          b[code] += f * smooth(e);
      }
  }

  // Gaussian elimination with partial pivoting.
  for (int col = 0; col < count; ++col) {
    int piv = col;
    for (int r = col + 1; r < count; ++r)
      if (std::abs(a[r * count + col]) > std::abs(a[piv * count + col])) piv = r;
    if (piv != col) {
      for (int c = 0; c < count; ++c) std::swap(a[col * count + c], a[piv * count + c]);
      std::swap(b[col], b[piv]);
    }
    const double p = a[col * count + col];
    for (int r = col + 1; r < count; ++r) {
      const double m = a[r * count + col] / p;
      if (m == 0.0) continue;
      for (int c = col; c < count; ++c) a[r * count + c] -= m * a[col * count + c];
      b[r] -= m * b[col];
    }
  }
  std::vector<double> u(count, 0.0);
  for (int r = count - 1; r >= 0; --r) {
    double acc = b[r];
    for (int c = r + 1; c < count; ++c) acc -= a[r * count + c] * u[c];
    u[r] = acc / a[r * count + r];
  }

  // Every member of a symmetry orbit takes the value of its canonical representative.
  std::vector<double> out(count, 0.0);
  for (int code = 0; code < count; ++code) {
    if (code == zero) continue;
    out[code] = u[ternary_code(canonical_offset(offsets[code]), dim)];
  }
  return out;
}

inline double unit_far_weight(const Coord& d, int dim, double s) {
  const double r2 = static_cast<double>(d[0]) * d[0] + static_cast<double>(d[1]) * d[1] +
                    static_cast<double>(d[2]) * d[2];
  return std::pow(r2, -0.5 * (dim + s));
}

inline double unit_cell_weight(const KernelParams& p, const Coord& d) {
  const Coord c = canonical_offset(d);
  if (c[0] == 0) throw InvalidArgument("cell_weight: self-interaction (d = 0) is undefined");
  if (c[0] > p.near_field_radius) return unit_far_weight(c, p.dim, p.s);
  if (c[0] == 1) return touching_unit_weights(p.dim, p.s, p.subdivision_depth)[ternary_code(c, p.dim)];
  return smooth_pair_integral(c, p.dim, p.s, p.subdivision_depth);
}

}  // namespace detail

/// W(d) = int_{C_0} int_{C_d} |x - y|^{-(N+s)} dx dy for cells of side h at integer offset d != 0.
inline double cell_weight(const KernelParams& p, const Coord& d) {
  p.validate();
  return std::pow(p.h, p.dim - p.s) * detail::unit_cell_weight(p, d);
}

/// int_C |x - y|^{-(N+s)} dy for the cell with integer coordinates `cell` on a
/// lattice with the given origin. x must lie outside the closed cell.
inline double point_cell_weight(const KernelParams& p, const Point& x, const Coord& cell,
                                const Point& origin = {0.0, 0.0, 0.0}) {
  p.validate();
  const int dim = p.dim;
  const double h = p.h;
  Point lo{0.0, 0.0, 0.0};
  double gap2 = 0.0;
  bool inside = true;
  for (int k = 0; k < dim; ++k) {
    lo[k] = origin[k] + cell[k] * h;
    const double hi = lo[k] + h;
    double g = 0.0;
    if (x[k] < lo[k]) g = lo[k] - x[k];
    else if (x[k] > hi) g = x[k] - hi;
    if (x[k] < lo[k] || x[k] > hi) inside = false;
    gap2 += g * g;
  }
  if (inside) throw InvalidArgument("point_cell_weight: point lies in the closed cell");

  const double expo = -0.5 * (dim + p.s);
  auto midpoint_sum = [&](int level) {
    const long n = 1L << level;
    const double sub = h / static_cast<double>(n);
    const long n1 = dim > 1 ? n : 1, n2 = dim > 2 ? n : 1;
    double sum = 0.0;
    for (long a = 0; a < n; ++a)
      for (long b = 0; b < n1; ++b)
        for (long c = 0; c < n2; ++c) {
          const long idx[3] = {a, b, c};
          double r2 = 0.0;
          for (int k = 0; k < dim; ++k) {
            const double y = lo[k] + (static_cast<double>(idx[k]) + 0.5) * sub;
            r2 += (y - x[k]) * (y - x[k]);
          }
          sum += std::pow(r2, expo);
        }
    return sum * ipow(sub, dim);
  };

  if (gap2 > ipow(p.near_field_radius * h, 2)) return midpoint_sum(0);
  const int depth = p.subdivision_depth;
  std::vector<double> r;
  for (int l = std::max(0, depth - 2); l <= depth; ++l) r.push_back(midpoint_sum(l));
  double factor = 4.0;
  while (r.size() > 1) {
    for (std::size_t i = 0; i + 1 < r.size(); ++i) r[i] = (factor * r[i + 1] - r[i]) / (factor - 1.0);
    r.pop_back();
    factor *= 4.0;
  }
  return r[0];
}

/// Near-field cell weights for unit cells, one value per symmetry orbit.
class KernelTable {
 public:
  explicit KernelTable(const KernelParams& p) : params_(p) {
    p.validate();
    init_layout();
    const std::vector<double> touching = detail::touching_unit_weights(p.dim, p.s, p.subdivision_depth);
    std::vector<Coord> keys;
    for_each_canonical([&](const Coord& c) { keys.push_back(c); });
    std::vector<double> vals(keys.size(), 0.0);
    parallel_for(keys.size(), [&](std::size_t i) {
      const Coord& c = keys[i];
      vals[i] = c[0] == 1 ? touching[detail::ternary_code(c, p.dim)]
                          : detail::smooth_pair_integral(c, p.dim, p.s, p.subdivision_depth);
    });
    for (std::size_t i = 0; i < keys.size(); ++i) near_[slot(keys[i])] = vals[i];
  }

  const KernelParams& params() const { return params_; }
  /// h^{N-s}.
  double scale() const { return scale_; }

  /// Weight for unit cells (h = 1). d must be nonzero.
  double unit_weight(const Coord& d) const {
    const Coord c = canonical_offset(d);
    if (c[0] == 0) throw InvalidArgument("cell weight requested for d = 0");
    if (c[0] > params_.near_field_radius) return detail::unit_far_weight(c, params_.dim, params_.s);
    return near_[slot(c)];
  }

  double weight(const Coord& d) const { return scale_ * unit_weight(d); }

  /// Raw near-field table (orbit representatives), for caching.
  const std::vector<double>& near_values() const { return near_; }

  // Binary cache keyed by (N, s, h, near_field_radius, subdivision_depth).
  static std::string cache_file_name(const KernelParams& p) {
    std::ostringstream os;
    os << "kernel_N" << p.dim << "_s" << std::hex << std::bit_cast<std::uint64_t>(p.s) << "_h"
       << std::bit_cast<std::uint64_t>(p.h) << std::dec << "_r" << p.near_field_radius << "_d"
       << p.subdivision_depth << ".bin";
    return os.str();
  }

  void save(const std::filesystem::path& file) const {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("cannot write kernel cache " + file.string());
    out.write(kMagic, sizeof(kMagic));
    write_pod(out, params_.dim);
    write_pod(out, params_.s);
    write_pod(out, params_.h);
    write_pod(out, params_.near_field_radius);
    write_pod(out, params_.subdivision_depth);
    const std::uint64_t n = near_.size();
    write_pod(out, n);
    out.write(reinterpret_cast<const char*>(near_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!out) throw IoError("short write to kernel cache " + file.string());
  }

  /// Returns nullopt when the file is missing or was built for other parameters.
  static std::optional<KernelTable> load(const std::filesystem::path& file, const KernelParams& p) {
    std::ifstream in(file, std::ios::binary);
    if (!in) return std::nullopt;
    char magic[sizeof(kMagic)];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) return std::nullopt;
    KernelParams q = p;
    read_pod(in, q.dim);
    read_pod(in, q.s);
    read_pod(in, q.h);
    read_pod(in, q.near_field_radius);
    read_pod(in, q.subdivision_depth);
    std::uint64_t n = 0;
    read_pod(in, n);
    if (!in || q.dim != p.dim || q.s != p.s || q.h != p.h || q.near_field_radius != p.near_field_radius ||
        q.subdivision_depth != p.subdivision_depth)
      return std::nullopt;
    KernelTable t(p, Uninitialized{});
    if (n != t.near_.size()) return std::nullopt;
    in.read(reinterpret_cast<char*>(t.near_.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) return std::nullopt;
    return t;
  }

  static KernelTable load_or_build(const KernelParams& p, const std::filesystem::path& cache_dir) {
    const auto file = cache_dir / cache_file_name(p);
    if (auto t = load(file, p)) return *t;
    KernelTable t(p);
    std::filesystem::create_directories(cache_dir);
    t.save(file);
    return t;
  }

 private:
  struct Uninitialized {};
  static constexpr char kMagic[8] = {'F', 'P', 'K', 'T', 'B', 'L', '0', '1'};

  KernelTable(const KernelParams& p, Uninitialized) : params_(p) {
    p.validate();
    init_layout();
  }

  void init_layout() {
    scale_ = std::pow(params_.h, params_.dim - params_.s);
    side_ = params_.near_field_radius + 1;
    near_.assign(static_cast<std::size_t>(side_) * side_ * side_, 0.0);
  }

  std::size_t slot(const Coord& c) const {
    return (static_cast<std::size_t>(c[0]) * side_ + c[1]) * side_ + c[2];
  }

  template <class F>
  void for_each_canonical(F&& f) const {
    const int r = params_.near_field_radius;
    for (int a = 1; a <= r; ++a)
      for (int b = 0; b <= (params_.dim > 1 ? a : 0); ++b)
        for (int c = 0; c <= (params_.dim > 2 ? b : 0); ++c) f(Coord{a, b, c});
  }

  template <class T>
  static void write_pod(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  template <class T>
  static void read_pod(std::istream& in, T& v) {
    in.read(reinterpret_cast<char*>(&v), sizeof(T));
  }

  KernelParams params_;
  double scale_ = 1.0;
  int side_ = 0;
  std::vector<double> near_;
};

/// Physical radius of the explicit far-field sum for a window.
inline double resolve_far_radius(const KernelParams& p, const Lattice& lat) {
  if (p.far_radius > 0.0) {
    require(p.far_radius > lat.diameter(), "far_radius must exceed the window diameter");
    return p.far_radius;
  }
  return 4.0 * lat.diameter();
}

namespace detail {

/// Sum of unit weights over all d != 0 with |d|^2 <= rc^2, plus the analytic
/// tail (N omega_N / s) rho^{-s}. The tail starts at the radius rho whose ball
/// has the volume of the cells summed (zero cell included), so in 1D it
/// resumes exactly where the cells stop. `unit` maps an offset to its unit weight.
template <class Unit>
double unit_lattice_total(int dim, double s, double rc, Unit&& unit) {
  const int reach = static_cast<int>(std::floor(rc));
  const double rc2 = rc * rc;
  const int r1 = dim > 1 ? reach : 0, r2 = dim > 2 ? reach : 0;
  double total = 0.0;
  double cells = 1.0;
  for (int a = 0; a <= reach; ++a) {
    double plane = 0.0;
    for (int b = 0; b <= r1; ++b) {
      double line = 0.0;
      for (int c = 0; c <= r2; ++c) {
        const double d2 = static_cast<double>(a) * a + static_cast<double>(b) * b + static_cast<double>(c) * c;
        if (d2 > rc2) break;
        if (a == 0 && b == 0 && c == 0) continue;
        const int mult = (a ? 2 : 1) * (b ? 2 : 1) * (c ? 2 : 1);
        line += mult * unit(Coord{a, b, c});
        cells += mult;
      }
      plane += line;
    }
    total += plane;
  }
  const double rho = std::pow(cells / unit_ball_volume(dim), 1.0 / dim);
  return total + dim * unit_ball_volume(dim) / s * std::pow(rho, -s);
}

}  // namespace detail

/// A kernel table bound to a window: dense cell-cell weights over every offset
/// that occurs inside the window, and the per-cell exterior closure
///   T(i) = P_cell - sum_{j in window, j != i} W(i - j),
/// where P_cell is the lattice sum of W over |d| h <= R_far plus the analytic
/// tail beyond R_far. T(i) is the interaction of cell i with the complement
/// of the window.
class WindowKernel {
 public:
  WindowKernel(KernelTable table, Lattice lattice) : table_(std::move(table)), lattice_(std::move(lattice)) {
    const KernelParams& p = table_.params();
    require(p.dim == lattice_.dim(), "kernel and lattice dimensions differ");
    require(p.h == lattice_.h(), "kernel and lattice cell sizes differ");
    far_radius_ = resolve_far_radius(p, lattice_);

    const Coord& n = lattice_.extents();
    dense_.assign(lattice_.size(), 0.0);
    for (std::size_t i = 0; i < dense_.size(); ++i) {
      const Coord d = lattice_.coord(i);
      if (d[0] == 0 && d[1] == 0 && d[2] == 0) continue;
      dense_[i] = table_.weight(d);
    }
    (void)n;

    const double rc = far_radius_ / p.h;
    cell_total_ = table_.scale() *
                  detail::unit_lattice_total(p.dim, p.s, rc, [&](const Coord& d) { return table_.unit_weight(d); });

    window_sum_.assign(lattice_.size(), 0.0);
    parallel_for(lattice_.size(), [&](std::size_t i) {
      double acc = 0.0;
      visit_row(i, [&](std::size_t, double w) { acc += w; });
      window_sum_[i] = acc;
    });
    exterior_.resize(lattice_.size());
    for (std::size_t i = 0; i < lattice_.size(); ++i) exterior_[i] = cell_total_ - window_sum_[i];
  }

  const KernelTable& table() const { return table_; }
  const KernelParams& params() const { return table_.params(); }
  const Lattice& lattice() const { return lattice_; }
  double far_radius() const { return far_radius_; }

  /// W(d) for any offset; d = 0 gives 0.
  double weight_offset(const Coord& d) const {
    const Coord& n = lattice_.extents();
    const int a = std::abs(d[0]), b = std::abs(d[1]), c = std::abs(d[2]);
    if (a < n[0] && b < n[1] && c < n[2]) return dense_[(static_cast<std::size_t>(a) * n[1] + b) * n[2] + c];
    return table_.weight(d);
  }

  double weight(std::size_t i, std::size_t j) const {
    const Coord ci = lattice_.coord(i), cj = lattice_.coord(j);
    return weight_offset({ci[0] - cj[0], ci[1] - cj[1], ci[2] - cj[2]});
  }

  /// Calls f(j, W(i - j)) for every window cell j in index order (W = 0 at j = i).
  template <class F>
  void visit_row(std::size_t i, F&& f) const {
    const Coord& n = lattice_.extents();
    const Coord c = lattice_.coord(i);
    std::size_t j = 0;
    for (int x = 0; x < n[0]; ++x) {
      const std::size_t ax = static_cast<std::size_t>(std::abs(x - c[0])) * n[1];
      for (int y = 0; y < n[1]; ++y) {
        const std::size_t bx = (ax + std::abs(y - c[1])) * n[2];
        for (int z = 0; z < n[2]; ++z, ++j) f(j, dense_[bx + std::abs(z - c[2])]);
      }
    }
  }

  /// P_cell: interaction of one cell with the rest of R^N.
  double cell_total() const { return cell_total_; }
  /// S(i) = sum over window cells j != i of W(i - j).
  double window_sum(std::size_t i) const { return window_sum_[i]; }
  /// T(i): interaction of cell i with the window complement.
  double exterior(std::size_t i) const { return exterior_[i]; }

  /// A copy whose cell-cell weights are scaled by (1 + eps * hash(d)); breaks the
  /// exact decomposition identities when mixed with the unperturbed kernel.
  WindowKernel perturbed(double eps) const {
    WindowKernel k = *this;
    for (std::size_t i = 0; i < k.dense_.size(); ++i) k.dense_[i] *= 1.0 + eps * static_cast<double>(i % 7 + 1);
    return k;
  }

 private:
  KernelTable table_;
  Lattice lattice_;
  double far_radius_ = 0.0;
  double cell_total_ = 0.0;
  std::vector<double> dense_;
  std::vector<double> window_sum_;
  std::vector<double> exterior_;
};

/// Cell-center-to-cell weights V(d) = int_{C_d} |x_0 - y|^{-(N+s)} dy with x_0
/// the center of cell 0, bound to a window, plus the exterior closure
/// Q - sum_{j in window, j != i} V(i - j) (Q: lattice sum to R_far + tail).
class PointWindowKernel {
 public:
  PointWindowKernel(const KernelParams& p, Lattice lattice) : params_(p), lattice_(std::move(lattice)) {
    p.validate();
    require(p.dim == lattice_.dim(), "kernel and lattice dimensions differ");
    scale_ = std::pow(p.h, -p.s);
    const int r = p.near_field_radius;
    side_ = r + 1;
    near_.assign(static_cast<std::size_t>(side_) * side_ * side_, 0.0);
    KernelParams unit = p;
    unit.h = 1.0;
    const Point x0{0.5, 0.5, 0.5};
    Point x{0.0, 0.0, 0.0};
    for (int k = 0; k < p.dim; ++k) x[k] = x0[k];
    for (int a = 1; a <= r; ++a)
      for (int b = 0; b <= (p.dim > 1 ? a : 0); ++b)
        for (int c = 0; c <= (p.dim > 2 ? b : 0); ++c)
          near_[slot({a, b, c})] = point_cell_weight(unit, x, {a, b, c});

    const double rc = resolve_far_radius(p, lattice_) / p.h;
    total_ = scale_ * detail::unit_lattice_total(p.dim, p.s, rc, [&](const Coord& d) { return unit_weight(d); });
  }

  double unit_weight(const Coord& d) const {
    const Coord c = canonical_offset(d);
    if (c[0] == 0) throw InvalidArgument("point weight requested for the self cell");
    if (c[0] > params_.near_field_radius) return detail::unit_far_weight(c, params_.dim, params_.s);
    return near_[slot(c)];
  }
  double weight(const Coord& d) const { return scale_ * unit_weight(d); }

  /// Kernel integral from the center of cell i over the window complement.
  double exterior(std::size_t i) const {
    const Coord c = lattice_.coord(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < lattice_.size(); ++j) {
      if (j == i) continue;
      const Coord q = lattice_.coord(j);
      acc += weight({q[0] - c[0], q[1] - c[1], q[2] - c[2]});
    }
    return total_ - acc;
  }

  const Lattice& lattice() const { return lattice_; }

 private:
  std::size_t slot(const Coord& c) const {
    return (static_cast<std::size_t>(c[0]) * side_ + c[1]) * side_ + c[2];
  }

  KernelParams params_;
  Lattice lattice_;
  double scale_ = 1.0;
  int side_ = 0;
  std::vector<double> near_;
  double total_ = 0.0;
};

}  // namespace fracperim
