#pragma once

// Experiment drivers behind the fracperim subcommands. Each driver reads a
// Config, writes its artifacts under an output directory and returns a result
// record carrying the exit code.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "io.hpp"
#include "kernel.hpp"
#include "lattice.hpp"
#include "minimizer.hpp"
#include "oracle.hpp"
#include "perimeter.hpp"
#include "potential.hpp"

namespace fracperim {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int violation = 2;
inline constexpr int config = 3;
inline constexpr int io = 4;
}  // namespace exit_code

struct RunOptions {
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  bool timing = false;
  bool perturb_weights = false;
  bool force_slab = false;
  bool verify_oracle = false;
};

// ---- config readers ----

inline KernelParams kernel_params_from(const Config& cfg, int dim, double h) {
  KernelParams p;
  p.dim = dim;
  p.h = h;
  p.s = cfg.get_double("kernel.s", 0.5);
  p.near_field_radius = static_cast<int>(cfg.get_int("kernel.near_field_radius", 3));
  p.subdivision_depth = static_cast<int>(cfg.get_int("kernel.subdivision_depth", 4));
  p.far_radius = cfg.get_double("kernel.far_radius", 0.0);
  p.validate();
  return p;
}

inline KernelTable kernel_table_from(const Config& cfg, const KernelParams& p) {
  const std::string dir = cfg.get_string("kernel.cache_dir", "");
  if (dir.empty()) return KernelTable(p);
  return KernelTable::load_or_build(p, cfg.resolve(dir));
}

inline Lattice lattice_from(const Config& cfg) {
  const int dim = static_cast<int>(cfg.get_int("lattice.dim", 2));
  const double h = cfg.get_double("lattice.h", 1.0);
  auto ext64 = cfg.get_ints("lattice.extents", {32});
  std::vector<int> ext(ext64.begin(), ext64.end());
  if (ext.size() == 1) ext.assign(static_cast<std::size_t>(dim), ext[0]);
  auto origin = cfg.get_doubles("lattice.origin", std::vector<double>(static_cast<std::size_t>(dim), 0.0));
  if (origin.size() == 1) origin.assign(static_cast<std::size_t>(dim), origin[0]);
  if (static_cast<int>(ext.size()) != dim || static_cast<int>(origin.size()) != dim)
    throw ConfigError("lattice.extents and lattice.origin need one entry per axis");
  try {
    return Lattice(dim, h, ext, origin);
  } catch (const InvalidArgument& ex) {
    throw ConfigError(ex.what());
  }
}

inline Point point_from(const std::vector<double>& v, int dim) {
  Point p{0.0, 0.0, 0.0};
  if (v.size() == 1) {
    for (int k = 0; k < dim; ++k) p[k] = v[0];
    return p;
  }
  if (static_cast<int>(v.size()) != dim) throw ConfigError("point needs one coordinate per axis");
  for (int k = 0; k < dim; ++k) p[k] = v[k];
  return p;
}

inline Potential potential_from(const Config& cfg, int dim) {
  const std::string kind = cfg.get_string("potential.kind", "constant");
  if (kind == "constant") return Potential::constant(dim, cfg.get_double("potential.value", 0.0));
  if (kind == "periodic") {
    const auto f = cfg.get_ints("potential.frequencies", {1});
    Coord freq{1, 1, 1};
    for (int k = 0; k < dim; ++k) freq[k] = static_cast<int>(f.size() == 1 ? f[0] : f.at(static_cast<std::size_t>(k)));
    const std::string form = cfg.get_string("potential.form", "product");
    if (form != "product" && form != "sum") throw ConfigError("potential.form must be product or sum");
    return Potential::periodic(dim, cfg.get_double("potential.amplitude", 1.0), freq,
                               point_from(cfg.get_doubles("potential.shift", {0.0}), dim), form == "sum");
  }
  if (kind == "coercive")
    return Potential::coercive(dim, cfg.get_double("potential.a", 1.0),
                               point_from(cfg.get_doubles("potential.center", {0.0}), dim),
                               cfg.get_double("potential.b", 0.0));
  if (kind == "sampled") {
    const std::string file = cfg.get_string("potential.file", "");
    if (file.empty()) throw ConfigError("potential.kind = sampled needs potential.file");
    if (!std::filesystem::exists(cfg.resolve(file))) throw ConfigError("sampled potential file not found: " + file);
    Potential g = read_sampled_potential(cfg.resolve(file));
    if (g.dim() != dim) throw ConfigError("sampled potential dimension differs from the lattice");
    return g;
  }
  throw ConfigError("unknown potential.kind: " + kind);
}

/// Periodic potentials need 1/h integral so every period holds whole cells.
inline void require_period_aligned(const Potential& g, const Lattice& lat) {
  if (g.kind() != PotentialKind::periodic) return;
  const double inv = 1.0 / lat.h();
  if (std::abs(inv - std::round(inv)) > 1e-9 * inv)
    throw ConfigError("a periodic potential needs 1/h to be an integer, got h = " + fmt_num(lat.h()));
}

inline CurvatureOptions curvature_options_from(const Config& cfg) {
  CurvatureOptions o;
  const std::string norm = cfg.get_string("curvature.normalization", "omega");
  if (norm == "omega") o.normalization = CurvatureOptions::Normalization::omega;
  else if (norm == "raw") o.normalization = CurvatureOptions::Normalization::raw;
  else throw ConfigError("curvature.normalization must be omega or raw");
  const std::string ext = cfg.get_string("curvature.exterior", "complement");
  if (ext == "complement") o.exterior = CurvatureOptions::Exterior::complement;
  else if (ext == "truncated") o.exterior = CurvatureOptions::Exterior::truncated;
  else throw ConfigError("curvature.exterior must be complement or truncated");
  const std::string scheme = cfg.get_string("curvature.scheme", "smoothed_face");
  if (scheme == "smoothed_face") o.scheme = CurvatureOptions::Scheme::smoothed_face;
  else if (scheme == "cell_center") o.scheme = CurvatureOptions::Scheme::cell_center;
  else throw ConfigError("curvature.scheme must be smoothed_face or cell_center");
  o.smoothing_cells = cfg.get_double("curvature.smoothing_cells", 6.0);
  if (!(o.smoothing_cells > 0.0)) throw ConfigError("curvature.smoothing_cells must be positive");
  return o;
}

inline MinimizeConfig minimize_config_from(const Config& cfg, const Lattice& lat, std::uint64_t seed) {
  MinimizeConfig mc;
  const std::string mode = cfg.get_string("minimize.mode", "constrained-exchange");
  if (mode == "constrained-exchange") mc.mode = MinimizeMode::constrained_exchange;
  else if (mode == "penalized-anneal") mc.mode = MinimizeMode::penalized_anneal;
  else if (mode == "threshold-dynamics") mc.mode = MinimizeMode::threshold_dynamics;
  else throw ConfigError("unknown minimize.mode: " + mode);
  if (cfg.has("minimize.cells")) {
    const auto cells = cfg.get_int("minimize.cells", 0);
    if (cells < 0) throw ConfigError("minimize.cells must be nonnegative");
    mc.target_volume = static_cast<double>(cells) * lat.cell_volume();
  } else if (cfg.has("minimize.m")) {
    mc.target_volume = cfg.get_double("minimize.m", 0.0);
  } else {
    throw ConfigError("minimize needs minimize.m (volume) or minimize.cells");
  }
  mc.mu = cfg.get_double("minimize.mu", 0.0);
  mc.max_iters = static_cast<int>(cfg.get_int("minimize.max_iters", mc.max_iters));
  mc.seed = seed;
  mc.restarts = static_cast<int>(cfg.get_int("minimize.restarts", 1));
  const std::string init = cfg.get_string("minimize.init", "ball-at");
  if (init == "ball-at") mc.init = InitKind::ball_at;
  else if (init == "random-cells") mc.init = InitKind::random_cells;
  else if (init == "given") {
    mc.init = InitKind::given;
    const std::string file = cfg.get_string("minimize.init_file", "");
    if (file.empty() || !std::filesystem::exists(cfg.resolve(file)))
      throw ConfigError("minimize.init = given needs an existing minimize.init_file");
    mc.given = gridset_from_json(read_json(cfg.resolve(file)));
  } else {
    throw ConfigError("unknown minimize.init: " + init);
  }
  if (cfg.has("minimize.ball_center"))
    mc.ball_center = point_from(cfg.get_doubles("minimize.ball_center", {}), lat.dim());
  mc.cooling = cfg.get_double("minimize.cooling", mc.cooling);
  mc.initial_temperature = cfg.get_double("minimize.initial_temperature", 0.0);
  mc.anneal_sweeps = static_cast<int>(cfg.get_int("minimize.sweeps", mc.anneal_sweeps));
  mc.stabilization = cfg.get_double("minimize.stabilization", 0.0);
  mc.polish = cfg.get_bool("minimize.polish", true);
  mc.tolerance = cfg.get_double("minimize.tolerance", mc.tolerance);
  if (mc.restarts < 1 || mc.max_iters < 1 || mc.anneal_sweeps < 0) throw ConfigError("bad minimize iteration counts");
  if (!(mc.cooling > 0.0 && mc.cooling < 1.0)) throw ConfigError("minimize.cooling must lie in (0, 1)");
  if (mc.mu < 0.0) throw ConfigError("minimize.mu must be nonnegative");
  return mc;
}

// ---- shapes ----

/// The `count` cells with the smallest gauge value about `center`; ties by index.
/// Gauges: disk |x|, square max|x_k|, rectangle max(|x_0|, 2|x_1|) (twice as wide as tall),
/// plus min(max(|x_0|/3, |x_1|), max(|x_0|, |x_1|/3)).
inline GridSet gauge_shape(const Lattice& lat, const Point& center, std::size_t count, const std::string& shape) {
  require(count <= lat.size(), "shape larger than the window");
  auto gauge = [&](const Point& x) {
    double a = std::abs(x[0] - center[0]), b = lat.dim() > 1 ? std::abs(x[1] - center[1]) : 0.0;
    double c = lat.dim() > 2 ? std::abs(x[2] - center[2]) : 0.0;
    if (shape == "disk") return std::sqrt(a * a + b * b + c * c);
    if (shape == "square") return std::max({a, b, c});
    if (shape == "rectangle") return std::max({a, 2.0 * b, c});
    if (shape == "plus") return std::min(std::max({a / 3.0, b, c}), std::max({a, b / 3.0, c}));
    throw ConfigError("unknown shape: " + shape);
  };
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t i = 0; i < lat.size(); ++i) order.emplace_back(gauge(lat.center(i)), i);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(count), order.end());
  GridSet out(lat);
  for (std::size_t j = 0; j < count; ++j) out.insert(order[j].second);
  return out;
}

inline Point window_center(const Lattice& lat) {
  Point c{0.0, 0.0, 0.0};
  for (int k = 0; k < lat.dim(); ++k) c[k] = lat.origin()[k] + 0.5 * lat.extents()[k] * lat.h();
  return c;
}

/// Each cell of E replaced by its lambda^N sub-cells on a window lambda times larger.
inline GridSet dilate_cells(const GridSet& e, int lambda, const Lattice& big) {
  const Lattice& lat = e.lattice();
  GridSet out(big);
  for (std::size_t i : e.members()) {
    const Coord c = lat.coord(i);
    const int r1 = lat.dim() > 1 ? lambda : 1, r2 = lat.dim() > 2 ? lambda : 1;
    for (int a = 0; a < lambda; ++a)
      for (int b = 0; b < r1; ++b)
        for (int z = 0; z < r2; ++z)
          out.insert(big.index({c[0] * lambda + a, lat.dim() > 1 ? c[1] * lambda + b : 0,
                                lat.dim() > 2 ? c[2] * lambda + z : 0}));
  }
  return out;
}

// ---- identity-check ----

struct IdentityResult {
  std::size_t pairs = 0;
  double max_union_residual = 0.0;
  double max_local_residual = 0.0;
  /// P(E,O1) + P(E,O2) <= P(E,O1 u O2) + 2 I(O1,O2) held on every pair.
  bool doubled_cross_bound = true;
  int exit = exit_code::ok;
};

inline IdentityResult cmd_identity_check(const Config& cfg, const RunOptions& opt) {
  const auto grids = cfg.get_ints("identity.grids", {16});
  const auto svals = cfg.get_doubles("identity.s", {cfg.get_double("kernel.s", 0.5)});
  const auto pairs = cfg.get_int("identity.pairs", 50);
  const double tol = cfg.get_double("identity.tolerance", 1e-9);
  const double density = cfg.get_double("identity.density", 0.3);
  if (pairs < 0) throw ConfigError("identity.pairs must be nonnegative");
  if (!(density > 0.0 && density <= 0.5)) throw ConfigError("identity.density must lie in (0, 0.5]");

  IdentityResult res;
  CsvWriter csv(opt.out / "identity_residuals.csv",
                {"grid", "s", "pair", "union_residual", "local_residual", "doubled_cross_slack"});
  Rng rng(opt.seed);
  for (auto n : grids) {
    if (n < 2) throw ConfigError("identity.grids entries must be >= 2");
    const Lattice lat(2, 1.0, {static_cast<int>(n), static_cast<int>(n)});
    for (double s : svals) {
      KernelParams p = kernel_params_from(cfg, 2, 1.0);
      p.s = s;
      p.validate();
      const WindowKernel k(kernel_table_from(cfg, p), lat);
      const std::optional<WindowKernel> bad =
          opt.perturb_weights ? std::optional<WindowKernel>(k.perturbed(1e-3)) : std::nullopt;
      const WindowKernel& cross_kernel = bad ? *bad : k;
      for (std::int64_t r = 0; r < pairs; ++r) {
        GridSet a(lat), b(lat), e(lat), o1(lat), o2(lat);
        for (std::size_t i = 0; i < lat.size(); ++i) {
          const double u = rng.uniform();
          if (u < density) a.insert(i);
          else if (u < 2.0 * density) b.insert(i);
          if (rng.uniform() < 0.5) e.insert(i);
          const double v = rng.uniform();
          if (v < density) o1.insert(i);
          else if (v < 2.0 * density) o2.insert(i);
        }
        const double pa = ps(a, k).total, pb = ps(b, k).total, pab = ps(unite(a, b), k).total;
        const double iab = interaction(a, b, cross_kernel);
        const double ures = std::abs(pab - (pa + pb - 2.0 * iab)) / std::max(1e-300, pa + pb + 2.0 * iab);

        const double l1 = ps_localized(e, o1, k), l2 = ps_localized(e, o2, k);
        const double l12 = ps_localized(e, unite(o1, o2), k);
        const double cross = localization_cross_term(e, o1, o2, cross_kernel);
        const double lres = std::abs(l1 + l2 - (l12 + cross)) / std::max(1e-300, l1 + l2 + l12 + cross);
        const double slack = l12 + 2.0 * interaction(o1, o2, k) - (l1 + l2);
        if (slack < -1e-9 * (l1 + l2)) res.doubled_cross_bound = false;

        res.max_union_residual = std::max(res.max_union_residual, ures);
        res.max_local_residual = std::max(res.max_local_residual, lres);
        ++res.pairs;
        csv.row({static_cast<double>(n), s, static_cast<double>(r), ures, lres, slack});
      }
    }
  }
  csv.close();
  if (res.max_union_residual > tol || res.max_local_residual > tol || !res.doubled_cross_bound)
    res.exit = exit_code::violation;
  return res;
}

// ---- isoperimetric ----

struct IsoRow {
  double s = 0.0;
  std::string shape;
  std::size_t cells = 0;
  double ps = 0.0;
  double deficit = 0.0;
  double relative_deficit = 0.0;
};

struct IsoResult {
  std::vector<IsoRow> rows;
  int exit = exit_code::ok;
};

inline IsoResult cmd_isoperimetric(const Config& cfg, const RunOptions& opt) {
  const int n = static_cast<int>(cfg.get_int("isoperimetric.n", 64));
  if (n < 4) throw ConfigError("isoperimetric.n must be >= 4");
  const auto svals = cfg.get_doubles("isoperimetric.s", {0.3, 0.5, 0.7});
  auto shapes = cfg.get_strings("isoperimetric.shapes", {"disk", "square", "rectangle", "plus"});
  const double quarter = n / 4.0;
  const auto cells = static_cast<std::size_t>(
      cfg.get_int("isoperimetric.cells", static_cast<std::int64_t>(std::llround(std::numbers::pi * quarter * quarter))));
  const Lattice lat(2, 1.0, {n, n});
  if (cells == 0 || cells > lat.size()) throw ConfigError("isoperimetric.cells out of range");
  for (const auto& sh : shapes)
    if (sh != "disk" && sh != "square" && sh != "rectangle" && sh != "plus")
      throw ConfigError("unknown shape: " + sh);
  const double min_rel = cfg.get_double("isoperimetric.min_relative_deficit", 0.0);

  IsoResult res;
  CsvWriter csv(opt.out / "isoperimetric.csv", {"s", "shape", "cells", "ps", "deficit", "relative_deficit"});
  for (double s : svals) {
    KernelParams p = kernel_params_from(cfg, 2, 1.0);
    p.s = s;
    p.validate();
    const WindowKernel k(kernel_table_from(cfg, p), lat);
    std::optional<double> disk_ps;
    std::vector<IsoRow> rows;
    for (const auto& sh : shapes) {
      const GridSet e = gauge_shape(lat, window_center(lat), cells, sh);
      rows.push_back({s, sh, e.count(), ps(e, k).total, 0.0, 0.0});
      if (sh == "disk") disk_ps = rows.back().ps;
    }
    const double vol_scale = std::pow(static_cast<double>(cells), -(2.0 - s) / 2.0);
    for (auto& r : rows) {
      if (disk_ps) {
        r.deficit = (r.ps - *disk_ps) * vol_scale;
        r.relative_deficit = (r.ps - *disk_ps) / *disk_ps;
        if (r.shape != "disk" && !(r.ps > *disk_ps && r.relative_deficit >= min_rel)) res.exit = exit_code::violation;
      }
      csv.row_strings({fmt_num(r.s), r.shape, std::to_string(r.cells), fmt_num(r.ps), fmt_num(r.deficit),
                       fmt_num(r.relative_deficit)});
      res.rows.push_back(r);
    }
  }
  csv.close();
  return res;
}

// ---- scaling-check ----

struct ScalingRow {
  std::string shape;
  std::string potential;
  int lambda = 1;
  double f = 0.0;
  double f_lambda = 0.0;
  double ratio = 0.0;
  double target = 0.0;
  double relative_error = 0.0;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  int exit = exit_code::ok;
};

inline ScalingResult cmd_scaling_check(const Config& cfg, const RunOptions& opt) {
  const auto lambdas = cfg.get_ints("scaling.lambdas", {2, 3});
  const auto shapes = cfg.get_strings("scaling.shapes", {"disk", "square"});
  const auto constants = cfg.get_doubles("scaling.constants", {0.0, 1.0});
  const int radius = static_cast<int>(cfg.get_int("scaling.radius_cells", 16));
  const int margin = static_cast<int>(cfg.get_int("scaling.margin_cells", 4));
  const double tol = cfg.get_double("scaling.tolerance", 0.03);
  const std::string method = cfg.get_string("scaling.dilation", "rasterize");
  if (method != "rasterize" && method != "cells") throw ConfigError("scaling.dilation must be rasterize or cells");
  if (radius < 1 || margin < 0) throw ConfigError("scaling.radius_cells must be >= 1");

  const KernelParams p = kernel_params_from(cfg, 2, 1.0);
  const KernelTable table = kernel_table_from(cfg, p);
  const int n = 2 * (radius + margin);
  const Lattice base(2, 1.0, {n, n});
  const double dim = 2.0;

  auto make_shape = [&](const Lattice& lat, const std::string& shape, double r) {
    const Point c = window_center(lat);
    if (shape == "disk") return rasterize_ball(lat, Ball(c, r));
    if (shape == "square") {
      GridSet e(lat);
      for (std::size_t i = 0; i < lat.size(); ++i) {
        const Point x = lat.center(i);
        if (std::abs(x[0] - c[0]) < r && std::abs(x[1] - c[1]) < r) e.insert(i);
      }
      return e;
    }
    throw ConfigError("scaling shapes must be disk or square");
  };

  ScalingResult res;
  CsvWriter csv(opt.out / "scaling.csv",
                {"shape", "g", "lambda", "F", "F_lambda", "ratio", "target", "relative_error"});
  const WindowKernel k1(table, base);
  for (const auto& shape : shapes) {
    const GridSet e = make_shape(base, shape, radius);
    const double ps1 = ps(e, k1).total;
    for (auto lam64 : lambdas) {
      if (lam64 < 1) throw ConfigError("scaling.lambdas entries must be >= 1");
      const int lam = static_cast<int>(lam64);
      const Lattice big(2, 1.0, {n * lam, n * lam});
      const WindowKernel kl(table, big);
      const GridSet el = method == "cells" ? dilate_cells(e, lam, big) : make_shape(big, shape, radius * lam);
      const double psl = ps(el, kl).total;
      for (double c : constants) {
        const Potential g = Potential::constant(2, c);
        const double f = ps1 - integral_over(g, e);
        double gint = 0.0;
        for (std::size_t i : el.members()) gint += g.rescaled_eval(big.center(i), lam);
        gint *= big.cell_volume();
        const double fl = psl - std::pow(static_cast<double>(lam), -p.s) * gint;
        ScalingRow row{shape, fmt_num(c), lam, f, fl, fl / f, std::pow(static_cast<double>(lam), dim - p.s), 0.0};
        row.relative_error = std::abs(row.ratio - row.target) / row.target;
        if (row.relative_error > tol) res.exit = exit_code::violation;
        csv.row_strings({row.shape, row.potential, std::to_string(lam), fmt_num(row.f), fmt_num(row.f_lambda),
                         fmt_num(row.ratio), fmt_num(row.target), fmt_num(row.relative_error)});
        res.rows.push_back(row);
      }
    }
  }
  csv.close();
  return res;
}

// ---- small-volume ----

struct SmallVolumeRow {
  double eps = 0.0;
  double h = 0.0;
  std::size_t cells = 0;
  double asymmetry = 0.0;
};

struct SmallVolumeResult {
  std::vector<SmallVolumeRow> rows;
  std::optional<double> slope;
  double fitted_c = 0.0;
  int inversions = 0;
  int exit = exit_code::ok;
};

/// Least-squares slope and intercept of log y against log x.
inline std::pair<double, double> loglog_fit(const std::vector<double>& x, const std::vector<double>& y) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  return {slope, (sy - slope * sx) / n};
}

inline SmallVolumeResult cmd_small_volume(const Config& cfg, const RunOptions& opt) {
  auto eps = cfg.get_doubles("small_volume.eps", {0.5, 0.35, 0.25, 0.18, 0.125});
  const double r0 = cfg.get_double("small_volume.radius_cells", 20.0);
  const double growth = cfg.get_double("small_volume.resolution_growth", 0.5);
  const double window_radii = cfg.get_double("small_volume.window_radii", 4.0);
  const int max_inversions = static_cast<int>(cfg.get_int("small_volume.max_inversions", 1));
  const std::string volume_rule = cfg.get_string("small_volume.volume", "raster");
  if (volume_rule != "raster" && volume_rule != "rounded")
    throw ConfigError("small_volume.volume must be raster or rounded");

  if (eps.empty()) throw ConfigError("small_volume.eps is empty");
  for (double e : eps)
    if (!(e > 0.0 && e <= 1.0)) throw ConfigError("small_volume.eps entries must lie in (0, 1]");
  for (std::size_t i = 1; i < eps.size(); ++i)
    if (!(eps[i] < eps[i - 1])) throw ConfigError("small_volume.eps must be strictly decreasing");

  const Potential g = potential_from(cfg, 2);
  if (g.kind() != PotentialKind::periodic && g.kind() != PotentialKind::constant)
    throw ConfigError("small-volume needs a periodic or constant potential");
  // Periodic runs must show the power law with a 0.2 allowance; constant ones only monotonicity.
  const double min_slope =
      cfg.get_double("small_volume.min_slope", g.kind() == PotentialKind::periodic
                                                   ? cfg.get_double("kernel.s", 0.5) - 0.2
                                                   : -std::numeric_limits<double>::infinity());
  const double sup_g = [&] {
    const Lattice probe(2, 1.0 / 64, {64, 64});
    return std::max(window_stats(g, probe).sup_abs, 1e-12);
  }();

  SmallVolumeResult res;
  KernelParams p = kernel_params_from(cfg, 2, 1.0);
  CsvWriter csv(opt.out / "small_volume.csv", {"eps", "h", "cells", "asymmetry"});
  for (double e : eps) {
    // Ball radius in cells grows as eps shrinks so the rescaled grid refines.
    const double rc = r0 * std::pow(eps.front() / e, growth);
    const int inv_h = std::max(1, static_cast<int>(std::lround(rc / e)));
    const double h = 1.0 / inv_h;
    const double rcells = e * inv_h;
    const int n = 2 * static_cast<int>(std::ceil(0.5 * window_radii * rcells));
    // Window centered on the origin, where the configured wells sit.
    const Lattice lat(2, h, {n, n}, {-0.5 * n * h, -0.5 * n * h});
    p.h = h;
    const WindowKernel k(kernel_table_from(cfg, p), lat);
    // "raster": cell count of the rasterized eps-ball, so g = 0 reproduces a grid ball exactly.
    const std::size_t count = volume_rule == "raster"
                                  ? rasterize_ball(lat, Ball(Point{0.0, 0.0, 0.0}, e)).count()
                                  : static_cast<std::size_t>(std::llround(unit_ball_volume(2) * rcells * rcells));

    MinimizeConfig mc;
    mc.mode = MinimizeMode::constrained_exchange;
    mc.target_volume = static_cast<double>(count) * lat.cell_volume();
    mc.seed = opt.seed;
    mc.max_iters = static_cast<int>(cfg.get_int("minimize.max_iters", 100000));
    const auto run = minimize(mc, k, g);

    // Rescale by 1/eps: same cells, side h / eps.
    std::vector<double> org{lat.origin()[0] / e, lat.origin()[1] / e};
    const Lattice scaled(2, h / e, {n, n}, org);
    const GridSet se = GridSet::from_indices(scaled, run.best.set().members());
    const AsymmetryResult a = best_translate_asymmetry(se, 1.0);
    res.rows.push_back({e, h, count, a.value});
    csv.row({e, h, static_cast<double>(count), a.value});
  }
  csv.close();

  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < res.rows.size(); ++i) {
    if (i > 0 && res.rows[i].asymmetry > res.rows[i - 1].asymmetry) ++res.inversions;
    if (res.rows[i].asymmetry > 0.0) {
      xs.push_back(res.rows[i].eps);
      ys.push_back(res.rows[i].asymmetry);
    }
    res.fitted_c = std::max(res.fitted_c, res.rows[i].asymmetry / (sup_g * std::pow(res.rows[i].eps, p.s)));
  }
  std::optional<std::pair<double, double>> fit;
  if (xs.size() >= 2) {
    const auto [slope, icpt] = loglog_fit(xs, ys);
    res.slope = slope;
    fit = std::pair{std::exp(icpt), slope};
  }
  LogLogPlot plot{"rescaled asymmetry vs eps", "eps", "asymmetry", xs, ys, fit};
  write_loglog_svg(opt.out / "small_volume.svg", plot);
  nlohmann::json j;
  j["s"] = p.s;
  j["slope"] = res.slope ? json_number(*res.slope) : nlohmann::json();
  j["fitted_c"] = res.fitted_c;
  j["sup_abs_g"] = sup_g;
  j["inversions"] = res.inversions;
  write_json(opt.out / "small_volume_fit.json", j);

  if (res.inversions > max_inversions) res.exit = exit_code::violation;
  if (res.slope && *res.slope < min_slope) res.exit = exit_code::violation;
  return res;
}

// ---- mu-check ----

struct MuCheckResult {
  MuEstimate mu;
  std::size_t samples = 0;
  int exit = exit_code::ok;
  std::optional<bool> converged;
};

inline MuCheckResult cmd_mu_check(const Config& cfg, const RunOptions& opt) {
  const std::string shape = opt.force_slab ? "slab" : cfg.get_string("mu_check.shape", "minimize");
  if (shape == "slab")
    throw ConfigError("a half-space slab has unbounded volume; the Lagrange multiplier needs a volume constraint");
  const double max_spread = cfg.get_double("mu_check.max_spread", 0.2);
  const Lattice lat = lattice_from(cfg);
  const KernelParams p = kernel_params_from(cfg, lat.dim(), lat.h());
  const WindowKernel k(kernel_table_from(cfg, p), lat);
  const Potential g = potential_from(cfg, lat.dim());
  require_period_aligned(g, lat);
  const CurvatureOptions copt = curvature_options_from(cfg);

  GridSet e(lat);
  std::optional<bool> converged;
  if (shape == "minimize") {
    const MinimizeConfig mc = minimize_config_from(cfg, lat, opt.seed);
    const auto run = minimize(mc, k, g, copt);
    e = run.best.set();
    converged = run.report.converged;
  } else if (shape == "disk" || shape == "square") {
    const double r = cfg.get_double("mu_check.radius", 0.25 * lat.extents()[0] * lat.h());
    const Point c = window_center(lat);
    if (shape == "disk") e = rasterize_ball(lat, Ball(c, r));
    else
      for (std::size_t i = 0; i < lat.size(); ++i) {
        const Point x = lat.center(i);
        bool in = true;
        for (int d = 0; d < lat.dim(); ++d) in = in && std::abs(x[d] - c[d]) < r;
        if (in) e.insert(i);
      }
  } else if (shape == "file") {
    const std::string file = cfg.get_string("mu_check.set_file", "");
    if (file.empty() || !std::filesystem::exists(cfg.resolve(file)))
      throw ConfigError("mu_check.shape = file needs an existing mu_check.set_file");
    e = gridset_from_json(read_json(cfg.resolve(file)));
    if (!(e.lattice() == lat)) throw ConfigError("mu_check.set_file lives on another lattice");
  } else {
    throw ConfigError("unknown mu_check.shape: " + shape);
  }
  if (e.empty() || e.count() == lat.size()) throw ConfigError("mu-check needs a set with nonempty complement");

  const auto prof = boundary_profile(e, g, k, copt);
  write_profile_csv(opt.out / "profile.csv", prof, lat.dim());
  MuCheckResult res{mu_estimate(prof), prof.size(), exit_code::ok};
  res.converged = converged;
  nlohmann::json j{{"shape", shape}, {"samples", prof.size()}, {"mu_mean", res.mu.mean},
                   {"mu_spread", res.mu.spread}, {"max_spread", max_spread}};
  if (converged) j["converged"] = *converged;
  write_json(opt.out / "mu.json", j);
  if (!(res.mu.spread <= max_spread)) res.exit = exit_code::violation;
  return res;
}

// ---- minimize ----

struct MinimizeCommandResult {
  EnergyReport report;
  GridSet set;
  std::optional<double> oracle_energy;
  int exit = exit_code::ok;
};

inline MinimizeCommandResult cmd_minimize(const Config& cfg, const RunOptions& opt) {
  const Lattice lat = lattice_from(cfg);
  const KernelParams p = kernel_params_from(cfg, lat.dim(), lat.h());
  const WindowKernel k(kernel_table_from(cfg, p), lat);
  const Potential g = potential_from(cfg, lat.dim());
  require_period_aligned(g, lat);
  const MinimizeConfig mc = minimize_config_from(cfg, lat, opt.seed);
  const CurvatureOptions copt = curvature_options_from(cfg);

  std::size_t target = 0;
  try {
    target = cell_count_for_volume(lat, mc.target_volume);
  } catch (const InvalidArgument& ex) {
    throw ConfigError(ex.what());
  }
  const auto run = minimize(mc, k, g, copt);
  MinimizeCommandResult res{run.report, run.best.set(), std::nullopt, exit_code::ok};

  nlohmann::json rep = report_to_json(run.report, opt.timing);
  rep["cells"] = target;
  rep["converged"] = run.report.converged;
  if (!run.report.tail.empty()) {
    const double r0 = tail_vanishing_radius(run.report.tail);
    double half = std::numeric_limits<double>::infinity();
    for (int d = 0; d < lat.dim(); ++d) half = std::min(half, 0.5 * lat.extents()[d] * lat.h());
    rep["tail_zero_radius"] = r0;
    rep["window_half_width"] = half;
  }
  if (opt.verify_oracle) {
    const auto orc = enumerate_min(lat, p, g, target);
    res.oracle_energy = orc.best_energy;
    const bool match =
        std::abs(run.best.energy() - orc.best_energy) <= 1e-9 * std::max(1.0, std::abs(orc.best_energy));
    rep["oracle_energy"] = orc.best_energy;
    rep["oracle_match"] = match;
    if (!match) res.exit = exit_code::violation;
  }
  if (!rep["converged"].get<bool>()) res.exit = exit_code::violation;

  write_json(opt.out / "report.json", rep);
  if (lat.dim() == 2) {
    auto out = open_output(opt.out / "set.pgm");
    write_pgm(out, run.best.set());
    finish_output(out, opt.out / "set.pgm");
  }
  write_json(opt.out / "set.json", gridset_to_json(run.best.set()));
  write_tail_csv(opt.out / "tail_mass.csv", run.report.tail);
  return res;
}

}  // namespace fracperim
