#pragma once

// Minimization of F(E) = P_s(E) - int_E g (+ mu | |E| - m |) over cell sets.
//
// EnergyState keeps phi(i) = sum_{j in E, j != i} W(i - j) for every window
// cell. With P_cell = S(i) + T(i), toggling a cell changes P_s by
//   add b:    P_cell - 2 phi(b)        remove a:  -P_cell + 2 phi(a)
// and swapping a in E for b outside E changes F by
//   2 phi(a) - 2 phi(b) + 2 W(a - b) + g_a - g_b     (g_i = g(x_i) h^N).

#include <chrono>
#include <cmath>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "kernel.hpp"
#include "lattice.hpp"
#include "perimeter.hpp"
#include "potential.hpp"

namespace fracperim {

enum class MinimizeMode { constrained_exchange, penalized_anneal, threshold_dynamics };
enum class InitKind { ball_at, random_cells, given };

inline std::string to_string(MinimizeMode m) {
  switch (m) {
    case MinimizeMode::constrained_exchange: return "constrained-exchange";
    case MinimizeMode::penalized_anneal: return "penalized-anneal";
    case MinimizeMode::threshold_dynamics: return "threshold-dynamics";
  }
  return "?";
}

struct MinimizeConfig {
  MinimizeMode mode = MinimizeMode::constrained_exchange;
  double target_volume = 0.0;
  /// Penalty weight; 0 selects the automatic mu_0.
  double mu = 0.0;
  int max_iters = 10000;
  std::uint64_t seed = 1;
  int restarts = 1;
  InitKind init = InitKind::ball_at;
  /// Ball center for InitKind::ball_at; defaults to the argmax of the ball-averaged g.
  std::optional<Point> ball_center;
  std::optional<GridSet> given;
  /// Anneal: temperature factor per sweep, initial temperature (0: 0.4 P_cell), sweeps.
  /// The defaults cool by a factor 1000 over the run; they are sized for oracle-scale windows.
  double cooling = 0.99965;
  double initial_temperature = 0.0;
  int anneal_sweeps = 20000;
  /// Threshold dynamics: score bonus for current members (0: plain linearization).
  double stabilization = 0.0;
  /// Run exchange search after anneal / threshold dynamics.
  bool polish = true;
  double tolerance = 1e-12;
};

/// Cell count of volume m; m must be a whole number of cells.
inline std::size_t cell_count_for_volume(const Lattice& lat, double m) {
  require(m >= 0.0, "target volume must be nonnegative");
  const double k = m / lat.cell_volume();
  const double r = std::round(k);
  if (std::abs(k - r) > 1e-9 * std::max(1.0, r))
    throw InvalidArgument("target volume is not a whole number of cells");
  if (r > static_cast<double>(lat.size())) throw InvalidArgument("target volume exceeds the window");
  return static_cast<std::size_t>(r);
}

/// Default penalty: 2 (sup |g| + (N omega_N / s) h^{-s}).
inline double default_mu(const KernelParams& p, double sup_abs_g) {
  return 2.0 * (sup_abs_g + p.dim * unit_ball_volume(p.dim) / p.s * std::pow(p.h, -p.s));
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
  std::size_t index(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

 private:
  std::mt19937_64 engine_;
};

class EnergyState {
 public:
  /// target_count enables the penalty mu * | |E| - target | (volume units).
  EnergyState(GridSet e, const WindowKernel& k, const std::vector<double>& g_cells, double mu = 0.0,
              std::optional<std::size_t> target_count = std::nullopt)
      : set_(std::move(e)), kernel_(&k), g_(&g_cells), mu_(mu), target_(target_count) {
    if (!(set_.lattice() == k.lattice())) throw InvalidArgument("set and kernel were built for different lattices");
    require(g_cells.size() == set_.lattice().size(), "cell potential size mismatch");
    rebuild();
  }

  const GridSet& set() const { return set_; }
  double phi(std::size_t i) const { return phi_[i]; }
  const std::vector<double>& phi_field() const { return phi_; }
  PerimeterValue ps_value() const { return {interior_ + exterior_, interior_, exterior_}; }
  double potential_term() const { return potential_; }
  double penalty() const { return target_ ? mu_ * volume_gap(set_.count()) : 0.0; }
  double energy() const { return interior_ + exterior_ - potential_ + penalty(); }
  double mu() const { return mu_; }
  std::optional<std::size_t> target() const { return target_; }

  /// g(x_i) h^N.
  double g_cell(std::size_t i) const { return (*g_)[i]; }

  double flip_ps_delta(std::size_t i) const {
    const double d = kernel_->cell_total() - 2.0 * phi_[i];
    return set_.contains(i) ? -d : d;
  }

  /// Exact change of the (penalized) energy if cell i is toggled.
  double flip_delta(std::size_t i) const {
    const bool in = set_.contains(i);
    double d = flip_ps_delta(i) + (in ? g_cell(i) : -g_cell(i));
    if (target_) {
      const std::size_t c = set_.count();
      d += mu_ * (volume_gap(in ? c - 1 : c + 1) - volume_gap(c));
    }
    return d;
  }

  void flip(std::size_t i) {
    const bool in = set_.contains(i);
    const double sgn = in ? -1.0 : 1.0;
    interior_ += sgn * (kernel_->window_sum(i) - 2.0 * phi_[i]);
    exterior_ += sgn * kernel_->exterior(i);
    potential_ += sgn * g_cell(i);
    set_.toggle(i);
    kernel_->visit_row(i, [&](std::size_t j, double w) { phi_[j] += sgn * w; });
  }

  /// Energy change of removing a (member) and adding b (non-member).
  double swap_delta(std::size_t a, std::size_t b) const {
    return 2.0 * phi_[a] - 2.0 * phi_[b] + 2.0 * kernel_->weight(a, b) + g_cell(a) - g_cell(b);
  }

  void swap(std::size_t a, std::size_t b) {
    flip(a);
    flip(b);
  }

  /// Recomputes every cached quantity from the member set.
  void rebuild() {
    const Lattice& lat = set_.lattice();
    phi_.assign(lat.size(), 0.0);
    const auto members = set_.members();
    for (std::size_t j : members) kernel_->visit_row(j, [&](std::size_t i, double w) { phi_[i] += w; });
    const PerimeterValue p = ps(set_, *kernel_);
    interior_ = p.interior_part;
    exterior_ = p.exterior_part;
    potential_ = 0.0;
    for (std::size_t j : members) potential_ += g_cell(j);
  }

  /// Largest relative deviation of the cached energy and phi from a fresh rebuild.
  double consistency_error() const {
    EnergyState fresh = *this;
    fresh.rebuild();
    double err = std::abs(fresh.energy() - energy()) / std::max(1.0, std::abs(fresh.energy()));
    for (std::size_t i = 0; i < phi_.size(); ++i)
      err = std::max(err, std::abs(fresh.phi_[i] - phi_[i]) / std::max(1.0, std::abs(fresh.phi_[i])));
    return err;
  }

 private:
  double volume_gap(std::size_t count) const {
    const double d = static_cast<double>(count) - static_cast<double>(*target_);
    return std::abs(d) * set_.lattice().cell_volume();
  }

  GridSet set_;
  const WindowKernel* kernel_;
  const std::vector<double>* g_;
  double mu_ = 0.0;
  std::optional<std::size_t> target_;
  std::vector<double> phi_;
  double interior_ = 0.0;
  double exterior_ = 0.0;
  double potential_ = 0.0;
};

/// g(x_i) h^N for every window cell.
inline std::vector<double> cell_potential(const Potential& g, const Lattice& lat) {
  auto v = sample_cells(g, lat);
  for (double& x : v) x *= lat.cell_volume();
  return v;
}

struct SwapMove {
  std::size_t remove = 0;
  std::size_t add = 0;
  double delta = 0.0;
};

/// Best strictly improving swap (boundary member out, exterior-adjacent cell in);
/// ties go to the lexicographically first pair.
inline std::optional<SwapMove> best_swap(const EnergyState& st, double tolerance = 1e-12) {
  const GridSet& e = st.set();
  const Lattice& lat = e.lattice();
  std::vector<std::size_t> outs, ins;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    if (is_boundary_cell(e, i)) outs.push_back(i);
    else if (is_exterior_adjacent(e, i)) ins.push_back(i);
  }
  const double threshold = -tolerance * std::max(1.0, std::abs(st.energy()));
  std::optional<SwapMove> best;
  for (std::size_t a : outs)
    for (std::size_t b : ins) {
      const double d = st.swap_delta(a, b);
      if (d < threshold && (!best || d < best->delta)) best = SwapMove{a, b, d};
    }
  return best;
}

/// One best-improvement exchange. Returns false at a local minimum.
inline bool exchange_step(EnergyState& st, double tolerance = 1e-12) {
  const auto mv = best_swap(st, tolerance);
  if (!mv) return false;
  st.swap(mv->remove, mv->add);
  return true;
}

/// Exchange until no improving swap remains; returns the number of accepted swaps.
inline int run_exchange(EnergyState& st, int max_iters, double tolerance = 1e-12) {
  int it = 0;
  while (it < max_iters && exchange_step(st, tolerance)) ++it;
  return it;
}

/// Toggles cells toward the target count, each time the one with the smallest
/// energy increase (ties: lowest index).
inline void project_volume(EnergyState& st, std::size_t target) {
  const std::size_t m = st.set().lattice().size();
  while (st.set().count() != target) {
    const bool grow = st.set().count() < target;
    std::size_t best = m;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < m; ++i) {
      if (st.set().contains(i) == grow) continue;
      const double d = st.flip_delta(i);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    st.flip(best);
  }
}

/// Linearized selection: the `count` cells with the smallest
///   v(i) = P_cell - 2 phi(i) - g_i - c chi_E(i),
/// ties broken by index.
inline GridSet threshold_step(const EnergyState& st, std::size_t count, double stabilization = 0.0) {
  const GridSet& e = st.set();
  const Lattice& lat = e.lattice();
  require(count <= lat.size(), "threshold step count exceeds the window");
  std::vector<std::pair<double, std::size_t>> score(lat.size());
  for (std::size_t i = 0; i < lat.size(); ++i) {
    double v = st.flip_ps_delta(i) * (e.contains(i) ? -1.0 : 1.0) - st.g_cell(i);
    if (e.contains(i)) v -= stabilization;
    score[i] = {v, i};
  }
  std::partial_sort(score.begin(), score.begin() + static_cast<std::ptrdiff_t>(count), score.end());
  GridSet out(lat);
  for (std::size_t j = 0; j < count; ++j) out.insert(score[j].second);
  return out;
}

/// Exact-count ball pattern placed where the summed cell potential is largest;
/// ties prefer the position nearest the window center, then the lowest index.
inline GridSet ball_init(const Lattice& lat, const std::vector<double>& g_cells, std::size_t count,
                         const std::optional<Point>& center = std::nullopt) {
  if (center) return nearest_cells(lat, *center, count);
  if (count == 0) return GridSet(lat);
  Coord mid{0, 0, 0};
  for (int k = 0; k < lat.dim(); ++k) mid[k] = lat.extents()[k] / 2;
  const GridSet pattern = nearest_cells(lat, lat.center(mid), count);
  std::vector<Coord> offs;
  Coord lo{0, 0, 0}, hi{0, 0, 0};
  for (std::size_t i : pattern.members()) {
    const Coord c = lat.coord(i);
    Coord o{c[0] - mid[0], c[1] - mid[1], c[2] - mid[2]};
    for (int k = 0; k < 3; ++k) {
      lo[k] = std::min(lo[k], o[k]);
      hi[k] = std::max(hi[k], o[k]);
    }
    offs.push_back(o);
  }
  const Point wc = [&] {
    Point p{0.0, 0.0, 0.0};
    for (int k = 0; k < lat.dim(); ++k) p[k] = lat.origin()[k] + 0.5 * lat.extents()[k] * lat.h();
    return p;
  }();
  std::optional<std::size_t> best;
  double best_sum = 0.0, best_d2 = 0.0;
  for (std::size_t i = 0; i < lat.size(); ++i) {
    const Coord c = lat.coord(i);
    bool fits = true;
    for (int k = 0; k < 3; ++k)
      if (c[k] + lo[k] < 0 || c[k] + hi[k] >= lat.extents()[k]) fits = false;
    if (!fits) continue;
    double sum = 0.0;
    for (const Coord& o : offs) sum += g_cells[lat.index(add(c, o))];
    const double d2 = distance2(lat.center(c), wc);
    const double tol = 1e-12 * std::max(1.0, std::abs(sum));
    if (!best || sum > best_sum + tol || (std::abs(sum - best_sum) <= tol && d2 < best_d2)) {
      best = i;
      best_sum = sum;
      best_d2 = d2;
    }
  }
  if (!best) return pattern;
  const Coord c = lat.coord(*best);
  GridSet out(lat);
  for (const Coord& o : offs) out.insert(lat.index(add(c, o)));
  return out;
}

inline GridSet random_init(const Lattice& lat, std::size_t count, Rng& rng) {
  std::vector<std::size_t> idx(lat.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  GridSet out(lat);
  for (std::size_t i = 0; i < count; ++i) out.insert(idx[i]);
  return out;
}

struct RunResult {
  GridSet set;
  double mu = 0.0;
  int iters = 0;
  /// The final local search stopped on its own rather than at max_iters.
  bool converged = true;
};

/// Metropolis single-cell flips on the penalized energy with geometric cooling;
/// returns the best-seen set after volume projection.
inline RunResult anneal(const GridSet& start, const WindowKernel& k, const std::vector<double>& g_cells,
                        std::size_t target, double mu, const MinimizeConfig& cfg, Rng& rng) {
  EnergyState st(start, k, g_cells, mu, target);
  const std::size_t m = k.lattice().size();
  double temp = cfg.initial_temperature > 0.0 ? cfg.initial_temperature : 0.4 * k.cell_total();
  GridSet best = st.set();
  double best_e = st.energy();
  int iters = 0;
  for (int sweep = 0; sweep < cfg.anneal_sweeps; ++sweep, temp *= cfg.cooling) {
    for (std::size_t step = 0; step < m; ++step, ++iters) {
      const std::size_t i = rng.index(m);
      const double d = st.flip_delta(i);
      if (d <= 0.0 || rng.uniform() < std::exp(-d / temp)) {
        st.flip(i);
        if (st.energy() < best_e) {
          best_e = st.energy();
          best = st.set();
        }
      }
    }
  }
  return {best, mu, iters, true};
}

struct EnergyReport {
  std::string mode;
  double s = 0.0;
  double h = 0.0;
  double m = 0.0;
  double energy = 0.0;
  double ps_interior = 0.0;
  double ps_exterior = 0.0;
  double potential_term = 0.0;
  double penalty_mu = 0.0;
  double mu_mean = std::numeric_limits<double>::quiet_NaN();
  double mu_spread = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  int restarts = 0;
  bool converged = true;
  std::uint64_t seed = 0;
  double wall_ms = 0.0;
  std::vector<TailSample> tail;
};

struct MinimizeResult {
  EnergyState best;
  EnergyReport report;
};

namespace detail {

inline RunResult run_once(const MinimizeConfig& cfg, const WindowKernel& k, const std::vector<double>& g_cells,
                          std::size_t target, double mu0, int restart) {
  const Lattice& lat = k.lattice();
  Rng rng(cfg.seed + static_cast<std::uint64_t>(restart) * 0x9e3779b97f4a7c15ULL);
  GridSet start(lat);
  if (restart == 0 && cfg.init == InitKind::given) {
    require(cfg.given.has_value(), "init = given needs a set");
    start = *cfg.given;
    require(start.lattice() == lat, "given initial set lives on another lattice");
  } else if (restart == 0 && cfg.init == InitKind::ball_at) {
    start = ball_init(lat, g_cells, target, cfg.ball_center);
  } else {
    start = random_init(lat, target, rng);
  }

  RunResult out{start, 0.0, 0};
  switch (cfg.mode) {
    case MinimizeMode::constrained_exchange: {
      require(start.count() == target, "constrained mode needs an initial set of the target volume");
      EnergyState st(start, k, g_cells);
      out.iters = run_exchange(st, cfg.max_iters, cfg.tolerance);
      out.converged = out.iters < cfg.max_iters;
      out.set = st.set();
      break;
    }
    case MinimizeMode::penalized_anneal: {
      double mu = mu0;
      for (int attempt = 0;; ++attempt) {
        Rng chain = rng;
        out = anneal(start, k, g_cells, target, mu, cfg, chain);
        if (out.set.count() == target || attempt == 8) break;
        mu *= 2.0;
      }
      EnergyState st(out.set, k, g_cells, out.mu, target);
      project_volume(st, target);
      if (cfg.polish) {
        EnergyState plain(st.set(), k, g_cells);
        const int polish = run_exchange(plain, cfg.max_iters, cfg.tolerance);
        out.iters += polish;
        out.converged = polish < cfg.max_iters;
        out.set = plain.set();
      } else {
        out.set = st.set();
      }
      break;
    }
    case MinimizeMode::threshold_dynamics: {
      EnergyState st(start, k, g_cells);
      if (st.set().count() != target) project_volume(st, target);
      GridSet best = st.set();
      double best_e = st.energy();
      out.converged = false;
      for (int it = 0; it < cfg.max_iters; ++it) {
        ++out.iters;
        GridSet next = threshold_step(st, target, cfg.stabilization);
        if (next == st.set()) {
          out.converged = true;
          break;
        }
        st = EnergyState(next, k, g_cells);
        if (st.energy() < best_e) {
          best_e = st.energy();
          best = st.set();
        }
      }
      EnergyState fin(best, k, g_cells);
      if (cfg.polish) {
        const int polish = run_exchange(fin, cfg.max_iters, cfg.tolerance);
        out.iters += polish;
        out.converged = out.converged && polish < cfg.max_iters;
      }
      out.set = fin.set();
      break;
    }
  }
  return out;
}

}  // namespace detail

/// Multistart driver. Restart 0 uses the configured initialization; later
/// restarts start from random cells with their own random streams.
inline MinimizeResult minimize(const MinimizeConfig& cfg, const WindowKernel& k, const Potential& g,
                               CurvatureOptions curv = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  const Lattice& lat = k.lattice();
  const std::size_t target = cell_count_for_volume(lat, cfg.target_volume);
  require(cfg.restarts >= 1, "restarts must be >= 1");
  require(cfg.mu >= 0.0, "mu must be nonnegative");
  require(cfg.cooling > 0.0 && cfg.cooling < 1.0, "cooling factor must lie in (0, 1)");
  const auto g_cells = cell_potential(g, lat);
  const double mu0 = cfg.mu > 0.0 ? cfg.mu : default_mu(k.params(), window_stats(g, lat).sup_abs);

  std::vector<std::optional<RunResult>> runs(static_cast<std::size_t>(cfg.restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    runs[r] = detail::run_once(cfg, k, g_cells, target, mu0, static_cast<int>(r));
  });

  std::size_t best = 0;
  std::vector<double> energies;
  int iters = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    energies.push_back(EnergyState(runs[r]->set, k, g_cells).energy());
    iters += runs[r]->iters;
    if (energies[r] < energies[best]) best = r;
  }

  EnergyState st(runs[best]->set, k, g_cells);
  EnergyReport rep;
  rep.mode = to_string(cfg.mode);
  rep.s = k.params().s;
  rep.h = lat.h();
  rep.m = cfg.target_volume;
  rep.energy = st.energy();
  rep.ps_interior = st.ps_value().interior_part;
  rep.ps_exterior = st.ps_value().exterior_part;
  rep.potential_term = st.potential_term();
  rep.penalty_mu = cfg.mode == MinimizeMode::penalized_anneal ? runs[best]->mu : 0.0;
  rep.iters = iters;
  rep.restarts = cfg.restarts;
  rep.converged = runs[best]->converged;
  rep.seed = cfg.seed;
  if (!st.set().empty() && st.set().count() < lat.size()) {
    const MuEstimate mu = mu_estimate(boundary_profile(st.set(), g, k, curv));
    rep.mu_mean = mu.mean;
    rep.mu_spread = mu.spread;
    rep.tail = tail_mass_profile(st.set(), barycenter(st.set()));
  }
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return {std::move(st), std::move(rep)};
}

}  // namespace fracperim
