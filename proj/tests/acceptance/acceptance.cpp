// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//   acceptance            run all
//   acceptance --only 6   run one
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fracperim/fracperim.hpp"

using namespace fracperim;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

fs::path scratch(const std::string& name) {
  auto d = fs::temp_directory_path() / ("fracperim_acceptance_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

RunOptions options(const fs::path& out, std::uint64_t seed) {
  RunOptions o;
  o.out = out;
  o.seed = seed;
  return o;
}

KernelParams params(int dim, double s, double h, int depth = 4) {
  KernelParams p;
  p.dim = dim;
  p.s = s;
  p.h = h;
  p.subdivision_depth = depth;
  return p;
}

GridSet random_set(const Lattice& lat, double density, Rng& rng) {
  GridSet e(lat);
  for (std::size_t i = 0; i < lat.size(); ++i)
    if (rng.uniform() < density) e.insert(i);
  return e;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::abs(b)); }

// ---- criteria ----

Outcome identities() {
  const Config cfg = Config::parse(R"(
[identity]
grids = [8, 16, 32]
s = [0.3, 0.5, 0.7]
pairs = 50
tolerance = 1e-9
)");
  const auto r = cmd_identity_check(cfg, options(scratch("c1"), 1));
  return {r.exit == exit_code::ok && r.pairs == 450,
          fmt("%zu pairs, max union residual %.2e, max localized residual %.2e", r.pairs, r.max_union_residual,
              r.max_local_residual)};
}

Outcome oracle_equivalence() {
  const Lattice lat8(2, 0.125, {8, 8});
  Rng rng(42);
  double worst = 0.0;
  const double svals[] = {0.3, 0.5, 0.7};
  for (int t = 0; t < 50; ++t) {
    const auto p = params(2, svals[t % 3], lat8.h());
    const WindowKernel k(KernelTable(p), lat8);
    const GridSet e = random_set(lat8, 0.2 + 0.6 * rng.uniform(), rng);
    worst = std::max(worst, rel(ps(e, k).total, direct_ps(e, p)));
  }

  const Lattice lat(2, 0.2, {5, 5});
  const auto p = params(2, 0.5, lat.h());
  const WindowKernel k(KernelTable(p), lat);
  int hits = 0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    Rng irng(1000 + inst);
    const Potential g = Potential::periodic(2, 5.0 * (0.5 + irng.uniform()), {1, 1, 1},
                                            {irng.uniform(), irng.uniform(), 0.0});
    MinimizeConfig cfg;
    cfg.mode = MinimizeMode::penalized_anneal;
    cfg.target_volume = 6 * lat.cell_volume();
    cfg.restarts = 5;
    cfg.seed = inst;
    const auto r = minimize(cfg, k, g);
    const auto o = enumerate_min(lat, p, g, 6);
    hits += r.best.set().count() == 6 &&
            std::abs(r.report.energy - o.best_energy) <= 1e-9 * std::max(1.0, std::abs(o.best_energy));
  }
  return {worst <= 1e-9 && hits >= 19,
          fmt("ps vs direct_ps worst %.2e on 50 sets; minimizer matched the oracle on %d/20", worst, hits)};
}

Outcome isoperimetric() {
  const Config cfg = Config::parse(R"(
[isoperimetric]
n = 64
s = [0.3, 0.5, 0.7]
shapes = ["disk", "square", "rectangle", "plus"]
min_relative_deficit = 0.01
)");
  const auto r = cmd_isoperimetric(cfg, options(scratch("c3"), 1));
  std::string worst;
  double lo = std::numeric_limits<double>::infinity();
  for (const auto& row : r.rows)
    if (row.shape != "disk" && row.relative_deficit < lo) {
      lo = row.relative_deficit;
      worst = fmt("%s at s=%.1f", row.shape.c_str(), row.s);
    }
  return {r.exit == exit_code::ok, fmt("smallest relative deficit %.4f%% (%s), need >= 1%%", 100.0 * lo, worst.c_str())};
}

Outcome scaling() {
  const Config cfg = Config::parse(R"(
[scaling]
lambdas = [2, 3]
shapes = ["disk", "square"]
constants = [0.0, 1.0]
tolerance = 0.03
)");
  const auto r = cmd_scaling_check(cfg, options(scratch("c4"), 1));
  double worst = 0.0;
  for (const auto& row : r.rows) worst = std::max(worst, row.relative_error);
  return {r.exit == exit_code::ok && !r.rows.empty(),
          fmt("%zu cases, worst relative error %.2f%%", r.rows.size(), 100.0 * worst)};
}

Outcome euler_lagrange() {
  Config cfg = Config::parse(R"(
[lattice]
h = 0.03125
extents = [64]
[kernel]
s = 0.5
[potential]
kind = "periodic"
form = "sum"
amplitude = 4.0
[minimize]
mode = "constrained-exchange"
m = 0.5
[mu_check]
shape = "minimize"
max_spread = 0.2
)");
  const auto a = cmd_mu_check(cfg, options(scratch("c5a"), 3));
  cfg.apply_override("potential.kind=constant");
  cfg.apply_override("potential.value=0.0");
  cfg.apply_override("mu_check.shape=disk");
  cfg.apply_override("mu_check.max_spread=0.1");
  const auto b = cmd_mu_check(cfg, options(scratch("c5b"), 3));
  const bool conv = a.converged.value_or(false);
  return {conv && a.exit == exit_code::ok && b.exit == exit_code::ok,
          fmt("minimizer spread %.4f (converged: %s), disk spread %.4f", a.mu.spread, conv ? "yes" : "no", b.mu.spread)};
}

Outcome small_volume() {
  const Config cfg = Config::parse(R"(
[kernel]
s = 0.5
[potential]
kind = "periodic"
form = "sum"
frequencies = [1, 1]
amplitude = 4.0
[small_volume]
eps = [0.5, 0.35, 0.25, 0.18, 0.125]
max_inversions = 1
min_slope = 0.3
)");
  const auto r = cmd_small_volume(cfg, options(scratch("c6"), 1));
  std::string row;
  for (const auto& x : r.rows) row += fmt(" %.3g", x.asymmetry);
  return {r.exit == exit_code::ok && r.slope && r.inversions <= 1 && *r.slope >= 0.3,
          fmt("slope %.4f, %d inversion(s), rescaled asymmetry:%s", r.slope.value_or(NAN), r.inversions, row.c_str())};
}

Outcome penalized_equivalence() {
  const Lattice lat(2, 0.25, {4, 5});
  const auto p = params(2, 0.5, lat.h());
  int good = 0;
  int max_doublings = 0;
  for (std::uint64_t inst = 0; inst < 20; ++inst) {
    Rng rng(2000 + inst);
    const Potential g = Potential::periodic(2, 2.0 + 8.0 * rng.uniform(), {1, 1, 1},
                                            {rng.uniform(), rng.uniform(), 0.0});
    const std::size_t target = 3 + rng.index(12);
    const auto all = enumerate_by_cardinality(lat, p, g);
    const auto pen = penalized_optimum(all, target, lat.cell_volume(), 1e-3);
    const auto con = enumerate_min(lat, p, g, target);
    max_doublings = std::max(max_doublings, pen.doublings);
    good += pen.set.count() == target &&
            std::abs(pen.energy - con.best_energy) <= 1e-12 * std::max(1.0, std::abs(con.best_energy));
  }
  return {good == 20, fmt("%d/20 penalized optima have volume m and the constrained energy (up to %d doublings)", good,
                          max_doublings)};
}

Outcome boundedness() {
  Config cfg = Config::parse(R"(
[lattice]
h = 0.0625
extents = [64]
origin = [-2.0]
[kernel]
s = 0.5
[potential]
kind = "coercive"
a = 1.0
center = [0.0]
[minimize]
mode = "constrained-exchange"
restarts = 3
)");
  bool ok = true;
  std::string detail;
  for (double m : {0.25, 0.5, 1.0}) {
    cfg.apply_override("minimize.m=" + fmt_num(m));
    const fs::path dir = scratch("c8");
    const auto r = cmd_minimize(cfg, options(dir, 11));
    const auto rep = read_json(dir / "report.json");
    const double r0 = rep["tail_zero_radius"].get<double>(), half = rep["window_half_width"].get<double>();
    ok = ok && r.report.converged && r0 < 0.8 * half;
    detail += fmt("%sm=%g: r0=%.3f%s", detail.empty() ? "" : "; ", m, r0, r.report.converged ? "" : " (not converged)");
  }
  return {ok, detail + fmt(", limit %.3f", 0.8 * 2.0)};
}

Outcome quadrature() {
  bool ok = true;
  double worst_ratio = 0.0;
  for (double s : {0.3, 0.5, 0.7})
    for (const Coord d : {Coord{1, 0, 0}, Coord{1, 1, 0}}) {
      std::vector<double> w;
      for (int depth = 2; depth <= 6; ++depth) w.push_back(cell_weight(params(2, s, 1.0, depth), d));
      for (std::size_t i = 2; i < w.size(); ++i) {
        const double prev = std::abs(w[i - 1] - w[i - 2]), cur = std::abs(w[i] - w[i - 1]);
        if (prev == 0.0) continue;
        worst_ratio = std::max(worst_ratio, cur / prev);
        ok = ok && cur <= 0.5 * prev;
      }
    }
  double worst_1d = 0.0;
  for (double s : {0.3, 0.5, 0.7})
    for (int d = 1; d <= 3; ++d) {  // near field; farther offsets use the midpoint rule
      const double a = 1.0 - s;
      const double exact = d == 1 ? (2.0 - std::pow(2.0, a)) / (s * a)
                                  : (2.0 * std::pow(d, a) - std::pow(d + 1.0, a) - std::pow(d - 1.0, a)) / (s * a);
      worst_1d = std::max(worst_1d, rel(cell_weight(params(1, s, 1.0), {d, 0, 0}), exact));
    }
  ok = ok && worst_1d <= 1e-6;
  return {ok, fmt("largest increment ratio %.3f (need <= 0.5), 1D worst relative error %.2e", worst_ratio, worst_1d)};
}

std::string slurp(const fs::path& f) {
  std::ifstream in(f, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"identity", "[identity]\ngrids = [8, 16]\npairs = 10\n"},
      {"isoperimetric", "[isoperimetric]\nn = 24\ns = [0.5]\n"},
      {"scaling", "[scaling]\nlambdas = [2]\nradius_cells = 4\n"},
      {"small-volume", "[small_volume]\neps = [0.5, 0.35]\nradius_cells = 6\n"},
      {"mu-check", "[lattice]\nh = 0.0625\nextents = [32]\n[potential]\nkind = \"periodic\"\namplitude = 3.0\n"
                   "[minimize]\nm = 0.25\n"},
      {"minimize", "[lattice]\nh = 0.2\nextents = [5]\n[potential]\nkind = \"periodic\"\namplitude = 5.0\n"
                   "[minimize]\nmode = \"penalized-anneal\"\ncells = 6\nrestarts = 3\n"},
  };
  int files = 0;
  std::string bad;
  for (const auto& [cmd, text] : runs) {
    const Config cfg = Config::parse(text);
    fs::path dirs[2] = {scratch("c10a_" + cmd), scratch("c10b_" + cmd)};
    for (const auto& d : dirs) {
      const auto o = options(d, 7);
      if (cmd == "identity") cmd_identity_check(cfg, o);
      else if (cmd == "isoperimetric") cmd_isoperimetric(cfg, o);
      else if (cmd == "scaling") cmd_scaling_check(cfg, o);
      else if (cmd == "small-volume") cmd_small_volume(cfg, o);
      else if (cmd == "mu-check") cmd_mu_check(cfg, o);
      else cmd_minimize(cfg, o);
    }
    for (const auto& entry : fs::directory_iterator(dirs[0])) {
      const auto ext = entry.path().extension();
      if (ext != ".csv" && ext != ".json") continue;
      ++files;
      if (slurp(entry.path()) != slurp(dirs[1] / entry.path().filename()))
        bad += " " + cmd + "/" + entry.path().filename().string();
    }
  }
  return {bad.empty() && files > 0,
          bad.empty() ? fmt("%d CSV/JSON artifacts identical across reruns", files) : "differs:" + bad};
}

}  // namespace

int main(int argc, char** argv) {
  int only = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--only" && i + 1 < argc) only = std::atoi(argv[++i]);
    else {
      std::fprintf(stderr, "usage: acceptance [--only N]\n");
      return 3;
    }
  }
  const std::vector<std::function<Outcome()>> criteria = {
      identities, oracle_equivalence, isoperimetric,         scaling,     euler_lagrange,
      small_volume, penalized_equivalence, boundedness, quadrature, determinism,
  };
  if (only < 0 || only > static_cast<int>(criteria.size())) {
    std::fprintf(stderr, "no criterion %d\n", only);
    return 3;
  }
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<int>(i) + 1 != only) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i]();
    } catch (const std::exception& ex) {
      o = {false, std::string("threw: ") + ex.what()};
    }
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("%s criterion %zu: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, o.detail.c_str(), sec);
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
