#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fracperim/fracperim.hpp"

namespace fp = fracperim;

namespace {

struct Invocation {
  std::string config;
  std::uint64_t seed = 1;
  bool seed_given = false;
  std::string out = "out";
  std::vector<std::string> overrides;
  fp::RunOptions opt;
};

void add_common(CLI::App* sub, Invocation& inv) {
  sub->add_option("--config", inv.config, "TOML config file");
  sub->add_option("--seed", inv.seed, "random seed (overrides run.seed)")->each([&](const std::string&) {
    inv.seed_given = true;
  });
  sub->add_option("--out", inv.out, "output directory");
  sub->add_flag("--timing", inv.opt.timing, "include wall-clock time in JSON reports");
  sub->add_option("overrides", inv.overrides, "section.key=value overrides");
}

fp::Config load_config(const Invocation& inv) {
  fp::Config cfg = inv.config.empty() ? fp::Config() : fp::Config::load(inv.config);
  for (const auto& o : inv.overrides) cfg.apply_override(o);
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fracperim: fractional perimeter minimization experiments"};
  app.require_subcommand(1);
  Invocation inv;

  auto* identity = app.add_subcommand("identity-check", "decomposition identities on random sets");
  add_common(identity, inv);
  identity->add_flag("--perturb-weights", inv.opt.perturb_weights, "inject a kernel inconsistency");

  auto* iso = app.add_subcommand("isoperimetric", "disk against other shapes of equal cell count");
  add_common(iso, inv);

  auto* small = app.add_subcommand("small-volume", "asymmetry of small-volume minimizers");
  add_common(small, inv);

  auto* scaling = app.add_subcommand("scaling-check", "energy under dilation");
  add_common(scaling, inv);

  auto* mu = app.add_subcommand("mu-check", "constancy of curvature minus potential on the boundary");
  add_common(mu, inv);
  mu->add_flag("--force-slab", inv.opt.force_slab, "request the (infeasible) half-space slab");

  auto* minimize = app.add_subcommand("minimize", "run the minimizer and write its report");
  add_common(minimize, inv);
  minimize->add_flag("--verify-oracle", inv.opt.verify_oracle, "compare against exhaustive enumeration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : fp::exit_code::config;
  }

  try {
    const fp::Config cfg = load_config(inv);
    inv.opt.out = inv.out;
    inv.opt.seed = inv.seed_given ? inv.seed : static_cast<std::uint64_t>(cfg.get_int("run.seed", 1));

    if (identity->parsed()) {
      const auto r = fp::cmd_identity_check(cfg, inv.opt);
      std::cout << "pairs " << r.pairs << "  max union residual " << r.max_union_residual
                << "  max localization residual " << r.max_local_residual << '\n';
      return r.exit;
    }
    if (iso->parsed()) {
      const auto r = fp::cmd_isoperimetric(cfg, inv.opt);
      for (const auto& row : r.rows)
        std::cout << "s=" << row.s << "  " << row.shape << "  ps=" << row.ps << "  deficit=" << row.deficit
                  << "  relative=" << row.relative_deficit << '\n';
      return r.exit;
    }
    if (small->parsed()) {
      const auto r = fp::cmd_small_volume(cfg, inv.opt);
      for (const auto& row : r.rows) std::cout << "eps=" << row.eps << "  asymmetry=" << row.asymmetry << '\n';
      if (r.slope) std::cout << "slope " << *r.slope << "  C " << r.fitted_c << '\n';
      return r.exit;
    }
    if (scaling->parsed()) {
      const auto r = fp::cmd_scaling_check(cfg, inv.opt);
      for (const auto& row : r.rows)
        std::cout << row.shape << "  g=" << row.potential << "  lambda=" << row.lambda << "  ratio=" << row.ratio
                  << "  target=" << row.target << '\n';
      return r.exit;
    }
    if (mu->parsed()) {
      const auto r = fp::cmd_mu_check(cfg, inv.opt);
      std::cout << "samples " << r.samples << "  mu " << r.mu.mean << "  spread " << r.mu.spread << '\n';
      return r.exit;
    }
    if (minimize->parsed()) {
      const auto r = fp::cmd_minimize(cfg, inv.opt);
      std::cout << "energy " << r.report.energy << "  cells " << r.set.count() << '\n';
      if (r.oracle_energy) std::cout << "oracle " << *r.oracle_energy << '\n';
      return r.exit;
    }
  } catch (const fp::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fp::exit_code::io;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fp::exit_code::config;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fp::exit_code::config;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fp::exit_code::io;
  }
  return fp::exit_code::config;
}
