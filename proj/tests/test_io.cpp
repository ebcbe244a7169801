#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fracperim/experiments.hpp"

using namespace fracperim;

namespace {

std::filesystem::path scratch(const std::string& name) {
  auto d = std::filesystem::temp_directory_path() / ("fracperim_io_" + name);
  std::filesystem::remove_all(d);
  std::filesystem::create_directories(d);
  return d;
}

GridSet sample_set(const Lattice& lat) {
  GridSet e(lat);
  for (std::size_t i = 0; i < lat.size(); ++i)
    if ((i * 5 + 3) % 7 < 3) e.insert(i);
  return e;
}

std::string slurp(const std::filesystem::path& f) {
  std::ifstream in(f);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Raster, PbmRoundTrip) {
  const Lattice lat(2, 0.5, {5, 7});
  const GridSet e = sample_set(lat);
  std::stringstream ss;
  write_pbm(ss, e);
  EXPECT_EQ(ss.str().substr(0, 7), "P1\n7 5\n");
  const GridSet back = read_pbm(ss, lat);
  EXPECT_EQ(back.members(), e.members());
}

TEST(Raster, PgmRoundTrip) {
  const Lattice lat(2, 1.0, {4, 3});
  const GridSet e = sample_set(lat);
  std::stringstream ss;
  write_pgm(ss, e);
  EXPECT_EQ(read_pgm(ss, lat).members(), e.members());
}

TEST(Raster, MalformedInput) {
  const Lattice lat(2, 1.0, {2, 2});
  std::stringstream bad_magic("P4\n2 2\n0101");
  EXPECT_THROW(read_pbm(bad_magic, lat), IoError);
  std::stringstream wrong_size("P1\n3 2\n000000");
  EXPECT_THROW(read_pbm(wrong_size, lat), IoError);
  std::stringstream truncated("P1\n2 2\n01");
  EXPECT_THROW(read_pbm(truncated, lat), IoError);
}

TEST(Json, GridSetRoundTrip) {
  const Lattice lat(2, 0.25, {6, 4}, {-1.0, 0.5});
  const GridSet e = sample_set(lat);
  const GridSet back = gridset_from_json(nlohmann::json::parse(gridset_to_json(e).dump()));
  EXPECT_TRUE(back.lattice() == lat);
  EXPECT_EQ(back.members(), e.members());
  nlohmann::json j = gridset_to_json(e);
  j["members"].push_back(1000);
  EXPECT_THROW(gridset_from_json(j), IoError);
  EXPECT_THROW(gridset_from_json(nlohmann::json::object()), IoError);
}

TEST(Json, NumbersRoundTripExactly) {
  for (double v : {0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300}) EXPECT_EQ(std::stod(fmt_num(v)), v);
  EXPECT_EQ(fmt_num(0.5), "0.5");
  EXPECT_TRUE(json_number(std::nan("")).is_null());
}

TEST(Json, ReportTimingIsOptional) {
  EnergyReport r;
  r.wall_ms = 12.0;
  EXPECT_FALSE(report_to_json(r, false).contains("wall_ms"));
  EXPECT_TRUE(report_to_json(r, true).contains("wall_ms"));
  EXPECT_TRUE(report_to_json(r, false)["mu_mean"].is_null());
}

TEST(Files, CsvAndSvg) {
  const auto dir = scratch("files");
  CsvWriter csv(dir / "sub" / "t.csv", {"a", "b"});
  csv.row({1.0, 0.25});
  csv.close();
  EXPECT_EQ(slurp(dir / "sub" / "t.csv"), "a,b\n1,0.25\n");

  write_loglog_svg(dir / "p.svg", {"t", "x", "y", {0.5, 0.25}, {1.0, 0.5}, std::pair{2.0, 1.0}});
  const std::string svg = slurp(dir / "p.svg");
  EXPECT_NE(svg.find("<svg"), std::string::npos);
  EXPECT_NE(svg.find("slope 1"), std::string::npos);
}

TEST(Files, UnwritableOutputThrows) {
  const auto dir = scratch("unwritable");
  { std::ofstream(dir / "plain") << "x"; }
  EXPECT_THROW(write_json(dir / "plain" / "x.json", nlohmann::json::object()), IoError);
  EXPECT_THROW(read_json(dir / "missing.json"), IoError);
}

TEST(Files, SampledPotentialRoundTrip) {
  const auto dir = scratch("sampled");
  std::vector<double> vals;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 3; ++j) vals.push_back(i - 0.5 * j);
  write_sampled_potential(dir / "g.bin", 2, 0.5, {4, 3}, {0.0, 1.0}, vals);
  const Potential g = read_sampled_potential(dir / "g.bin");
  EXPECT_EQ(g.kind(), PotentialKind::sampled);
  EXPECT_NEAR(g.eval({0.5, 1.5, 0.0}), 1.0 - 0.5, 1e-14);
  { std::ofstream(dir / "short.bin") << "{\"dim\":2,\"spacing\":1,\"extents\":[2,2],\"origin\":[0,0]}\nabc"; }
  EXPECT_THROW(read_sampled_potential(dir / "short.bin"), IoError);
}

TEST(Config, ParseAndTypedAccess) {
  const Config c = Config::parse(R"(
[kernel]
s = 0.3
near_field_radius = 4
[lattice]
extents = [8, 16]
h = 1
[potential]
kind = "periodic"
)");
  EXPECT_DOUBLE_EQ(c.get_double("kernel.s", 0.5), 0.3);
  EXPECT_EQ(c.get_int("kernel.near_field_radius", 3), 4);
  EXPECT_EQ(c.get_ints("lattice.extents", {}), (std::vector<std::int64_t>{8, 16}));
  EXPECT_DOUBLE_EQ(c.get_double("lattice.h", 0.0), 1.0);
  EXPECT_EQ(c.get_string("potential.kind", ""), "periodic");
  EXPECT_EQ(c.get_string("potential.form", "product"), "product");
  EXPECT_THROW(c.get_int("kernel.s", 0), ConfigError);
  EXPECT_THROW(c.get_double("potential.kind", 0.0), ConfigError);
  EXPECT_THROW(Config::parse("[kernel\ns = "), ConfigError);
}

TEST(Config, Overrides) {
  Config c = Config::parse("[kernel]\ns = 0.3\n");
  c.apply_override("kernel.s=0.7");
  c.apply_override("potential.kind=coercive");
  c.apply_override("lattice.extents=[4, 5]");
  c.apply_override("a.b.c=true");
  EXPECT_DOUBLE_EQ(c.get_double("kernel.s", 0.0), 0.7);
  EXPECT_EQ(c.get_string("potential.kind", ""), "coercive");
  EXPECT_EQ(c.get_ints("lattice.extents", {}), (std::vector<std::int64_t>{4, 5}));
  EXPECT_TRUE(c.get_bool("a.b.c", false));
  EXPECT_THROW(c.apply_override("novalue"), ConfigError);
  EXPECT_THROW(c.apply_override("=3"), ConfigError);
}

TEST(Config, MissingFile) { EXPECT_THROW(Config::load("/nonexistent/x.toml"), ConfigError); }

TEST(Config, Readers) {
  Config c;
  c.apply_override("lattice.extents=[6]");
  c.apply_override("lattice.h=0.5");
  const Lattice lat = lattice_from(c);
  EXPECT_EQ(lat.size(), 36u);
  c.apply_override("potential.kind=bogus");
  EXPECT_THROW(potential_from(c, 2), ConfigError);
  c.apply_override("minimize.mode=sideways");
  c.apply_override("minimize.m=1.0");
  EXPECT_THROW(minimize_config_from(c, lat, 1), ConfigError);
  Config d;
  EXPECT_THROW(minimize_config_from(d, lat, 1), ConfigError);
}

TEST(Fit, LogLogSlope) {
  const std::vector<double> x{0.5, 0.25, 0.125}, y{2.0 * std::pow(0.5, 1.5), 2.0 * std::pow(0.25, 1.5),
                                                  2.0 * std::pow(0.125, 1.5)};
  const auto [slope, icpt] = loglog_fit(x, y);
  EXPECT_NEAR(slope, 1.5, 1e-12);
  EXPECT_NEAR(std::exp(icpt), 2.0, 1e-12);
}
