#pragma once

#include <bit>
#include <charconv>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>
#include <toml.hpp>

#include "lattice.hpp"
#include "minimizer.hpp"
#include "potential.hpp"

namespace fracperim {

/// Malformed or inconsistent configuration.
class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

/// Shortest decimal that round-trips to the same double.
inline std::string fmt_num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

inline std::ofstream open_output(const std::filesystem::path& file, bool binary = false) {
  if (file.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(file.parent_path(), ec);
  }
  std::ofstream out(file, binary ? std::ios::binary : std::ios::out);
  if (!out) throw IoError("cannot open " + file.string() + " for writing");
  return out;
}

inline void finish_output(std::ofstream& out, const std::filesystem::path& file) {
  out.flush();
  if (!out) throw IoError("write failed for " + file.string());
}

// ---- rasters (N = 2; axis 0 runs down the rows) ----

inline void write_pbm(std::ostream& out, const GridSet& e) {
  const Lattice& lat = e.lattice();
  require(lat.dim() == 2, "PBM output needs a 2-D lattice");
  const Coord& n = lat.extents();
  out << "P1\n" << n[1] << ' ' << n[0] << '\n';
  for (int r = 0; r < n[0]; ++r) {
    for (int c = 0; c < n[1]; ++c) out << (e.contains(Coord{r, c, 0}) ? '1' : '0');
    out << '\n';
  }
}

inline GridSet read_pbm(std::istream& in, const Lattice& lat) {
  require(lat.dim() == 2, "PBM input needs a 2-D lattice");
  std::string magic;
  int w = 0, hgt = 0;
  in >> magic >> w >> hgt;
  if (!in || magic != "P1") throw IoError("not a plain PBM stream");
  if (w != lat.extents()[1] || hgt != lat.extents()[0]) throw IoError("PBM size does not match the lattice");
  GridSet out(lat);
  for (int r = 0; r < hgt; ++r)
    for (int c = 0; c < w; ++c) {
      char ch = 0;
      do in.get(ch);
      while (in && std::isspace(static_cast<unsigned char>(ch)));
      if (!in || (ch != '0' && ch != '1')) throw IoError("truncated or malformed PBM data");
      if (ch == '1') out.insert(lat.index(Coord{r, c, 0}));
    }
  return out;
}

/// Plain PGM: members 255, others 0.
inline void write_pgm(std::ostream& out, const GridSet& e) {
  const Lattice& lat = e.lattice();
  require(lat.dim() == 2, "PGM output needs a 2-D lattice");
  const Coord& n = lat.extents();
  out << "P2\n" << n[1] << ' ' << n[0] << "\n255\n";
  for (int r = 0; r < n[0]; ++r) {
    for (int c = 0; c < n[1]; ++c) out << (c ? " " : "") << (e.contains(Coord{r, c, 0}) ? 255 : 0);
    out << '\n';
  }
}

inline GridSet read_pgm(std::istream& in, const Lattice& lat) {
  std::string magic;
  int w = 0, hgt = 0, maxv = 0;
  in >> magic >> w >> hgt >> maxv;
  if (!in || magic != "P2") throw IoError("not a plain PGM stream");
  if (w != lat.extents()[1] || hgt != lat.extents()[0]) throw IoError("PGM size does not match the lattice");
  GridSet out(lat);
  for (int r = 0; r < hgt; ++r)
    for (int c = 0; c < w; ++c) {
      int v = 0;
      if (!(in >> v)) throw IoError("truncated PGM data");
      if (2 * v > maxv) out.insert(lat.index(Coord{r, c, 0}));
    }
  return out;
}

// ---- JSON ----

inline nlohmann::json lattice_to_json(const Lattice& lat) {
  nlohmann::json j;
  j["dim"] = lat.dim();
  j["h"] = lat.h();
  std::vector<int> ext(lat.extents().begin(), lat.extents().begin() + lat.dim());
  std::vector<double> org(lat.origin().begin(), lat.origin().begin() + lat.dim());
  j["extents"] = ext;
  j["origin"] = org;
  return j;
}

inline Lattice lattice_from_json(const nlohmann::json& j) {
  try {
    return Lattice(j.at("dim").get<int>(), j.at("h").get<double>(), j.at("extents").get<std::vector<int>>(),
                   j.at("origin").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad lattice record: ") + ex.what());
  }
}

inline nlohmann::json gridset_to_json(const GridSet& e) {
  nlohmann::json j = lattice_to_json(e.lattice());
  j["members"] = e.members();
  return j;
}

inline GridSet gridset_from_json(const nlohmann::json& j) {
  const Lattice lat = lattice_from_json(j);
  std::vector<std::size_t> members;
  try {
    members = j.at("members").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad members list: ") + ex.what());
  }
  for (std::size_t i : members)
    if (i >= lat.size()) throw IoError("member index outside the lattice");
  return GridSet::from_indices(lat, members);
}

inline void write_json(const std::filesystem::path& file, const nlohmann::json& j) {
  auto out = open_output(file);
  out << j.dump(2) << '\n';
  finish_output(out, file);
}

inline nlohmann::json read_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open " + file.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError("cannot parse " + file.string() + ": " + ex.what());
  }
}

inline nlohmann::json json_number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(); }

inline nlohmann::json report_to_json(const EnergyReport& r, bool with_timing) {
  nlohmann::json j;
  j["mode"] = r.mode;
  j["s"] = r.s;
  j["h"] = r.h;
  j["m"] = r.m;
  j["energy"] = r.energy;
  j["ps_interior"] = r.ps_interior;
  j["ps_exterior"] = r.ps_exterior;
  j["potential_term"] = r.potential_term;
  j["mu_mean"] = json_number(r.mu_mean);
  j["mu_spread"] = json_number(r.mu_spread);
  j["iters"] = r.iters;
  j["restarts"] = r.restarts;
  j["seed"] = r.seed;
  if (r.penalty_mu > 0.0) j["penalty_mu"] = r.penalty_mu;
  if (with_timing) j["wall_ms"] = r.wall_ms;
  return j;
}

// ---- CSV ----

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header)
      : file_(file), out_(open_output(file)) {
    row_strings(header);
  }
  void row(const std::vector<double>& values) {
    std::vector<std::string> cells;
    for (double v : values) cells.push_back(fmt_num(v));
    row_strings(cells);
  }
  void row_strings(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  void close() { finish_output(out_, file_); }

 private:
  std::filesystem::path file_;
  std::ofstream out_;
};

inline void write_profile_csv(const std::filesystem::path& file, const std::vector<CurvatureSample>& prof, int dim) {
  static const char* axes = "ijk";
  static const char* names = "xyz";
  std::vector<std::string> head;
  for (int k = 0; k < dim; ++k) head.push_back(std::string(1, axes[k]));
  for (int k = 0; k < dim; ++k) head.push_back(std::string(1, names[k]));
  for (const char* c : {"hs", "g", "residual"}) head.emplace_back(c);
  CsvWriter csv(file, head);
  for (const auto& c : prof) {
    std::vector<double> r;
    for (int k = 0; k < dim; ++k) r.push_back(c.cell[k]);
    for (int k = 0; k < dim; ++k) r.push_back(c.x[k]);
    r.insert(r.end(), {c.hs, c.g_at_x, c.residual});
    csv.row(r);
  }
  csv.close();
}

inline void write_tail_csv(const std::filesystem::path& file, const std::vector<TailSample>& tail) {
  CsvWriter csv(file, {"r", "mass"});
  for (const auto& t : tail) csv.row({t.r, t.mass});
  csv.close();
}

// ---- SVG ----

struct LogLogPlot {
  std::string title;
  std::string xlabel;
  std::string ylabel;
  std::vector<double> x;
  std::vector<double> y;
  /// Optional fitted line y = c x^slope.
  std::optional<std::pair<double, double>> fit;
};

inline void write_loglog_svg(const std::filesystem::path& file, const LogLogPlot& p) {
  const double w = 480, hgt = 360, ml = 70, mr = 20, mt = 40, mb = 50;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < p.x.size(); ++i)
    if (p.x[i] > 0 && p.y[i] > 0) {
      lx.push_back(std::log10(p.x[i]));
      ly.push_back(std::log10(p.y[i]));
    }
  auto range = [](const std::vector<double>& v) {
    if (v.empty()) return std::pair{0.0, 1.0};
    auto [a, b] = std::minmax_element(v.begin(), v.end());
    double lo = std::floor(*a * 10) / 10, hi = std::ceil(*b * 10) / 10;
    if (hi - lo < 0.1) hi = lo + 0.1;
    return std::pair{lo, hi};
  };
  const auto [x0, x1] = range(lx);
  const auto [y0, y1] = range(ly);
  auto px = [&](double v) { return ml + (v - x0) / (x1 - x0) * (w - ml - mr); };
  auto py = [&](double v) { return hgt - mb - (v - y0) / (y1 - y0) * (hgt - mt - mb); };

  auto out = open_output(file);
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << hgt << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<polyline fill=\"none\" stroke=\"black\" points=\"" << ml << ',' << mt << ' ' << ml << ',' << hgt - mb
      << ' ' << w - mr << ',' << hgt - mb << "\"/>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" << p.title << "</text>\n";
  out << "<text x=\"" << w / 2 << "\" y=\"" << hgt - 12 << "\" text-anchor=\"middle\" font-size=\"12\">log10 "
      << p.xlabel << "  [" << x0 << ", " << x1 << "]</text>\n";
  out << "<text x=\"14\" y=\"" << hgt / 2 << "\" font-size=\"12\" transform=\"rotate(-90 14 " << hgt / 2
      << ")\" text-anchor=\"middle\">log10 " << p.ylabel << "  [" << y0 << ", " << y1 << "]</text>\n";
  if (!lx.empty()) {
    out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < lx.size(); ++i) out << (i ? " " : "") << px(lx[i]) << ',' << py(ly[i]);
    out << "\"/>\n";
  }
  if (p.fit && lx.size() >= 2) {
    const auto [c, slope] = *p.fit;
    const double a = std::log10(c);
    out << "<polyline fill=\"none\" stroke=\"firebrick\" stroke-dasharray=\"5,4\" points=\"" << px(x0) << ','
        << py(a + slope * x0) << ' ' << px(x1) << ',' << py(a + slope * x1) << "\"/>\n";
    out << "<text x=\"" << w - mr << "\" y=\"" << mt + 14 << "\" text-anchor=\"end\" font-size=\"12\">slope "
        << std::setprecision(3) << slope << "</text>\n";
  }
  out << "</svg>\n";
  finish_output(out, file);
}

// ---- sampled potential file: one JSON header line, then little-endian float64 values ----

inline void write_sampled_potential(const std::filesystem::path& file, int dim, double spacing,
                                    const std::vector<int>& extents, const std::vector<double>& origin,
                                    const std::vector<double>& values) {
  static_assert(std::endian::native == std::endian::little, "payload is written in native order");
  nlohmann::json head{{"dim", dim}, {"spacing", spacing}, {"extents", extents}, {"origin", origin}};
  auto out = open_output(file, true);
  out << head.dump() << '\n';
  out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * 8));
  finish_output(out, file);
}

inline Potential read_sampled_potential(const std::filesystem::path& file) {
  static_assert(std::endian::native == std::endian::little, "payload is read in native order");
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open sampled potential " + file.string());
  std::string line;
  std::getline(in, line);
  nlohmann::json head;
  try {
    head = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("bad sampled potential header: ") + ex.what());
  }
  const int dim = head.value("dim", 0);
  const auto ext = head.value("extents", std::vector<int>{});
  auto org = head.value("origin", std::vector<double>{});
  if (dim < 1 || dim > 3 || static_cast<int>(ext.size()) != dim || static_cast<int>(org.size()) != dim)
    throw IoError("inconsistent sampled potential header");
  std::size_t n = 1;
  Coord e{1, 1, 1};
  Point o{0.0, 0.0, 0.0};
  for (int k = 0; k < dim; ++k) {
    if (ext[k] < 2) throw IoError("sampled potential needs at least 2 nodes per axis");
    n *= static_cast<std::size_t>(ext[k]);
    e[k] = ext[k];
    o[k] = org[k];
  }
  std::vector<double> vals(n);
  in.read(reinterpret_cast<char*>(vals.data()), static_cast<std::streamsize>(n * 8));
  if (in.gcount() != static_cast<std::streamsize>(n * 8)) throw IoError("truncated sampled potential payload");
  return Potential::sampled(dim, head.value("spacing", 0.0), e, o, std::move(vals));
}

// ---- configuration: TOML file plus section.key=value overrides ----

class Config {
 public:
  Config() = default;

  static Config parse(std::string_view text, const std::string& source = "config") {
    Config c;
    try {
      c.table_ = toml::parse(text, source);
    } catch (const toml::parse_error& ex) {
      std::ostringstream os;
      os << source << ": " << ex.description() << " (line " << ex.source().begin.line << ")";
      throw ConfigError(os.str());
    }
    return c;
  }

  static Config load(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot read config file " + file.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse(ss.str(), file.string());
    c.base_dir_ = file.has_parent_path() ? file.parent_path() : std::filesystem::path(".");
    return c;
  }

  /// "section.key=value"; the value is read as TOML, falling back to a bare string.
  void apply_override(const std::string& item) {
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like section.key=value: " + item);
    const std::string path = item.substr(0, eq);
    const std::string raw = item.substr(eq + 1);
    toml::table parsed;
    try {
      parsed = toml::parse("v = " + raw);
    } catch (const toml::parse_error&) {
      parsed = toml::table{{"v", raw}};
    }
    const auto dot = path.rfind('.');
    toml::table* target = &table_;
    std::string key = path;
    if (dot != std::string::npos) {
      std::string section = path.substr(0, dot);
      key = path.substr(dot + 1);
      std::size_t start = 0;
      while (start <= section.size()) {
        const auto next = section.find('.', start);
        const std::string part = section.substr(start, next == std::string::npos ? std::string::npos : next - start);
        auto* sub = (*target)[part].as_table();
        if (!sub) {
          target->insert_or_assign(part, toml::table{});
          sub = (*target)[part].as_table();
        }
        target = sub;
        if (next == std::string::npos) break;
        start = next + 1;
      }
    }
    target->insert_or_assign(key, *parsed.get("v"));
  }

  bool has(const std::string& path) const { return static_cast<bool>(table_.at_path(path)); }

  double get_double(const std::string& path, double fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (auto v = n.value<double>()) return *v;
    throw ConfigError(path + " must be a number");
  }

  std::int64_t get_int(const std::string& path, std::int64_t fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (n.is_integer()) return *n.value<std::int64_t>();
    throw ConfigError(path + " must be an integer");
  }

  bool get_bool(const std::string& path, bool fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (auto v = n.value<bool>()) return *v;
    throw ConfigError(path + " must be true or false");
  }

  std::string get_string(const std::string& path, const std::string& fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (auto v = n.value<std::string>()) return *v;
    throw ConfigError(path + " must be a string");
  }

  std::vector<double> get_doubles(const std::string& path, const std::vector<double>& fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    std::vector<double> out;
    if (auto v = n.value<double>()) return {*v};
    const auto* arr = n.as_array();
    if (!arr) throw ConfigError(path + " must be a number or an array of numbers");
    for (const auto& el : *arr) {
      auto v = el.value<double>();
      if (!v) throw ConfigError(path + " must contain numbers only");
      out.push_back(*v);
    }
    return out;
  }

  std::vector<std::int64_t> get_ints(const std::string& path, const std::vector<std::int64_t>& fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (n.is_integer()) return {*n.value<std::int64_t>()};
    const auto* arr = n.as_array();
    if (!arr) throw ConfigError(path + " must be an integer or an array of integers");
    std::vector<std::int64_t> out;
    for (const auto& el : *arr) {
      if (!el.is_integer()) throw ConfigError(path + " must contain integers only");
      out.push_back(*el.value<std::int64_t>());
    }
    return out;
  }

  std::vector<std::string> get_strings(const std::string& path, const std::vector<std::string>& fallback) const {
    auto n = table_.at_path(path);
    if (!n) return fallback;
    if (auto v = n.value<std::string>()) return {*v};
    const auto* arr = n.as_array();
    if (!arr) throw ConfigError(path + " must be a string or an array of strings");
    std::vector<std::string> out;
    for (const auto& el : *arr) {
      auto v = el.value<std::string>();
      if (!v) throw ConfigError(path + " must contain strings only");
      out.push_back(*v);
    }
    return out;
  }

  /// Paths in the file are relative to the file's directory.
  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path q(p);
    return q.is_absolute() ? q : base_dir_ / q;
  }

 private:
  toml::table table_;
  std::filesystem::path base_dir_ = ".";
};

}  // namespace fracperim
