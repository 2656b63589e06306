#pragma once

/**
 * @file io.hpp
 * @brief File formats: plant / manifest / gains / run log / analysis JSON,
 *        and the CSV trajectory, run-log and time-series tables.
 *
 * Mode indices are 1-based in every file and 0-based in memory. Matrices are
 * row-major nested arrays. Doubles are written in shortest round-trip form,
 * so reading a file back reproduces the values bit for bit.
 */

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ddswitch/analysis.hpp"
#include "ddswitch/controller.hpp"
#include "ddswitch/data.hpp"
#include "ddswitch/plant.hpp"
#include "ddswitch/scenario.hpp"
#include "ddswitch/simulate.hpp"

namespace ddswitch {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

/// File could not be opened or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File contents do not match the expected format.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Text helpers

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& where) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end) {
    throw SchemaError(where + ": not a number: '" + s + "'");
  }
  return v;
}

inline long parse_long(const std::string& s, const std::string& where) {
  long v = 0;
  const char* end = s.data() + s.size();
  auto res = std::from_chars(s.data(), end, v);
  if (s.empty() || res.ec != std::errc() || res.ptr != end) {
    throw SchemaError(where + ": not an integer: '" + s + "'");
  }
  return v;
}

inline std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

inline std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

inline json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::parse_error& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

inline void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::vector<std::string> read_lines(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// ---------------------------------------------------------------------------
// JSON field access

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + ": missing field '" + key + "'");
  return *it;
}

inline double as_double(const json& j, const std::string& where) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return parse_double(j.get<std::string>(), where);
  throw SchemaError(where + ": expected a number");
}

inline std::int64_t as_int(const json& j, const std::string& where) {
  if (j.is_number_integer()) return j.get<std::int64_t>();
  if (j.is_number_float()) {
    const double v = j.get<double>();
    if (std::floor(v) == v && std::abs(v) < 9e15) return static_cast<std::int64_t>(v);
  }
  throw SchemaError(where + ": expected an integer");
}

inline std::uint64_t as_u64(const json& j, const std::string& where) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  const std::int64_t v = as_int(j, where);
  if (v < 0) throw SchemaError(where + ": expected a non-negative integer");
  return static_cast<std::uint64_t>(v);
}

inline bool as_bool(const json& j, const std::string& where) {
  if (!j.is_boolean()) throw SchemaError(where + ": expected true/false");
  return j.get<bool>();
}

inline std::string as_string(const json& j, const std::string& where) {
  if (!j.is_string()) throw SchemaError(where + ": expected a string");
  return j.get<std::string>();
}

inline void expect_format(const json& j, const char* format, const std::string& where) {
  if (as_string(field(j, "format", where), where + ".format") != format) {
    throw SchemaError(where + ": expected format '" + std::string(format) + "'");
  }
}

inline json number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline std::size_t mode_from_file(const json& j, std::size_t p, const std::string& where) {
  const std::int64_t v = as_int(j, where);
  if (v < 1 || static_cast<std::size_t>(v) > p) throw SchemaError(where + ": mode index out of range");
  return static_cast<std::size_t>(v - 1);
}

inline json optional_mode(const std::optional<std::size_t>& m) { return m ? json(*m + 1) : json(nullptr); }

}  // namespace detail

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(detail::number(m(i, j)));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows) {
    throw SchemaError(where + ": expected " + std::to_string(rows) + " rows");
  }
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw SchemaError(where + ": row " + std::to_string(i + 1) + " must have " + std::to_string(cols) + " entries");
    }
    for (Eigen::Index c = 0; c < cols; ++c) m(i, c) = detail::as_double(row[static_cast<std::size_t>(c)], where);
  }
  return m;
}

inline json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(detail::number(v(i)));
  return out;
}

inline Vector vector_from_json(const json& j, Eigen::Index size, const std::string& where) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != size) {
    throw SchemaError(where + ": expected " + std::to_string(size) + " entries");
  }
  Vector v(size);
  for (Eigen::Index i = 0; i < size; ++i) v(i) = detail::as_double(j[static_cast<std::size_t>(i)], where);
  return v;
}

// ---------------------------------------------------------------------------
// Scenario configuration

inline json config_to_json(const ScenarioConfig& c) {
  json j;
  j["n"] = c.n;
  j["m"] = c.m;
  j["p"] = c.p;
  j["T_init"] = c.T_init;
  j["lambda"] = c.lambda;
  j["u_max"] = c.u_max;
  if (c.schedule.empty()) {
    j["mean_dwell"] = c.mean_dwell;
  } else {
    json s = json::array();
    for (const auto& [t, mode] : c.schedule) s.push_back(json::array({t, mode + 1}));
    j["schedule"] = s;
  }
  j["horizon"] = c.horizon;
  j["seed"] = c.seed;
  j["seed_violation"] = c.seed_violation;
  j["spectral"] = {{"lo", c.spectral.lo}, {"hi", c.spectral.hi}};
  j["x0_scale"] = c.x0_scale;
  j["init_x0_scale"] = c.init_x0_scale;
  j["init_u_scale"] = c.init_u_scale;
  if (c.mode_seed_override) j["mode_seed_override"] = *c.mode_seed_override;
  return j;
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ScenarioConfig config_from_json(const json& j) {
  const std::string where = "config";
  if (!j.is_object()) throw SchemaError("config: expected an object");
  static const std::set<std::string> known{"n",        "m",       "p",           "T_init",       "lambda",
                                           "u_max",    "mean_dwell", "schedule", "horizon",      "seed",
                                           "seed_violation", "spectral", "x0_scale", "init_x0_scale",
                                           "init_u_scale", "mode_seed_override"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!known.count(it.key())) throw SchemaError("config: unknown field '" + it.key() + "'");
  }
  ScenarioConfig c;
  auto has = [&](const char* k) { return j.contains(k); };
  using namespace detail;
  if (has("n")) c.n = as_int(j["n"], "config.n");
  if (has("m")) c.m = as_int(j["m"], "config.m");
  if (has("p")) {
    const auto p = as_int(j["p"], "config.p");
    if (p < 1) throw SchemaError("config.p: must be >= 1");
    c.p = static_cast<std::size_t>(p);
  }
  if (has("T_init")) c.T_init = as_int(j["T_init"], "config.T_init");
  if (has("lambda")) c.lambda = as_double(j["lambda"], "config.lambda");
  if (has("u_max")) c.u_max = as_double(j["u_max"], "config.u_max");
  if (has("mean_dwell")) c.mean_dwell = as_double(j["mean_dwell"], "config.mean_dwell");
  if (has("schedule")) {
    const json& s = j["schedule"];
    if (!s.is_array()) throw SchemaError("config.schedule: expected an array of [t, mode]");
    for (const auto& e : s) {
      if (!e.is_array() || e.size() != 2) throw SchemaError("config.schedule: expected [t, mode] pairs");
      c.schedule.emplace_back(as_int(e[0], "config.schedule"), mode_from_file(e[1], c.p, "config.schedule"));
    }
  }
  if (has("horizon")) c.horizon = as_int(j["horizon"], "config.horizon");
  if (has("seed")) c.seed = as_u64(j["seed"], "config.seed");
  if (has("seed_violation")) c.seed_violation = as_bool(j["seed_violation"], "config.seed_violation");
  if (has("spectral")) {
    c.spectral.lo = as_double(field(j["spectral"], "lo", "config.spectral"), "config.spectral.lo");
    c.spectral.hi = as_double(field(j["spectral"], "hi", "config.spectral"), "config.spectral.hi");
  }
  if (has("x0_scale")) c.x0_scale = as_double(j["x0_scale"], "config.x0_scale");
  if (has("init_x0_scale")) c.init_x0_scale = as_double(j["init_x0_scale"], "config.init_x0_scale");
  if (has("init_u_scale")) c.init_u_scale = as_double(j["init_u_scale"], "config.init_u_scale");
  if (has("mode_seed_override")) c.mode_seed_override = as_u64(j["mode_seed_override"], "config.mode_seed_override");
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw SchemaError(where + ": " + e.what());
  }
  return c;
}

inline ScenarioConfig read_config(const fs::path& path) { return config_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Plant spec

struct PlantFile {
  ScenarioConfig config;
  SwitchedPlant plant;
  std::uint64_t seed = 0;
};

inline json plant_to_json(const SwitchedPlant& plant, const ScenarioConfig& cfg, std::uint64_t seed) {
  json j;
  j["format"] = "ddswitch.plant";
  j["version"] = 1;
  j["seed"] = seed;
  j["n"] = plant.n();
  j["m"] = plant.m();
  j["p"] = plant.p();
  json modes = json::array();
  for (std::size_t i = 0; i < plant.p(); ++i) {
    modes.push_back({{"index", i + 1}, {"A", matrix_to_json(plant.modes[i].A)}, {"B", matrix_to_json(plant.modes[i].B)}});
  }
  j["modes"] = modes;
  json sig;
  if (cfg.schedule.empty()) {
    sig = {{"type", "adaptive"}, {"mean_dwell", cfg.mean_dwell}};
  } else {
    sig["type"] = "schedule";
    json s = json::array();
    for (const auto& [t, mode] : cfg.schedule) s.push_back(json::array({t, mode + 1}));
    sig["schedule"] = s;
  }
  j["signal"] = sig;
  j["config"] = config_to_json(cfg);
  return j;
}

inline PlantFile plant_from_json(const json& j) {
  const std::string w = "plant";
  detail::expect_format(j, "ddswitch.plant", w);
  PlantFile pf;
  pf.config = config_from_json(detail::field(j, "config", w));
  pf.seed = detail::as_u64(detail::field(j, "seed", w), "plant.seed");
  const auto n = detail::as_int(detail::field(j, "n", w), "plant.n");
  const auto m = detail::as_int(detail::field(j, "m", w), "plant.m");
  const auto p = detail::as_int(detail::field(j, "p", w), "plant.p");
  if (n != pf.config.n || m != pf.config.m || p != static_cast<std::int64_t>(pf.config.p)) {
    throw SchemaError("plant: dimensions disagree with the embedded config");
  }
  const json& modes = detail::field(j, "modes", w);
  if (!modes.is_array() || static_cast<std::int64_t>(modes.size()) != p) {
    throw SchemaError("plant.modes: expected " + std::to_string(p) + " entries");
  }
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string mw = "plant.modes[" + std::to_string(i + 1) + "]";
    if (detail::mode_from_file(detail::field(modes[i], "index", mw), pf.config.p, mw) != i) {
      throw SchemaError(mw + ": modes must be listed in index order");
    }
    pf.plant.modes.push_back({matrix_from_json(detail::field(modes[i], "A", mw), n, n, mw + ".A"),
                              matrix_from_json(detail::field(modes[i], "B", mw), n, m, mw + ".B")});
  }
  const json& sig = detail::field(j, "signal", w);
  const std::string type = detail::as_string(detail::field(sig, "type", "plant.signal"), "plant.signal.type");
  if (type == "adaptive") {
    pf.config.schedule.clear();
    pf.config.mean_dwell = detail::as_double(detail::field(sig, "mean_dwell", "plant.signal"), "plant.signal");
  } else if (type == "schedule") {
    pf.config.schedule.clear();
    for (const auto& e : detail::field(sig, "schedule", "plant.signal")) {
      if (!e.is_array() || e.size() != 2) throw SchemaError("plant.signal.schedule: expected [t, mode] pairs");
      pf.config.schedule.emplace_back(detail::as_int(e[0], "plant.signal.schedule"),
                                      detail::mode_from_file(e[1], pf.config.p, "plant.signal.schedule"));
    }
  } else {
    throw SchemaError("plant.signal.type: expected 'adaptive' or 'schedule'");
  }
  try {
    pf.plant.validate();
    pf.config.validate();
  } catch (const std::exception& e) {
    throw SchemaError(std::string("plant: ") + e.what());
  }
  return pf;
}

inline void write_plant(const fs::path& path, const SwitchedPlant& plant, const ScenarioConfig& cfg,
                        std::uint64_t seed) {
  write_json(path, plant_to_json(plant, cfg, seed));
}

inline PlantFile read_plant(const fs::path& path) { return plant_from_json(read_json(path)); }

// ---------------------------------------------------------------------------
// Trajectory CSV: t,x1..xn,u1..um (inputs empty on the last row)

inline std::string trajectory_csv(const DataMatrices& d) {
  std::ostringstream out;
  out << "t";
  for (Eigen::Index i = 0; i < d.n(); ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < d.m(); ++i) out << ",u" << i + 1;
  out << "\n";
  for (Eigen::Index t = 0; t <= d.T(); ++t) {
    out << t;
    for (Eigen::Index i = 0; i < d.n(); ++i) out << ',' << format_double(d.X()(i, t));
    for (Eigen::Index i = 0; i < d.m(); ++i) {
      out << ',';
      if (t < d.T()) out << format_double(d.U_minus()(i, t));
    }
    out << "\n";
  }
  return out.str();
}

inline DataMatrices trajectory_from_csv(const std::vector<std::string>& lines, const std::string& where) {
  if (lines.empty()) throw SchemaError(where + ": empty file");
  const auto header = split(lines.front(), ',');
  if (header.empty() || header.front() != "t") throw SchemaError(where + ": header must start with 't'");
  Eigen::Index n = 0;
  Eigen::Index m = 0;
  for (std::size_t c = 1; c < header.size(); ++c) {
    const std::string expect_x = "x" + std::to_string(n + 1);
    const std::string expect_u = "u" + std::to_string(m + 1);
    if (m == 0 && header[c] == expect_x) {
      ++n;
    } else if (header[c] == expect_u) {
      ++m;
    } else {
      throw SchemaError(where + ": unexpected column '" + header[c] + "'");
    }
  }
  if (n == 0) throw SchemaError(where + ": no state columns");
  std::vector<std::string> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (!lines[i].empty()) rows.push_back(lines[i]);
  }
  if (rows.empty()) throw SchemaError(where + ": no samples");
  const auto T = static_cast<Eigen::Index>(rows.size()) - 1;
  Matrix x(n, T + 1);
  Matrix u(m, T);
  for (Eigen::Index t = 0; t <= T; ++t) {
    const auto cells = split(rows[static_cast<std::size_t>(t)], ',');
    const std::string rw = where + " row " + std::to_string(t + 1);
    if (static_cast<Eigen::Index>(cells.size()) != 1 + n + m) throw SchemaError(rw + ": wrong column count");
    if (parse_long(cells[0], rw) != t) throw SchemaError(rw + ": t must count up from 0");
    for (Eigen::Index i = 0; i < n; ++i) x(i, t) = parse_double(cells[static_cast<std::size_t>(1 + i)], rw);
    for (Eigen::Index i = 0; i < m; ++i) {
      const std::string& cell = cells[static_cast<std::size_t>(1 + n + i)];
      if (t == T) {
        if (!cell.empty()) throw SchemaError(rw + ": inputs must be empty on the last row");
      } else {
        u(i, t) = parse_double(cell, rw);
      }
    }
  }
  try {
    return DataMatrices(std::move(x), std::move(u));
  } catch (const std::exception& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline void write_trajectory(const fs::path& path, const DataMatrices& d) { write_text(path, trajectory_csv(d)); }

inline DataMatrices read_trajectory(const fs::path& path) {
  return trajectory_from_csv(read_lines(path), path.string());
}

// ---------------------------------------------------------------------------
// Manifest: mode index -> trajectory file

inline std::string mode_file_name(std::size_t mode) { return "mode_" + std::to_string(mode + 1) + ".csv"; }

/// Writes plant.json, mode_<i>.csv and manifest.json into dir.
inline void write_generated(const fs::path& dir, const GeneratedScenario& g, const ScenarioConfig& cfg,
                            std::uint64_t seed) {
  write_plant(dir / "plant.json", g.plant, cfg, seed);
  json j;
  j["format"] = "ddswitch.manifest";
  j["version"] = 1;
  j["seed"] = seed;
  j["n"] = g.plant.n();
  j["m"] = g.plant.m();
  j["p"] = g.plant.p();
  j["T_init"] = cfg.T_init;
  j["plant"] = "plant.json";
  json modes = json::array();
  for (std::size_t i = 0; i < g.init.size(); ++i) {
    write_trajectory(dir / mode_file_name(i), g.init[i]);
    modes.push_back({{"index", i + 1}, {"file", mode_file_name(i)}, {"T", g.init[i].T()}});
  }
  j["modes"] = modes;
  write_json(dir / "manifest.json", j);
}

struct Manifest {
  std::uint64_t seed = 0;
  std::vector<DataMatrices> data;
  /// Plant spec path, resolved against the manifest directory.
  fs::path plant;
};

inline Manifest read_manifest(const fs::path& path) {
  const json j = read_json(path);
  const std::string w = path.string();
  detail::expect_format(j, "ddswitch.manifest", w);
  Manifest out;
  out.seed = detail::as_u64(detail::field(j, "seed", w), w + ".seed");
  const auto n = detail::as_int(detail::field(j, "n", w), w + ".n");
  const auto m = detail::as_int(detail::field(j, "m", w), w + ".m");
  const fs::path base = path.parent_path();
  if (j.contains("plant")) out.plant = base / detail::as_string(j["plant"], w + ".plant");
  const json& modes = detail::field(j, "modes", w);
  if (!modes.is_array() || modes.empty()) throw SchemaError(w + ".modes: expected a non-empty array");
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string mw = w + ".modes[" + std::to_string(i + 1) + "]";
    if (detail::mode_from_file(detail::field(modes[i], "index", mw), modes.size(), mw) != i) {
      throw SchemaError(mw + ": modes must be listed in index order");
    }
    DataMatrices d = read_trajectory(base / detail::as_string(detail::field(modes[i], "file", mw), mw + ".file"));
    if (d.n() != n || d.m() != m) throw SchemaError(mw + ": trajectory dimensions disagree with the manifest");
    out.data.push_back(std::move(d));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gains: one certified (K, P) per mode

inline json gains_to_json(const ModeLibrary& lib, std::uint64_t seed, const std::string& manifest = "manifest.json") {
  json j;
  j["format"] = "ddswitch.gains";
  j["version"] = 1;
  j["seed"] = seed;
  j["lambda"] = lib.lambda;
  j["manifest"] = manifest;
  json modes = json::array();
  for (std::size_t i = 0; i < lib.p(); ++i) {
    modes.push_back({{"index", i + 1}, {"K", matrix_to_json(lib.modes[i].K)}, {"P", matrix_to_json(lib.modes[i].P)}});
  }
  j["modes"] = modes;
  return j;
}

/// Rebuilds the library from gains.json and the manifest it names.
inline ModeLibrary read_library(const fs::path& gains_path) {
  const json j = read_json(gains_path);
  const std::string w = gains_path.string();
  detail::expect_format(j, "ddswitch.gains", w);
  const Manifest man =
      read_manifest(gains_path.parent_path() / detail::as_string(detail::field(j, "manifest", w), w + ".manifest"));
  ModeLibrary lib;
  lib.lambda = detail::as_double(detail::field(j, "lambda", w), w + ".lambda");
  const json& modes = detail::field(j, "modes", w);
  if (!modes.is_array() || modes.size() != man.data.size()) {
    throw SchemaError(w + ".modes: expected one entry per manifest mode");
  }
  for (std::size_t i = 0; i < modes.size(); ++i) {
    const std::string mw = w + ".modes[" + std::to_string(i + 1) + "]";
    if (detail::mode_from_file(detail::field(modes[i], "index", mw), modes.size(), mw) != i) {
      throw SchemaError(mw + ": modes must be listed in index order");
    }
    const auto n = man.data[i].n();
    const auto m = man.data[i].m();
    lib.modes.push_back({man.data[i], matrix_from_json(detail::field(modes[i], "K", mw), m, n, mw + ".K"),
                         matrix_from_json(detail::field(modes[i], "P", mw), n, n, mw + ".P")});
  }
  try {
    lib.validate();
  } catch (const std::exception& e) {
    throw SchemaError(w + ": " + e.what());
  }
  return lib;
}

// ---------------------------------------------------------------------------
// Controller state snapshot

inline json controller_state_to_json(const ControllerState& s) {
  json j;
  j["format"] = "ddswitch.controller_state";
  j["version"] = 1;
  j["phase"] = to_string(s.phase);
  j["sigma_d"] = detail::optional_mode(s.sigma_d);
  j["u_max"] = s.det.u_max;
  j["n"] = s.det.online.n();
  j["m"] = s.det.online.m();
  j["online_X"] = matrix_to_json(s.det.online.X());
  j["online_U"] = matrix_to_json(s.det.online.U_minus());
  json ms = json::array();
  for (std::size_t i : s.det.matches.remaining()) ms.push_back(i + 1);
  j["matches"] = ms;
  return j;
}

inline Phase phase_from_string(const std::string& s, const std::string& where) {
  if (s == to_string(Phase::Detect)) return Phase::Detect;
  if (s == to_string(Phase::Stabilize)) return Phase::Stabilize;
  throw SchemaError(where + ": unknown phase '" + s + "'");
}

/// p bounds the mode indices.
inline ControllerState controller_state_from_json(const json& j, std::size_t p) {
  const std::string w = "controller_state";
  detail::expect_format(j, "ddswitch.controller_state", w);
  ControllerState s;
  s.phase = phase_from_string(detail::as_string(detail::field(j, "phase", w), w), w + ".phase");
  const json& sd = detail::field(j, "sigma_d", w);
  if (!sd.is_null()) s.sigma_d = detail::mode_from_file(sd, p, w + ".sigma_d");
  if (s.phase == Phase::Stabilize && !s.sigma_d) throw SchemaError(w + ": stabilize phase needs sigma_d");
  s.det.u_max = detail::as_double(detail::field(j, "u_max", w), w + ".u_max");
  const auto n = detail::as_int(detail::field(j, "n", w), w + ".n");
  const auto m = detail::as_int(detail::field(j, "m", w), w + ".m");
  const json& xj = detail::field(j, "online_X", w);
  const json& uj = detail::field(j, "online_U", w);
  const auto cols = xj.is_array() && !xj.empty() && xj[0].is_array() ? static_cast<Eigen::Index>(xj[0].size()) : 0;
  try {
    s.det.online = DataMatrices(matrix_from_json(xj, n, cols, w + ".online_X"),
                                matrix_from_json(uj, m, cols - 1, w + ".online_U"));
  } catch (const DimensionError& e) {
    throw SchemaError(w + ": " + e.what());
  }
  std::vector<std::size_t> ms;
  for (const auto& e : detail::field(j, "matches", w)) ms.push_back(detail::mode_from_file(e, p, w + ".matches"));
  s.det.matches = MatchSet(std::move(ms));
  return s;
}

// ---------------------------------------------------------------------------
// Run log: CSV rows plus a JSON sidecar for events

inline std::string matches_cell(const MatchSet& ms) {
  std::string out;
  for (std::size_t i : ms.remaining()) {
    if (!out.empty()) out += ' ';
    out += std::to_string(i + 1);
  }
  return out;
}

/// Columns: t,phase,sigma_true,sigma_d,V,triggered,matches,x1..xn,u1..um
inline std::string runlog_csv(const RunLog& log) {
  std::ostringstream out;
  out << "t,phase,sigma_true,sigma_d,V,triggered,matches";
  for (Eigen::Index i = 0; i < log.n; ++i) out << ",x" << i + 1;
  for (Eigen::Index i = 0; i < log.m; ++i) out << ",u" << i + 1;
  out << "\n";
  for (const auto& r : log.steps) {
    out << r.t << ',' << to_string(r.phase) << ',' << r.sigma_true + 1 << ',';
    if (r.sigma_d) out << *r.sigma_d + 1;
    out << ',';
    if (r.V) out << format_double(*r.V);
    out << ',' << (r.triggered ? 1 : 0) << ',';
    if (r.phase == Phase::Detect) out << matches_cell(r.matches);
    for (Eigen::Index i = 0; i < log.n; ++i) out << ',' << format_double(r.x(i));
    for (Eigen::Index i = 0; i < log.m; ++i) out << ',' << format_double(r.u(i));
    out << "\n";
  }
  return out.str();
}

inline std::string runlog_file_stem(std::uint64_t seed) { return "runlog_" + std::to_string(seed); }

inline json runlog_sidecar(const RunLog& log, double u_max, const std::string& csv_name) {
  auto modes = [](const std::vector<std::size_t>& v) {
    json a = json::array();
    for (std::size_t i : v) a.push_back(i + 1);
    return a;
  };
  json j;
  j["format"] = "ddswitch.runlog";
  j["version"] = 1;
  j["seed"] = log.seed;
  j["reset_policy"] = log.seed_violation ? "seed_violation" : "fresh";
  j["u_max"] = u_max;
  j["n"] = log.n;
  j["m"] = log.m;
  j["horizon"] = log.horizon();
  j["status"] = to_string(log.status);
  j["error"] = log.error;
  j["csv"] = csv_name;
  j["events"] = {{"detect_starts", log.detect_starts},
                 {"stabilize_starts", log.stabilize_starts},
                 {"resolved_modes", modes(log.resolved_modes)}};
  j["final"] = {{"phase", to_string(log.final_phase)},
                {"sigma_d", detail::optional_mode(log.final_sigma_d)},
                {"x", vector_to_json(log.x_final)}};
  return j;
}

/// Writes runlog_<seed>.csv and runlog_<seed>.json into dir; returns the JSON path.
inline fs::path write_runlog(const fs::path& dir, const RunLog& log, double u_max) {
  const std::string stem = runlog_file_stem(log.seed);
  write_text(dir / (stem + ".csv"), runlog_csv(log));
  write_json(dir / (stem + ".json"), runlog_sidecar(log, u_max, stem + ".csv"));
  return dir / (stem + ".json");
}

struct RunLogFile {
  RunLog log;
  double u_max = 1.0;
};

inline RunStatus run_status_from_string(const std::string& s, const std::string& where) {
  for (RunStatus r : {RunStatus::Ok, RunStatus::EmptyMatchSet, RunStatus::NoExcitation}) {
    if (s == to_string(r)) return r;
  }
  throw SchemaError(where + ": unknown status '" + s + "'");
}

/// p bounds the mode indices.
inline RunLogFile read_runlog(const fs::path& json_path, std::size_t p) {
  const json j = read_json(json_path);
  const std::string w = json_path.string();
  using namespace detail;
  expect_format(j, "ddswitch.runlog", w);
  RunLogFile f;
  RunLog& log = f.log;
  log.seed = as_u64(field(j, "seed", w), w + ".seed");
  const std::string policy = as_string(field(j, "reset_policy", w), w + ".reset_policy");
  if (policy != "fresh" && policy != "seed_violation") throw SchemaError(w + ".reset_policy: unknown value");
  log.seed_violation = policy == "seed_violation";
  f.u_max = as_double(field(j, "u_max", w), w + ".u_max");
  log.n = as_int(field(j, "n", w), w + ".n");
  log.m = as_int(field(j, "m", w), w + ".m");
  const auto horizon = as_int(field(j, "horizon", w), w + ".horizon");
  log.status = run_status_from_string(as_string(field(j, "status", w), w), w + ".status");
  log.error = as_string(field(j, "error", w), w + ".error");
  const json& ev = field(j, "events", w);
  for (const auto& e : field(ev, "detect_starts", w)) log.detect_starts.push_back(as_int(e, w + ".detect_starts"));
  for (const auto& e : field(ev, "stabilize_starts", w)) {
    log.stabilize_starts.push_back(as_int(e, w + ".stabilize_starts"));
  }
  for (const auto& e : field(ev, "resolved_modes", w)) log.resolved_modes.push_back(mode_from_file(e, p, w));
  const json& fin = field(j, "final", w);
  log.final_phase = phase_from_string(as_string(field(fin, "phase", w), w), w + ".final.phase");
  const json& fsd = field(fin, "sigma_d", w);
  if (!fsd.is_null()) log.final_sigma_d = mode_from_file(fsd, p, w + ".final.sigma_d");
  log.x_final = vector_from_json(field(fin, "x", w), log.n, w + ".final.x");

  const fs::path csv = json_path.parent_path() / as_string(field(j, "csv", w), w + ".csv");
  const auto lines = read_lines(csv);
  const std::string cw = csv.string();
  if (lines.empty()) throw SchemaError(cw + ": empty file");
  std::string header = "t,phase,sigma_true,sigma_d,V,triggered,matches";
  for (Eigen::Index i = 0; i < log.n; ++i) header += ",x" + std::to_string(i + 1);
  for (Eigen::Index i = 0; i < log.m; ++i) header += ",u" + std::to_string(i + 1);
  if (lines.front() != header) throw SchemaError(cw + ": unexpected header");
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    const std::string rw = cw + " row " + std::to_string(li);
    const auto cells = split(lines[li], ',');
    if (static_cast<Eigen::Index>(cells.size()) != 7 + log.n + log.m) throw SchemaError(rw + ": wrong column count");
    StepRecord r;
    r.t = parse_long(cells[0], rw);
    if (r.t != log.horizon()) throw SchemaError(rw + ": t must count up from 0");
    r.phase = phase_from_string(cells[1], rw);
    r.sigma_true = mode_from_file(json(parse_long(cells[2], rw)), p, rw);
    if (!cells[3].empty()) r.sigma_d = mode_from_file(json(parse_long(cells[3], rw)), p, rw);
    if (!cells[4].empty()) r.V = parse_double(cells[4], rw);
    if (cells[5] != "0" && cells[5] != "1") throw SchemaError(rw + ": triggered must be 0 or 1");
    r.triggered = cells[5] == "1";
    std::vector<std::size_t> ms;
    for (const auto& tok : split(cells[6], ' ')) {
      if (!tok.empty()) ms.push_back(mode_from_file(json(parse_long(tok, rw)), p, rw));
    }
    r.matches = MatchSet(std::move(ms));
    r.x.resize(log.n);
    r.u.resize(log.m);
    for (Eigen::Index i = 0; i < log.n; ++i) r.x(i) = parse_double(cells[static_cast<std::size_t>(7 + i)], rw);
    for (Eigen::Index i = 0; i < log.m; ++i) {
      r.u(i) = parse_double(cells[static_cast<std::size_t>(7 + log.n + i)], rw);
    }
    log.steps.push_back(std::move(r));
  }
  if (log.horizon() != horizon) throw SchemaError(w + ": horizon disagrees with the CSV row count");
  return f;
}

// ---------------------------------------------------------------------------
// Analysis report

inline json analysis_to_json(const AnalysisReport& rep, std::uint64_t seed) {
  const StabilityParams& p = rep.params;
  const CertificateReport& c = rep.certificate;
  json j;
  j["format"] = "ddswitch.analysis";
  j["version"] = 1;
  j["seed"] = seed;
  j["params"] = {{"lambda", p.lambda}, {"lambda_u", p.lambda_u},     {"k", p.k},
                 {"mu", p.mu},         {"u_max", p.u_max},           {"lambda_bar", p.lambda_bar},
                 {"lambda_under", p.lambda_under}};
  j["fit"] = {{"tau", p.tau}, {"N0", p.N0}, {"eta", p.eta}, {"T0", p.T0}};
  j["condition"] = {{"value", rep.selection.condition.lhs},
                    {"holds", rep.selection.condition.holds},
                    {"margin", rep.selection.condition.margin()}};
  j["derived"] = {{"a", detail::number(p.a())}, {"b", detail::number(p.b())},         {"r", detail::number(p.r())},
                  {"c", detail::number(p.c())}, {"zeta", detail::number(p.zeta())}};
  if (p.a() < 1.0) j["derived"]["r_const"] = detail::number(p.r_const());
  json adt = json::array();
  for (const auto& f : rep.adt_curve) adt.push_back({{"tau", f.tau}, {"N0", f.N0}});
  json aat = json::array();
  for (const auto& f : rep.aat_curve) aat.push_back({{"eta", f.eta}, {"T0", f.T0}});
  j["curves"] = {{"adt", adt}, {"aat", aat}};
  j["certificate"] = {{"holds", c.holds()},
                      {"all_cases_exercised", c.all_cases_exercised()},
                      {"case_counts", c.case_counts},
                      {"case_violations", c.case_violations},
                      {"violation_steps", c.violations}};
  j["violations"] = {{"certificate", c.violations.size()},
                     {"counting", rep.counting_violations},
                     {"U_range", c.U_range_violations},
                     {"chain", c.chain_violations},
                     {"lower_bound", c.lower_bound_violations},
                     {"bound", rep.bound_violations}};
  j["bound_available"] = !rep.bound.empty();
  return j;
}

/// Columns: t,x_norm,bound,W,log_W,tau_d,tau_a (bound empty when a >= 1).
inline std::string analysis_csv(const AnalysisReport& rep) {
  std::ostringstream out;
  out << "t,x_norm,bound,W,log_W,tau_d,tau_a\n";
  for (std::size_t t = 0; t < rep.x_norm.size(); ++t) {
    out << t << ',' << format_double(rep.x_norm[t]) << ',';
    if (t < rep.bound.size()) out << format_double(rep.bound[t]);
    const double lw = rep.certificate.log_W[t];
    out << ',' << format_double(std::exp(lw)) << ',' << format_double(lw) << ','
        << format_double(rep.timers.tau_d[t]) << ',' << format_double(rep.timers.tau_a[t]) << "\n";
  }
  return out.str();
}

}  // namespace ddswitch
