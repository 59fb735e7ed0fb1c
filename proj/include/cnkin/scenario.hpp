#pragma once

// Scenario configuration: a JSON document with a fixed key set. Loading
// validates every field against the module preconditions and the modelling
// assumptions (A1 time-integrable source, A2 nonnegative data, A3 integrable
// initial spectrum, A4 finite integrated source).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cnkin/errors.hpp"
#include "cnkin/kernel.hpp"
#include "cnkin/operators.hpp"
#include "cnkin/source.hpp"
#include "cnkin/spectrum.hpp"
#include "cnkin/time_integration.hpp"

namespace cnkin {

inline constexpr const char* kVersion = "0.1.0";

/// Malformed configuration document.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ScenarioConfig {
  struct Grid {
    double omega_max = 40.0;
    std::size_t n = 2001;
    bool operator==(const Grid&) const = default;
  } grid;

  struct Initial {
    std::string family = "exp";
    double amplitude = 1.0;
    double rate = 1.0;
    std::string path;
    bool operator==(const Initial&) const = default;
  } initial;

  struct Source {
    std::string family = "zero";
    double amplitude = 0.0;
    double rate = 1.0;
    std::string profile = "constant";
    double c = 1.0;
    double sigma = 0.0;
    std::string path;
    bool operator==(const Source&) const = default;
  } source;

  struct KernelSpec {
    std::string mode = "constant";
    double a = 0.0;
    double b = 0.0;
    bool operator==(const KernelSpec&) const = default;
  } kernel;

  std::string rhs = "eq2";

  struct Time {
    double t_end = 1.0;
    double dt = 1e-3;
    double dt_min = 1e-9;
    double blowup_threshold = 1e6;
    std::size_t store_every = 1;
    bool clamp_negative = true;
    bool operator==(const Time&) const = default;
  } time;

  struct Kappa {
    std::string mode = "fit";  // nominal | fit | explicit
    double value = 0.0;
    bool operator==(const Kappa&) const = default;
  } kappa;

  struct Picard {
    double a = 0.0;
    std::optional<double> b;  // empty means "auto"
    double tol = 1e-8;
    std::size_t max_iter = 25;
    std::size_t time_nodes = 401;
    bool operator==(const Picard&) const = default;
  } picard;

  std::string horizon_advance = "mol";
  double tail_tolerance = 1e-8;

  // Directory that relative tabulated paths resolve against; not serialized.
  std::filesystem::path base_dir;

  bool operator==(const ScenarioConfig& o) const {
    return grid == o.grid && initial == o.initial && source == o.source && kernel == o.kernel &&
           rhs == o.rhs && time == o.time && kappa == o.kappa && picard == o.picard &&
           horizon_advance == o.horizon_advance && tail_tolerance == o.tail_tolerance;
  }
};

namespace detail {

using nlohmann::json;

inline void reject_unknown(const json& obj, const std::string& where,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ParseError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!ok.count(it.key())) throw ValidationError(where + ": unknown key '" + it.key() + "'");
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& where) {
  if (!obj.contains(key)) return;
  try {
    out = obj.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParseError(where + "." + key + ": wrong type");
  }
}

inline void read_count(const json& obj, const char* key, std::size_t& out, const std::string& where) {
  if (!obj.contains(key)) return;
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ParseError(where + "." + key + ": expected a number");
  const double d = v.get<double>();
  if (!(d >= 0.0) || d != std::floor(d)) throw ValidationError(where + "." + key + ": expected a nonnegative integer");
  out = static_cast<std::size_t>(d);
}

// Rows of numbers from a CSV file; lines starting with '#' or with a
// non-numeric first field are skipped.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open tabulated file " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cell, &used));
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (numeric && !row.empty()) rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

inline std::filesystem::path resolve_path(const ScenarioConfig& cfg, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() || cfg.base_dir.empty() ? path : cfg.base_dir / path;
}

inline nlohmann::json to_json(const ScenarioConfig& c) {
  nlohmann::json j;
  j["grid"] = {{"omega_max", c.grid.omega_max}, {"n", c.grid.n}};
  j["initial"] = {{"family", c.initial.family}, {"amplitude", c.initial.amplitude},
                  {"rate", c.initial.rate}, {"path", c.initial.path}};
  j["source"] = {{"family", c.source.family}, {"amplitude", c.source.amplitude},
                 {"rate", c.source.rate},     {"profile", c.source.profile},
                 {"c", c.source.c},           {"sigma", c.source.sigma},
                 {"path", c.source.path}};
  j["kernel"] = {{"mode", c.kernel.mode}, {"a", c.kernel.a}, {"b", c.kernel.b}};
  j["rhs"] = c.rhs;
  j["time"] = {{"t_end", c.time.t_end},
               {"dt", c.time.dt},
               {"dt_min", c.time.dt_min},
               {"blowup_threshold", c.time.blowup_threshold},
               {"store_every", c.time.store_every},
               {"clamp_negative", c.time.clamp_negative}};
  if (c.kappa.mode == "explicit")
    j["kappa"] = c.kappa.value;
  else
    j["kappa"] = c.kappa.mode;
  j["picard"] = {{"a", c.picard.a},
                 {"tol", c.picard.tol},
                 {"max_iter", c.picard.max_iter},
                 {"time_nodes", c.picard.time_nodes}};
  if (c.picard.b)
    j["picard"]["b"] = *c.picard.b;
  else
    j["picard"]["b"] = "auto";
  j["horizon_advance"] = c.horizon_advance;
  j["tail_tolerance"] = c.tail_tolerance;
  return j;
}

inline std::string serialize_config(const ScenarioConfig& c) { return to_json(c).dump(2); }

/// FNV-1a over the compact serialized form.
inline std::string config_hash(const ScenarioConfig& c) {
  const std::string text = to_json(c).dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline void validate_config(const ScenarioConfig& c);

inline ScenarioConfig parse_config(const std::string& text, std::filesystem::path base_dir = {}) {
  using detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("config: malformed document: ") + e.what());
  }
  detail::reject_unknown(doc, "config",
                         {"grid", "initial", "source", "kernel", "rhs", "time", "kappa", "picard",
                          "horizon_advance", "tail_tolerance"});
  ScenarioConfig c;
  c.base_dir = std::move(base_dir);

  if (doc.contains("grid")) {
    const auto& g = doc["grid"];
    detail::reject_unknown(g, "grid", {"omega_max", "n"});
    detail::read(g, "omega_max", c.grid.omega_max, "grid");
    detail::read_count(g, "n", c.grid.n, "grid");
  }
  if (doc.contains("initial")) {
    const auto& s = doc["initial"];
    detail::reject_unknown(s, "initial", {"family", "amplitude", "rate", "path"});
    detail::read(s, "family", c.initial.family, "initial");
    detail::read(s, "amplitude", c.initial.amplitude, "initial");
    detail::read(s, "rate", c.initial.rate, "initial");
    detail::read(s, "path", c.initial.path, "initial");
  }
  if (doc.contains("source")) {
    const auto& s = doc["source"];
    detail::reject_unknown(s, "source", {"family", "amplitude", "rate", "profile", "c", "sigma", "path"});
    detail::read(s, "family", c.source.family, "source");
    detail::read(s, "amplitude", c.source.amplitude, "source");
    detail::read(s, "rate", c.source.rate, "source");
    detail::read(s, "profile", c.source.profile, "source");
    detail::read(s, "c", c.source.c, "source");
    detail::read(s, "sigma", c.source.sigma, "source");
    detail::read(s, "path", c.source.path, "source");
  }
  if (doc.contains("kernel")) {
    const auto& k = doc["kernel"];
    detail::reject_unknown(k, "kernel", {"mode", "a", "b"});
    detail::read(k, "mode", c.kernel.mode, "kernel");
    detail::read(k, "a", c.kernel.a, "kernel");
    detail::read(k, "b", c.kernel.b, "kernel");
  }
  detail::read(doc, "rhs", c.rhs, "config");
  if (doc.contains("time")) {
    const auto& t = doc["time"];
    detail::reject_unknown(t, "time",
                           {"t_end", "dt", "dt_min", "blowup_threshold", "store_every", "clamp_negative"});
    detail::read(t, "t_end", c.time.t_end, "time");
    detail::read(t, "dt", c.time.dt, "time");
    detail::read(t, "dt_min", c.time.dt_min, "time");
    detail::read(t, "blowup_threshold", c.time.blowup_threshold, "time");
    detail::read_count(t, "store_every", c.time.store_every, "time");
    detail::read(t, "clamp_negative", c.time.clamp_negative, "time");
  }
  if (doc.contains("kappa")) {
    const auto& k = doc["kappa"];
    if (k.is_number()) {
      c.kappa.mode = "explicit";
      c.kappa.value = k.get<double>();
    } else if (k.is_string()) {
      c.kappa.mode = k.get<std::string>();
      if (c.kappa.mode != "nominal" && c.kappa.mode != "fit")
        throw ValidationError("kappa: expected \"nominal\", \"fit\" or a number");
    } else {
      throw ParseError("kappa: expected a string or a number");
    }
  }
  if (doc.contains("picard")) {
    const auto& p = doc["picard"];
    detail::reject_unknown(p, "picard", {"a", "b", "tol", "max_iter", "time_nodes"});
    detail::read(p, "a", c.picard.a, "picard");
    if (p.contains("b")) {
      if (p["b"].is_string()) {
        if (p["b"].get<std::string>() != "auto") throw ValidationError("picard.b: expected \"auto\" or a number");
      } else if (p["b"].is_number()) {
        c.picard.b = p["b"].get<double>();
      } else {
        throw ParseError("picard.b: expected \"auto\" or a number");
      }
    }
    detail::read(p, "tol", c.picard.tol, "picard");
    detail::read_count(p, "max_iter", c.picard.max_iter, "picard");
    detail::read_count(p, "time_nodes", c.picard.time_nodes, "picard");
  }
  detail::read(doc, "horizon_advance", c.horizon_advance, "config");
  detail::read(doc, "tail_tolerance", c.tail_tolerance, "config");

  validate_config(c);
  return c;
}

inline ScenarioConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.parent_path());
}

inline GridPtr make_grid(const ScenarioConfig& c) { return make_grid(c.grid.omega_max, c.grid.n); }

inline Kernel make_kernel(const ScenarioConfig& c) {
  if (c.kernel.mode == "constant") return Kernel::constant();
  if (c.kernel.mode == "power") return Kernel::power_law(c.kernel.a, c.kernel.b);
  throw ValidationError("kernel: mode must be \"constant\" or \"power\"");
}

inline Spectrum make_initial(const ScenarioConfig& c, GridPtr grid) {
  if (c.initial.family == "exp") {
    detail::require(std::isfinite(c.initial.amplitude) && c.initial.amplitude >= 0.0,
                    "A2: negative initial amplitude");
    detail::require(std::isfinite(c.initial.rate) && c.initial.rate > 0.0,
                    "A3: initial rate must be positive for an integrable spectrum");
    return exponential_spectrum(std::move(grid), c.initial.amplitude, c.initial.rate);
  }
  if (c.initial.family == "tabulated") {
    const auto rows = detail::read_numeric_csv(resolve_path(c, c.initial.path));
    detail::require(rows.size() >= 2, "initial: tabulated spectrum needs at least two rows");
    std::vector<double> om, val;
    for (const auto& r : rows) {
      detail::require(r.size() >= 2, "initial: tabulated rows need omega,N");
      detail::require(std::isfinite(r[1]), "A3: tabulated initial value is not finite");
      detail::require(r[1] >= 0.0, "A2: tabulated initial spectrum has a negative value");
      if (!om.empty()) detail::require(r[0] > om.back(), "initial: tabulated omega must increase");
      om.push_back(r[0]);
      val.push_back(r[1]);
    }
    std::vector<double> v(grid->n, 0.0);
    for (std::size_t i = 0; i < grid->n; ++i) {
      const double w = grid->nodes[i];
      if (w < om.front() || w > om.back()) continue;
      auto it = std::lower_bound(om.begin(), om.end(), w);
      const auto k = static_cast<std::size_t>(it - om.begin());
      if (om[k] == w) {
        v[i] = val[k];
      } else {
        const double s = (w - om[k - 1]) / (om[k] - om[k - 1]);
        v[i] = val[k - 1] + s * (val[k] - val[k - 1]);
      }
    }
    return Spectrum{std::move(grid), std::move(v), 0.0};
  }
  throw ValidationError("initial: family must be \"exp\" or \"tabulated\"");
}

inline SourceTerm make_source(const ScenarioConfig& c, const FrequencyGrid& grid) {
  if (c.source.family == "zero") return SourceTerm::zero();
  if (c.source.family == "separable") {
    TimeProfile prof;
    if (c.source.profile == "constant") {
      prof = {TimeProfile::Kind::constant, c.source.c, 0.0};
    } else if (c.source.profile == "exp_decay") {
      prof = {TimeProfile::Kind::exp_decay, 1.0, c.source.sigma};
    } else {
      throw ValidationError("source: profile must be \"constant\" or \"exp_decay\"");
    }
    return SourceTerm::separable(c.source.amplitude, c.source.rate, prof);
  }
  if (c.source.family == "tabulated") {
    const auto rows = detail::read_numeric_csv(resolve_path(c, c.source.path));
    detail::require(!rows.empty(), "source: tabulated file has no rows");
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    for (const auto& r : rows) {
      detail::require(r.size() == grid.n + 1, "source: tabulated rows need t followed by one value per node");
      times.push_back(r[0]);
      values.emplace_back(r.begin() + 1, r.end());
    }
    auto src = SourceTerm::tabulated(std::move(times), std::move(values));
    for (const auto& row : src.rows())
      detail::require(std::isfinite(integrate_full(row, grid)), "A4: integrated source is not finite");
    return src;
  }
  throw ValidationError("source: family must be \"zero\", \"separable\" or \"tabulated\"");
}

inline StepControls make_step_controls(const ScenarioConfig& c) {
  StepControls s;
  s.dt = c.time.dt;
  s.dt_min = c.time.dt_min;
  s.t_end = c.time.t_end;
  s.blowup_threshold = c.time.blowup_threshold;
  s.store_every = c.time.store_every;
  s.clamp_negative = c.time.clamp_negative;
  return s;
}

inline RhsModel make_model(const ScenarioConfig& c, const FrequencyGrid& grid) {
  return RhsModel{parse_governing_form(c.rhs), make_kernel(c), make_source(c, grid)};
}

/// Fraction of the initial mass carried beyond omega_max / 2.
inline double initial_tail_fraction(const Spectrum& s) {
  const auto& g = *s.grid;
  const double total = s.mass();
  if (total <= 0.0) return 0.0;
  double tail = 0.0;
  for (std::size_t i = 0; i < g.n; ++i)
    if (g.nodes[i] > 0.5 * g.omega_max) tail += g.weights[i] * s.values[i];
  return tail / total;
}

inline void validate_config(const ScenarioConfig& c) {
  const auto grid = make_grid(c);
  const auto controls = make_step_controls(c);
  controls.validate();
  parse_governing_form(c.rhs);
  make_kernel(c);
  detail::require(c.tail_tolerance > 0.0, "tail_tolerance must be positive");
  const Spectrum init = make_initial(c, grid);
  validate_spectrum(init);
  detail::require(std::isfinite(init.mass()), "A3: initial mass is not finite on the grid");
  detail::require(initial_tail_fraction(init) <= c.tail_tolerance,
                  "A3: initial mass beyond omega_max/2 exceeds tail_tolerance; enlarge omega_max");
  const SourceTerm src = make_source(c, *grid);
  for (double t : {0.0, 0.5 * c.time.t_end, c.time.t_end})
    detail::require(std::isfinite(src.total(*grid, t)), "A4: integrated source is not finite");
  detail::require(c.kappa.mode != "explicit" || (std::isfinite(c.kappa.value) && c.kappa.value > 0.0),
                  "kappa: explicit value must be positive");
  detail::require(c.picard.tol > 0.0, "picard: tol must be positive");
  detail::require(c.picard.max_iter >= 1, "picard: max_iter must be >= 1");
  detail::require(c.picard.time_nodes >= 2, "picard: time_nodes must be >= 2");
  detail::require(c.picard.a >= 0.0, "picard: a must be nonnegative");
  if (c.picard.b) detail::require(*c.picard.b > c.picard.a, "picard: need a < b");
  detail::require(c.horizon_advance == "mol" || c.horizon_advance == "picard",
                  "horizon_advance: expected \"mol\" or \"picard\"");
}

}  // namespace cnkin
