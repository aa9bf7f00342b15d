#pragma once

// Experiment configuration files: line-oriented "key = value" under
// [domain] [lattice] [field] [energies] [defects] [studies] [output].
// Lists are comma separated; '#' starts a comment. Parsing is strict.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "spinlab/convergence.hpp"
#include "spinlab/error.hpp"

namespace spinlab {

inline const std::vector<std::string>& known_studies() {
  static const std::vector<std::string> s{"construction", "norm", "defects", "total"};
  return s;
}

/// Everything a run needs: the sweep plus the study selection and outputs.
struct RunConfig {
  SweepConfig sweep;
  std::vector<std::string> studies;
  std::filesystem::path out_dir = "spinlab_out";
  bool plots = true;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

/// Comma-separated items; one pair of enclosing brackets is optional.
inline std::vector<std::string> split_list(std::string v) {
  v = trim(v);
  if (v.size() >= 2 && v.front() == '[' && v.back() == ']') v = trim(v.substr(1, v.size() - 2));
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(v);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  if (!v.empty() && v.back() == ',') out.emplace_back();
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

class ConfigReader {
 public:
  ConfigReader(std::map<std::string, Entry> entries) : entries_(std::move(entries)) {}

  bool has(const std::string& key) const { return entries_.count(key) > 0; }
  int line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

  const Entry& require(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ConfigError(0, "missing required key '" + key + "'");
    return it->second;
  }

  double number(const std::string& key, const std::string& text, int ln) const {
    double v = 0.0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || text.empty())
      throw ConfigError(ln, "'" + key + "': expected a number, got '" + text + "'");
    return v;
  }

  long long integer(const std::string& key, const std::string& text, int ln) const {
    long long v = 0;
    const char* b = text.data();
    const char* e = b + text.size();
    auto [p, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || p != e || text.empty())
      throw ConfigError(ln, "'" + key + "': expected an integer, got '" + text + "'");
    return v;
  }

  std::optional<double> get_number(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const Entry& e = entries_.at(key);
    return number(key, e.value, e.line);
  }

  std::optional<long long> get_integer(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const Entry& e = entries_.at(key);
    return integer(key, e.value, e.line);
  }

  std::optional<Vec3> get_vec3(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const Entry& e = entries_.at(key);
    const auto parts = split_list(e.value);
    if (parts.size() != 3) throw ConfigError(e.line, "'" + key + "': expected three comma-separated numbers");
    return Vec3{number(key, parts[0], e.line), number(key, parts[1], e.line), number(key, parts[2], e.line)};
  }

  std::optional<bool> get_bool(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    const Entry& e = entries_.at(key);
    std::string v = e.value;
    std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
    if (v == "on" || v == "true" || v == "yes" || v == "1") return true;
    if (v == "off" || v == "false" || v == "no" || v == "0") return false;
    throw ConfigError(e.line, "'" + key + "': expected on/off, got '" + e.value + "'");
  }

  std::optional<std::string> get_string(const std::string& key) const {
    if (!has(key)) return std::nullopt;
    return entries_.at(key).value;
  }

 private:
  std::map<std::string, Entry> entries_;
};

inline const std::map<std::string, std::set<std::string>>& config_schema() {
  static const std::map<std::string, std::set<std::string>> schema{
      {"domain", {"shape", "lo", "hi", "center", "radius"}},
      {"lattice", {"a", "n_list", "k"}},
      {"field", {"kind", "direction", "q", "cone_k", "theta0"}},
      {"energies",
       {"A", "mu0", "zeeman", "demag", "demag_cells", "demag_method", "demag_padding", "demag_budget", "quad_cells",
        "quad_subsample", "fd_step"}},
      {"defects", {"beta", "amplitude", "seed"}},
      {"studies", {"run", "eval_resolution", "c_hyp", "hyp3_c", "liminf_delta", "max_rel_error"}},
      {"output", {"dir", "plots"}},
  };
  return schema;
}

}  // namespace detail

/// Parses configuration text.
inline RunConfig parse_config_text(const std::string& text) {
  const auto& schema = detail::config_schema();
  std::map<std::string, detail::Entry> entries;
  std::string section;
  std::istringstream is(text);
  std::string raw;
  int ln = 0;
  while (std::getline(is, raw)) {
    ++ln;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(ln, "malformed section header '" + line + "'");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (!schema.count(section)) throw ConfigError(ln, "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(ln, "expected 'key = value', got '" + line + "'");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(ln, "key '" + key + "' appears before any section header");
    if (key.empty()) throw ConfigError(ln, "empty key");
    if (!schema.at(section).count(key)) throw ConfigError(ln, "unknown key '" + key + "' in section [" + section + "]");
    const std::string full = section + "." + key;
    if (entries.count(full)) throw ConfigError(ln, "duplicate key '" + key + "' in section [" + section + "]");
    entries[full] = {value, ln};
  }

  const detail::ConfigReader r(entries);
  RunConfig rc;
  SweepConfig& s = rc.sweep;

  // [domain]
  const detail::Entry& shape = r.require("domain.shape");
  if (shape.value == "box") {
    for (const char* k : {"domain.center", "domain.radius"})
      if (r.has(k)) throw ConfigError(r.line(k), std::string("'") + k + "' does not apply to a box domain");
    const Vec3 lo = r.get_vec3("domain.lo").value_or(Vec3{-0.5, -0.5, -0.5});
    const Vec3 hi = r.get_vec3("domain.hi").value_or(Vec3{0.5, 0.5, 0.5});
    try {
      s.domain = DomainSpec::box(lo, hi);
    } catch (const InvalidArgument& e) {
      throw ConfigError(r.has("domain.lo") ? r.line("domain.lo") : shape.line, e.what());
    }
  } else if (shape.value == "ball") {
    for (const char* k : {"domain.lo", "domain.hi"})
      if (r.has(k)) throw ConfigError(r.line(k), std::string("'") + k + "' does not apply to a ball domain");
    const Vec3 c = r.get_vec3("domain.center").value_or(Vec3{});
    const double rad = r.get_number("domain.radius").value_or(0.5);
    try {
      s.domain = DomainSpec::ball(c, rad);
    } catch (const InvalidArgument& e) {
      throw ConfigError(r.has("domain.radius") ? r.line("domain.radius") : shape.line, e.what());
    }
  } else {
    throw ConfigError(shape.line, "domain.shape must be 'box' or 'ball', got '" + shape.value + "'");
  }

  // [lattice]
  s.a = r.get_number("lattice.a").value_or(1.0);
  if (!(s.a > 0.0)) throw ConfigError(r.line("lattice.a"), "lattice.a must be positive");
  const detail::Entry& nl = r.require("lattice.n_list");
  for (const std::string& item : detail::split_list(nl.value)) {
    const long long n = r.integer("n_list", item, nl.line);
    if (n < 1 || n > 4096) throw ConfigError(nl.line, "n_list entries must lie in [1, 4096]");
    s.n_list.push_back(static_cast<int>(n));
  }
  if (s.n_list.empty()) throw ConfigError(nl.line, "n_list is empty");
  for (std::size_t i = 1; i < s.n_list.size(); ++i)
    if (s.n_list[i] <= s.n_list[i - 1]) throw ConfigError(nl.line, "n_list not increasing");
  s.k = static_cast<int>(r.get_integer("lattice.k").value_or(1));
  if (s.k < 1) throw ConfigError(r.line("lattice.k"), "lattice.k must be >= 1");

  // [field]
  const detail::Entry& kind = r.require("field.kind");
  if (kind.value == "constant")
    s.field.kind = FieldKind::constant;
  else if (kind.value == "helix")
    s.field.kind = FieldKind::helix;
  else if (kind.value == "conical")
    s.field.kind = FieldKind::conical;
  else
    throw ConfigError(kind.line, "unknown field kind '" + kind.value + "'");
  if (auto v = r.get_vec3("field.direction")) {
    if (!(norm(*v) > 0.0)) throw ConfigError(r.line("field.direction"), "field.direction must be non-zero");
    s.field.direction = *v / norm(*v);
  }
  if (auto v = r.get_vec3("field.q")) s.field.q = *v;
  if (auto v = r.get_vec3("field.cone_k")) s.field.cone_k = *v;
  if (auto v = r.get_number("field.theta0")) s.field.theta0 = *v;

  // [energies]
  s.A = r.get_number("energies.A").value_or(1.0);
  if (!(s.A > 0.0)) throw ConfigError(r.line("energies.A"), "energies.A must be positive");
  s.demag.options.mu0 = r.get_number("energies.mu0").value_or(1.0);
  if (!(s.demag.options.mu0 > 0.0)) throw ConfigError(r.line("energies.mu0"), "energies.mu0 must be positive");
  s.zeeman = r.get_vec3("energies.zeeman").value_or(Vec3{});
  s.demag.enabled = r.get_bool("energies.demag").value_or(false);
  s.demag.cells = static_cast<int>(r.get_integer("energies.demag_cells").value_or(32));
  if (s.demag.cells < 1) throw ConfigError(r.line("energies.demag_cells"), "energies.demag_cells must be >= 1");
  if (auto m = r.get_string("energies.demag_method")) {
    if (*m == "spectral")
      s.demag.options.method = DemagMethod::spectral;
    else if (*m == "direct")
      s.demag.options.method = DemagMethod::direct;
    else
      throw ConfigError(r.line("energies.demag_method"), "demag_method must be 'spectral' or 'direct'");
  }
  s.demag.options.padding = r.get_number("energies.demag_padding").value_or(2.0);
  if (!(s.demag.options.padding >= 2.0))
    throw ConfigError(r.line("energies.demag_padding"), "energies.demag_padding must be >= 2");
  if (auto b = r.get_integer("energies.demag_budget")) {
    if (*b < 1) throw ConfigError(r.line("energies.demag_budget"), "energies.demag_budget must be positive");
    s.demag.options.direct_cell_budget = static_cast<std::size_t>(*b);
  }
  s.quadrature.cells = static_cast<int>(r.get_integer("energies.quad_cells").value_or(48));
  if (s.quadrature.cells < 2) throw ConfigError(r.line("energies.quad_cells"), "energies.quad_cells must be >= 2");
  s.quadrature.subsample = static_cast<int>(r.get_integer("energies.quad_subsample").value_or(4));
  if (s.quadrature.subsample < 1)
    throw ConfigError(r.line("energies.quad_subsample"), "energies.quad_subsample must be >= 1");
  if (auto f = r.get_number("energies.fd_step")) {
    if (!(*f > 0.0)) throw ConfigError(r.line("energies.fd_step"), "energies.fd_step must be positive");
    s.quadrature.fd_step = *f;
  }

  // [defects]
  if (r.has("defects.beta") || r.has("defects.amplitude") || r.has("defects.seed")) {
    DefectSpec d;
    d.beta = r.get_number("defects.beta").value_or(1.0);
    if (!(d.beta >= 0.0)) throw ConfigError(r.line("defects.beta"), "defects.beta must be non-negative");
    if (auto amp = r.get_string("defects.amplitude")) {
      if (*amp == "inverse_log") {
        d.amplitude = DefectAmplitude::inverse_log();
      } else {
        const double c = r.number("amplitude", *amp, r.line("defects.amplitude"));
        if (!(c >= 0.0 && c <= 4.0))
          throw ConfigError(r.line("defects.amplitude"), "defects.amplitude must be 'inverse_log' or a number in [0, 4]");
        d.amplitude = DefectAmplitude::constant(c);
      }
    }
    const auto seed = r.get_integer("defects.seed").value_or(0);
    if (seed < 0) throw ConfigError(r.line("defects.seed"), "defects.seed must be non-negative");
    d.rng_seed = static_cast<std::uint64_t>(seed);
    s.defects = d;
    s.seed = d.rng_seed;
  }

  // [studies]
  if (auto run = r.get_string("studies.run")) {
    const int l = r.line("studies.run");
    for (const std::string& name : detail::split_list(*run)) {
      if (name.empty()) continue;
      const auto& ks = known_studies();
      if (std::find(ks.begin(), ks.end(), name) == ks.end()) throw ConfigError(l, "unknown study '" + name + "'");
      if (std::find(rc.studies.begin(), rc.studies.end(), name) != rc.studies.end())
        throw ConfigError(l, "study '" + name + "' listed twice");
      rc.studies.push_back(name);
    }
  }
  s.eval_resolution = static_cast<int>(r.get_integer("studies.eval_resolution").value_or(18));
  if (s.eval_resolution < 1)
    throw ConfigError(r.line("studies.eval_resolution"), "studies.eval_resolution must be >= 1");
  s.c_hyp = r.get_number("studies.c_hyp");
  if (s.c_hyp && !(*s.c_hyp > 0.0)) throw ConfigError(r.line("studies.c_hyp"), "studies.c_hyp must be positive");
  s.hyp3_c = r.get_number("studies.hyp3_c");
  if (s.hyp3_c && !(*s.hyp3_c > 0.0)) throw ConfigError(r.line("studies.hyp3_c"), "studies.hyp3_c must be positive");
  s.liminf_delta = r.get_number("studies.liminf_delta").value_or(0.1);
  if (!(s.liminf_delta >= 0.0 && s.liminf_delta < 1.0))
    throw ConfigError(r.line("studies.liminf_delta"), "studies.liminf_delta must lie in [0, 1)");
  s.max_rel_error = r.get_number("studies.max_rel_error");
  if (std::find(rc.studies.begin(), rc.studies.end(), "defects") != rc.studies.end() && !s.defects)
    throw ConfigError(r.line("studies.run"), "study 'defects' needs a [defects] section");

  // [output]
  if (auto d = r.get_string("output.dir")) {
    if (d->empty()) throw ConfigError(r.line("output.dir"), "output.dir is empty");
    rc.out_dir = *d;
  }
  rc.plots = r.get_bool("output.plots").value_or(true);
  return rc;
}

inline RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(0, "cannot open config file '" + path.string() + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config_text(os.str());
}

}  // namespace spinlab
