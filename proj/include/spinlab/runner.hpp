#pragma once

// Batch runner: executes the configured studies, writes one CSV table and one
// gnuplot script per study plus a JSON manifest.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "spinlab/config.hpp"
#include "spinlab/convergence.hpp"

namespace spinlab {

inline constexpr const char* kCsvHeader = "study,n,value,reference,abs_error,rel_error,fitted_rate";

struct StudyRecord {
  std::string name;
  std::string status;  // table status, or "aborted"
  bool pass = false;
  std::string csv;     // file name inside the output directory, empty if none
  std::string plot;
  double seconds = 0.0;
  std::vector<std::string> diagnostics;
};

struct RunManifest {
  std::string config_path;
  RunConfig config;
  std::vector<StudyRecord> studies;
  std::vector<std::string> notes;
  double seconds = 0.0;
  int exit_code = 0;
};

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "";
  if (v == 0.0) v = 0.0;  // drop the sign of -0
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_table_rows(std::ostream& os, const ConvergenceTable& t) {
  const std::string rate = t.fitted_rate ? num(*t.fitted_rate) : "";
  for (const TableRow& r : t.rows)
    os << t.study << ',' << r.n << ',' << num(r.value) << ',' << num(r.reference) << ',' << num(r.abs_error) << ','
       << num(r.rel_error) << ',' << rate << '\n';
  for (const ConvergenceTable& s : t.subtables) write_table_rows(os, s);
}

inline void collect_names(const ConvergenceTable& t, std::vector<std::string>& out) {
  out.push_back(t.study);
  for (const ConvergenceTable& s : t.subtables) collect_names(s, out);
}

inline nlohmann::json vec_json(const Vec3& v) { return nlohmann::json::array({v.x, v.y, v.z}); }

}  // namespace detail

inline void write_csv(std::ostream& os, const ConvergenceTable& t) {
  os << kCsvHeader << '\n';
  detail::write_table_rows(os, t);
}

/// gnuplot script plotting |error| against n on log-log axes, one curve per
/// study name found in the CSV.
inline void write_plot_script(std::ostream& os, const ConvergenceTable& t, const std::string& csv_name,
                              const std::string& png_name) {
  std::vector<std::string> names;
  detail::collect_names(t, names);
  os << "set datafile separator ','\n"
     << "set terminal pngcairo size 900,600\n"
     << "set output '" << png_name << "'\n"
     << "set logscale xy\n"
     << "set xlabel 'n'\n"
     << "set ylabel '|value - reference|'\n"
     << "set key outside right\n"
     << "set title '" << t.study << "'\n"
     << "plot ";
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) os << ", \\\n     ";
    os << "'" << csv_name << "' using (strcol(1) eq '" << names[i] << "' ? $2 : 1/0):5 with linespoints title '"
       << names[i] << "'";
  }
  os << '\n';
}

/// Resolved configuration, defaults included.
inline nlohmann::json config_json(const RunConfig& rc) {
  const SweepConfig& s = rc.sweep;
  nlohmann::json j;
  if (s.domain.is_box()) {
    j["domain"] = {{"shape", "box"}, {"lo", detail::vec_json(s.domain.as_box().lo)}, {"hi", detail::vec_json(s.domain.as_box().hi)}};
  } else {
    j["domain"] = {{"shape", "ball"}, {"center", detail::vec_json(s.domain.as_ball().center)}, {"radius", s.domain.as_ball().radius}};
  }
  j["lattice"] = {{"a", s.a}, {"n_list", s.n_list}, {"k", s.k}};
  j["field"] = {{"kind", to_string(s.field.kind)},
                {"direction", detail::vec_json(s.field.direction)},
                {"q", detail::vec_json(s.field.q)},
                {"cone_k", detail::vec_json(s.field.cone_k)},
                {"theta0", s.field.theta0}};
  j["energies"] = {{"A", s.A},
                   {"mu0", s.demag.options.mu0},
                   {"zeeman", detail::vec_json(s.zeeman)},
                   {"demag", s.demag.enabled},
                   {"demag_cells", s.demag.cells},
                   {"demag_method", to_string(s.demag.options.method)},
                   {"demag_padding", s.demag.options.padding},
                   {"demag_budget", s.demag.options.direct_cell_budget},
                   {"quad_cells", s.quadrature.cells},
                   {"quad_subsample", s.quadrature.subsample},
                   {"fd_step", s.quadrature.fd_step ? nlohmann::json(*s.quadrature.fd_step) : nlohmann::json()}};
  if (s.defects) {
    const DefectSpec& d = *s.defects;
    j["defects"] = {{"beta", d.beta},
                    {"amplitude", d.amplitude.kind == DefectAmplitude::Kind::inverse_log ? nlohmann::json("inverse_log")
                                                                                         : nlohmann::json(d.amplitude.value)},
                    {"seed", d.rng_seed}};
  } else {
    j["defects"] = nullptr;
  }
  j["studies"] = {{"run", rc.studies},
                  {"eval_resolution", s.eval_resolution},
                  {"c_hyp", s.c_hyp ? nlohmann::json(*s.c_hyp) : nlohmann::json("from gradient bound")},
                  {"hyp3_c", s.hyp3_c ? nlohmann::json(*s.hyp3_c) : nlohmann::json("from gradient bound")},
                  {"liminf_delta", s.liminf_delta},
                  {"max_rel_error", s.max_rel_error ? nlohmann::json(*s.max_rel_error) : nlohmann::json()}};
  j["output"] = {{"dir", rc.out_dir.string()}, {"plots", rc.plots}};
  j["threads"] = s.threads;
  return j;
}

inline nlohmann::json manifest_json(const RunManifest& m) {
  nlohmann::json j;
  j["config_path"] = m.config_path;
  j["output_dir"] = m.config.out_dir.string();
  j["config"] = config_json(m.config);
  j["studies"] = nlohmann::json::array();
  for (const StudyRecord& s : m.studies) {
    j["studies"].push_back({{"name", s.name},
                            {"status", s.status},
                            {"pass", s.pass},
                            {"csv", s.csv.empty() ? nlohmann::json() : nlohmann::json(s.csv)},
                            {"plot", s.plot.empty() ? nlohmann::json() : nlohmann::json(s.plot)},
                            {"seconds", s.seconds},
                            {"diagnostics", s.diagnostics}});
  }
  j["notes"] = m.notes;
  j["seconds"] = m.seconds;
  j["exit_code"] = m.exit_code;
  return j;
}

inline ConvergenceTable run_study(const std::string& name, const SweepConfig& cfg) {
  if (name == "construction") return run_construction_study(cfg);
  if (name == "norm") return run_norm_study(cfg);
  if (name == "defects") return run_defect_robustness(cfg);
  if (name == "total") return run_total_study(cfg);
  throw InvalidArgument("unknown study '" + name + "'");
}

/// Runs every requested study, writes outputs under rc.out_dir, and returns
/// the manifest (also written as manifest.json). exit_code is 0 iff every
/// study passed.
inline RunManifest run(const RunConfig& rc, const std::string& config_path = {}) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  RunManifest m;
  m.config_path = config_path;
  m.config = rc;
  std::filesystem::create_directories(rc.out_dir);

  if (rc.studies.empty()) m.notes.push_back("no studies requested");

  for (const std::string& name : rc.studies) {
    StudyRecord rec;
    rec.name = name;
    const auto s0 = clock::now();
    try {
      const ConvergenceTable t = run_study(name, rc.sweep);
      rec.status = t.status;
      rec.pass = t.pass;
      rec.diagnostics = t.diagnostics;
      rec.csv = name + ".csv";
      std::ofstream csv(rc.out_dir / rec.csv);
      write_csv(csv, t);
      if (!csv) throw Error("failed writing " + (rc.out_dir / rec.csv).string());
      if (rc.plots) {
        rec.plot = name + ".gp";
        std::ofstream gp(rc.out_dir / rec.plot);
        write_plot_script(gp, t, rec.csv, name + ".png");
      }
    } catch (const Error& e) {
      rec.status = "aborted";
      rec.pass = false;
      rec.diagnostics.push_back(e.what());
    }
    rec.seconds = std::chrono::duration<double>(clock::now() - s0).count();
    m.studies.push_back(rec);
  }

  m.exit_code = 0;
  for (const StudyRecord& s : m.studies)
    if (!s.pass) m.exit_code = 1;
  m.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  std::ofstream mf(rc.out_dir / "manifest.json");
  mf << manifest_json(m).dump(2) << '\n';
  return m;
}

}  // namespace spinlab
