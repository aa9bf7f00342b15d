// Command-line front end: run / validate experiment configs, dump sampled
// spin fields.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "spinlab/spinlab.hpp"

namespace {

void print_summary(const spinlab::RunConfig& rc) {
  const auto& s = rc.sweep;
  std::cout << "domain:  " << s.domain.describe() << '\n' << "n_list: ";
  for (int n : s.n_list) std::cout << ' ' << n;
  std::cout << "\nfield:   " << spinlab::to_string(s.field.kind) << "\nstudies:";
  if (rc.studies.empty()) std::cout << " (none)";
  for (const auto& st : rc.studies) std::cout << ' ' << st;
  std::cout << "\noutput:  " << rc.out_dir.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"spinlab: discrete-to-continuum micromagnetics lab"};
  app.require_subcommand(1);

  std::string config;
  std::string out;
  int threads = 0;
  std::uint64_t seed = 0;

  auto* run = app.add_subcommand("run", "Run the studies listed in a config file");
  run->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  auto* out_opt = run->add_option("--out", out, "Output directory (overrides [output] dir)");
  auto* threads_opt = run->add_option("--threads", threads, "Worker threads per study")->check(CLI::Range(1, 1024));
  auto* seed_opt = run->add_option("--seed", seed, "RNG seed for defect injection (overrides [defects] seed)");

  auto* validate = app.add_subcommand("validate", "Parse and check a config file without running it");
  validate->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);

  int n = 0;
  std::string what = "spins";
  std::string dest;
  auto* sample = app.add_subcommand("sample", "Write the sampled spin field (or its average) at one n");
  sample->add_option("config", config, "Config file")->required()->check(CLI::ExistingFile);
  sample->add_option("--n", n, "Shrink index")->required()->check(CLI::Range(1, 4096));
  sample->add_option("--what", what, "spins | averaged | demag")->check(CLI::IsMember({"spins", "averaged", "demag"}));
  sample->add_option("-o,--output", dest, "Output file (default stdout)");
  auto* sample_seed = sample->add_option("--seed", seed, "RNG seed for defect injection");

  CLI11_PARSE(app, argc, argv);

  try {
    spinlab::RunConfig rc = spinlab::parse_config(config);
    if (*validate) {
      rc.sweep.validate();
      print_summary(rc);
      std::cout << "ok\n";
      return 0;
    }
    if (*run) {
      if (*out_opt) rc.out_dir = out;
      if (*threads_opt) rc.sweep.threads = threads;
      if (*seed_opt) {
        rc.sweep.seed = seed;
        if (rc.sweep.defects) rc.sweep.defects->rng_seed = seed;
      }
      rc.sweep.validate();
      const spinlab::RunManifest m = spinlab::run(rc, config);
      for (const auto& note : m.notes) std::cout << note << '\n';
      for (const auto& s : m.studies) {
        std::cout << s.name << ": " << s.status << " (" << s.seconds << " s)";
        if (!s.csv.empty()) std::cout << " -> " << (rc.out_dir / s.csv).string();
        std::cout << '\n';
        for (const auto& d : s.diagnostics) std::cout << "  " << d << '\n';
      }
      std::cout << "manifest: " << (rc.out_dir / "manifest.json").string() << '\n';
      return m.exit_code;
    }
    if (*sample) {
      const auto& s = rc.sweep;
      if (*sample_seed && s.defects) rc.sweep.defects->rng_seed = seed;
      const auto lat = spinlab::build_lattice(s.domain, s.a, n);
      spinlab::SpinField f = spinlab::sample(s.field.make(), lat);
      if (s.defects) f = spinlab::inject_defects(f, *rc.sweep.defects);
      std::ofstream file;
      if (!dest.empty()) {
        file.open(dest);
        if (!file) throw spinlab::Error("cannot open '" + dest + "' for writing");
      }
      std::ostream& os = dest.empty() ? std::cout : file;
      if (what == "spins") {
        spinlab::write_spin_field(os, f);
      } else if (what == "averaged") {
        const spinlab::Kernel kernel = spinlab::build_kernel(s.a, s.k);
        os << "x,y,z,mx,my,mz,phi\n";
        os.precision(10);
        for (const auto& y : spinlab::evaluation_grid(s.domain, s.eval_resolution)) {
          const double phi = spinlab::phi_n(kernel, *lat, y);
          if (!(phi > 0.0)) continue;
          const auto m = spinlab::average(kernel, f, y);
          os << y.x << ',' << y.y << ',' << y.z << ',' << m.x << ',' << m.y << ',' << m.z << ',' << phi << '\n';
        }
      } else {
        const auto dec = spinlab::make_decomposition(lat);
        const auto r = spinlab::demag_discrete(f, dec, s.demag.grid(s.domain), s.demag.options);
        spinlab::write_grid(os, r.spec, r.h);
        std::cerr << "demag energy " << r.energy << '\n';
      }
      return 0;
    }
  } catch (const spinlab::ConfigError& e) {
    std::cerr << config << ": " << e.what() << '\n';
    return 2;
  } catch (const spinlab::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
