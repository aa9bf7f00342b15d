#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "json.hpp"
#include "spinlab/runner.hpp"

using namespace spinlab;
namespace fs = std::filesystem;

namespace {

const char* kMinimal = R"(
[domain]
shape = box
[lattice]
n_list = [8, 16]
[field]
kind = helix
)";

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("spinlab_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

int config_error_line(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

std::string config_error(const std::string& text) {
  try {
    parse_config_text(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return {};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SPINLAB_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, MinimalConfigGetsDocumentedDefaults) {
  const RunConfig rc = parse_config_text(kMinimal);
  const SweepConfig& s = rc.sweep;
  EXPECT_TRUE(s.domain.is_box());
  EXPECT_EQ(s.n_list, (std::vector<int>{8, 16}));
  EXPECT_EQ(s.field.kind, FieldKind::helix);
  EXPECT_EQ(s.k, 1);
  EXPECT_EQ(s.A, 1.0);
  EXPECT_EQ(s.a, 1.0);
  EXPECT_EQ(s.demag.options.mu0, 1.0);
  EXPECT_FALSE(s.demag.enabled);
  EXPECT_FALSE(s.defects);
  EXPECT_TRUE(rc.studies.empty());
  EXPECT_EQ(rc.out_dir, fs::path("spinlab_out"));
  EXPECT_NO_THROW(s.validate());
}

TEST(Config, BracketsAreOptional) {
  const std::string bare = std::string(kMinimal).replace(std::string(kMinimal).find("[8, 16]"), 7, "8, 16");
  EXPECT_EQ(parse_config_text(bare).sweep.n_list, (std::vector<int>{8, 16}));
}

TEST(Config, UnknownKeyIsNamedWithItsLine) {
  const std::string text = std::string(kMinimal) + "foo = 1\n";
  EXPECT_NE(config_error(text).find("foo"), std::string::npos);
  EXPECT_EQ(config_error_line(text), 8);
}

TEST(Config, NListMustIncrease) {
  const std::string text = R"([domain]
shape = box
[lattice]
n_list = 16, 8
[field]
kind = helix
)";
  EXPECT_NE(config_error(text).find("n_list not increasing"), std::string::npos);
  EXPECT_EQ(config_error_line(text), 4);
}

TEST(Config, MalformedInputs) {
  EXPECT_NE(config_error("[domain]\nshape = cylinder\n").find("cylinder"), std::string::npos);
  EXPECT_NE(config_error("shape = box\n").find("before any section"), std::string::npos);
  EXPECT_NE(config_error("[nowhere]\n").find("unknown section"), std::string::npos);
  EXPECT_NE(config_error("[domain]\nshape box\n").find("key = value"), std::string::npos);
  EXPECT_NE(config_error("[domain]\nshape = box\n").find("n_list"), std::string::npos);  // missing required key
  EXPECT_NE(config_error(std::string(kMinimal) + "[studies]\nrun = construction, banana\n").find("banana"),
            std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "[studies]\nrun = defects\n").find("[defects]"), std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "[defects]\namplitude = 5\n").find("amplitude"), std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "[energies]\nA = -1\n").find("A must be positive"), std::string::npos);
  EXPECT_NE(config_error(std::string(kMinimal) + "[lattice]\nn_list = 4\n").find("duplicate"), std::string::npos);
  EXPECT_GT(config_error_line(std::string(kMinimal) + "[energies]\nzeeman = 1, 2\n"), 0);
}

TEST(Config, FullConfigRoundTripsThroughTheManifest) {
  const std::string text = R"(
[domain]
shape = ball
center = 0, 0, 0
radius = 0.4
[lattice]
a = 1
n_list = 4, 8
k = 2
[field]
kind = conical
q = 0, 0, 6.283185307179586
cone_k = 0, 0, 1
theta0 = 0.3
[energies]
A = 2
mu0 = 1.5
zeeman = 0, 0, 1
demag = true
demag_cells = 16
demag_method = direct
demag_budget = 10000
[defects]
beta = 0.5
amplitude = inverse_log
seed = 9
[studies]
run = construction, defects
liminf_delta = 0.2
[output]
dir = somewhere
plots = false
)";
  const RunConfig rc = parse_config_text(text);
  const nlohmann::json j = config_json(rc);
  EXPECT_EQ(j["domain"]["shape"], "ball");
  EXPECT_EQ(j["domain"]["radius"], 0.4);
  EXPECT_EQ(j["lattice"]["k"], 2);
  EXPECT_EQ(j["field"]["kind"], "conical");
  EXPECT_EQ(j["energies"]["A"], 2.0);
  EXPECT_EQ(j["energies"]["demag_method"], "direct");
  EXPECT_EQ(j["energies"]["demag_budget"], 10000);
  EXPECT_EQ(j["defects"]["amplitude"], "inverse_log");
  EXPECT_EQ(j["defects"]["seed"], 9);
  EXPECT_EQ(j["studies"]["run"], nlohmann::json::array({"construction", "defects"}));
  EXPECT_EQ(j["studies"]["c_hyp"], "from gradient bound");
  EXPECT_EQ(j["output"]["plots"], false);
  EXPECT_EQ(j["energies"]["quad_cells"], 48);  // default echoed
}

TEST(Runner, ConstructionStudyWritesTablesPlotsAndManifest) {
  const fs::path dir = scratch_dir("run");
  RunConfig rc = parse_config_text(std::string(kMinimal) + "[studies]\nrun = construction, norm\n");
  rc.out_dir = dir;
  const RunManifest m = run(rc, "inline");
  EXPECT_EQ(m.exit_code, 0);
  ASSERT_EQ(m.studies.size(), 2u);
  for (const char* name : {"construction", "norm"}) {
    const std::string csv = slurp(dir / (std::string(name) + ".csv"));
    EXPECT_EQ(csv.substr(0, csv.find('\n')), kCsvHeader);
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 3);
    EXPECT_TRUE(fs::exists(dir / (std::string(name) + ".gp")));
  }
  const nlohmann::json j = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(j["exit_code"], 0);
  EXPECT_EQ(j["studies"][0]["status"], "pass");
  EXPECT_EQ(j["config"]["lattice"]["n_list"], nlohmann::json::array({8, 16}));
  fs::remove_all(dir);
}

TEST(Runner, EmptyStudyListIsNoted) {
  const fs::path dir = scratch_dir("empty");
  RunConfig rc = parse_config_text(kMinimal);
  rc.out_dir = dir;
  const RunManifest m = run(rc);
  EXPECT_EQ(m.exit_code, 0);
  EXPECT_EQ(m.notes, std::vector<std::string>{"no studies requested"});
  EXPECT_TRUE(fs::exists(dir / "manifest.json"));
  fs::remove_all(dir);
}

TEST(Runner, FailingAndAbortedStudiesAreRecorded) {
  const fs::path dir = scratch_dir("fail");
  RunConfig rc = parse_config_text(std::string(kMinimal) +
                                   "[defects]\namplitude = 4\n[studies]\nrun = defects, construction\nhyp3_c = 1e-9\n");
  rc.sweep.n_list = {8, 16, 32};
  rc.out_dir = dir;
  const RunManifest m = run(rc);
  EXPECT_EQ(m.exit_code, 1);
  ASSERT_EQ(m.studies.size(), 2u);
  EXPECT_EQ(m.studies[0].status, "hypothesis-violating control");
  EXPECT_TRUE(fs::exists(dir / "defects.csv"));
  EXPECT_EQ(m.studies[1].status, "aborted");
  EXPECT_FALSE(m.studies[1].diagnostics.empty());
  EXPECT_TRUE(m.studies[1].csv.empty());
  fs::remove_all(dir);
}

TEST(Runner, CsvIncludesSubtablesAndNoNegativeZero) {
  ConvergenceTable t;
  t.study = "total";
  t.rows.push_back(make_row(8, -0.0, 0.0));
  ConvergenceTable sub;
  sub.study = "total.zeeman";
  sub.rows.push_back(make_row(8, 1.0, 2.0));
  t.subtables.push_back(sub);
  std::ostringstream os;
  write_csv(os, t);
  EXPECT_EQ(os.str(), std::string(kCsvHeader) + "\ntotal,8,0,0,0,,\ntotal.zeeman,8,1,2,1,0.5,\n");
  std::ostringstream gp;
  write_plot_script(gp, t, "total.csv", "total.png");
  EXPECT_NE(gp.str().find("'total.zeeman'"), std::string::npos);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch_dir("cli");
  const fs::path good = dir / "good.cfg";
  std::ofstream(good) << kMinimal << "[studies]\nrun = construction\n";
  EXPECT_EQ(run_cli("validate " + good.string()), 0);
  EXPECT_EQ(run_cli("run " + good.string() + " --out " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "construction.csv"));

  const fs::path bad = dir / "bad.cfg";
  std::ofstream(bad) << kMinimal << "foo = 1\n";
  EXPECT_EQ(run_cli("validate " + bad.string()), 2);
  EXPECT_EQ(run_cli("run " + bad.string()), 2);

  const fs::path failing = dir / "failing.cfg";
  std::ofstream(failing) << kMinimal << "[studies]\nrun = construction\nmax_rel_error = 1e-6\n";
  EXPECT_EQ(run_cli("run " + failing.string() + " --out " + (dir / "out2").string()), 1);

  EXPECT_NE(run_cli("frobnicate"), 0);
  EXPECT_EQ(run_cli("sample " + good.string() + " --n 2 -o " + (dir / "s.txt").string()), 0);
  EXPECT_EQ(std::count(std::istreambuf_iterator<char>(*std::make_unique<std::ifstream>(dir / "s.txt")), {}, '\n'), 27);
  fs::remove_all(dir);
}

TEST(Cli, ShippedConfigsParse) {
  for (const auto& entry : fs::directory_iterator(fs::path(SPINLAB_SOURCE_DIR) / "configs")) {
    if (entry.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(parse_config(entry.path()).sweep.validate()) << entry.path();
  }
}
