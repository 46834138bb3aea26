#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "crbsde/config.hpp"
#include "crbsde/runner.hpp"

using namespace crbsde;

namespace {

namespace fs = std::filesystem;

fs::path scratch_dir() {
  const fs::path dir = fs::temp_directory_path() / "crbsde_cli_tests";
  fs::create_directories(dir);
  return dir;
}

fs::path write_file(const std::string& name, const std::string& text) {
  const fs::path path = scratch_dir() / name;
  std::ofstream(path) << text;
  return path;
}

// exit status + captured stderr of one CLI invocation
struct RunResult {
  int status = -1;
  std::string err;
};

RunResult run_cli(const std::string& args) {
  const fs::path errfile = scratch_dir() / "stderr.txt";
  const std::string cmd = std::string(CRBSDE_CLI_PATH) + " " + args + " 2>" +
                          errfile.string() + " >/dev/null";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ostringstream ss;
  ss << std::ifstream(errfile).rdbuf();
  r.err = ss.str();
  return r;
}

const char* kGoodConfig = R"(# smoke instance
[tree]
num_steps = 2
horizon = 1.0

[filtration]
kind = partial

[problem]
terminal = w1 0.5
barrier = constant -4.0
driver = affine 0.2 0.1 0.0

[run]
methods = [backward]
sweep_n = [2, 4, 8]
)";

}  // namespace

TEST_CASE("config parsing: minimal document and defaults") {
  const RunConfig cfg = parse_config(
      "[tree]\nnum_steps = 2\nhorizon = 1.0\n"
      "[filtration]\nkind = trivial\n"
      "[problem]\nterminal = constant 1.0\nbarrier = constant 0.0\n"
      "driver = zero\n");
  CHECK(cfg.num_steps == 2);
  CHECK(cfg.filtration == Filtration::Trivial);
  CHECK(cfg.driver.kind == "zero");
  CHECK(!cfg.has_state);
  CHECK(!cfg.has_control);
}

TEST_CASE("config parsing: rotation angle builds an orthogonal matrix") {
  const RunConfig cfg = parse_config(
      "[tree]\nnum_steps = 1\nhorizon = 1.0\n"
      "rotation_angle = 0.5235987755982988\n"  // 30 degrees
      "[problem]\nterminal = constant 1.0\nbarrier = constant 0.0\n"
      "driver = zero\n");
  const BuiltInstance bi = build_instance(cfg);
  const Mat2& u = bi.tree.rotation().m;
  CHECK(u[0][0] == doctest::Approx(std::sqrt(3.0) / 2.0));
  CHECK(u[0][1] == doctest::Approx(0.5));
  CHECK(bi.tree.rotation().orthogonality_defect() <= 1e-12);
}

TEST_CASE("config parsing: diagnostics name the line") {
  auto expect_fail = [](const std::string& text, const std::string& needle) {
    try {
      parse_config(text);
      CHECK(false);
    } catch (const Error& e) {
      CHECK(e.tag() == "VALIDATION_CONFIG");
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_fail("[tree]\nnup_steps = 2\n", "unknown key");
  expect_fail("[tree]\nnum_steps == 2\n", "number");
  expect_fail("num_steps = 2\n", "outside any section");
  expect_fail("[problem]\nterminal = constant\n", "expects 1 parameter");
  expect_fail("[mystery]\n", "unknown section");
  expect_fail("[tree]\nnum_steps = 1\n[problem]\nterminal = put 1.0\n",
              "[state]");
}

TEST_CASE("num_steps = 0 is rejected when the tree is built") {
  const RunConfig cfg = parse_config(
      "[tree]\nnum_steps = 0\nhorizon = 1.0\n"
      "[problem]\nterminal = constant 1.0\nbarrier = constant 0.0\n"
      "driver = zero\n");
  try {
    build_instance(cfg);
    CHECK(false);
  } catch (const Error& e) {
    CHECK(static_cast<int>(e.code()) == 2);
    CHECK(std::string(e.what()).find("num_steps") != std::string::npos);
  }
}

TEST_CASE("cli: solve and compare succeed on a small instance") {
  const fs::path cfg = write_file("good.cfg", kGoodConfig);
  const fs::path out = scratch_dir() / "out_solve";
  CHECK(run_cli("solve --config " + cfg.string() + " --out " + out.string())
            .status == 0);
  CHECK(fs::exists(out / "solution.csv"));
  CHECK(fs::exists(out / "diagnostics.csv"));
  CHECK(fs::exists(out / "summary.txt"));

  const fs::path outc = scratch_dir() / "out_compare";
  CHECK(run_cli("compare --config " + cfg.string() + " --out " + outc.string())
            .status == 0);
  std::ifstream f(outc / "compare.csv");
  std::string header, row;
  REQUIRE(std::getline(f, header));
  CHECK(header == "method,value0,reference,abs_gap");
  bool any = false;
  while (std::getline(f, row)) {
    const std::size_t last = row.rfind(',');
    const double gap = std::stod(row.substr(last + 1));
    CHECK(gap <= 1e-9);
    any = true;
  }
  CHECK(any);
}

TEST_CASE("cli: sweep reports shrinking representation discrepancies") {
  const fs::path cfg = write_file("good.cfg", kGoodConfig);
  const fs::path out = scratch_dir() / "out_sweep";
  CHECK(run_cli("sweep --config " + cfg.string() + " --out " + out.string())
            .status == 0);
  std::ifstream f(out / "sweep.csv");
  std::string line;
  REQUIRE(std::getline(f, line));
  std::vector<double> krep;
  while (std::getline(f, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int i = 0; i < 4 && std::getline(ss, cell, ','); ++i)
      if (i == 3) krep.push_back(std::stod(cell));
  }
  REQUIRE(krep.size() == 3);
  CHECK(krep[1] <= krep[0] + 1e-12);
  CHECK(krep[2] <= krep[1] + 1e-12);
}

TEST_CASE("cli: exit codes carry the error taxonomy") {
  // infeasible terminal constraint: validation, exit 2
  const fs::path bad = write_file("bad_terminal.cfg",
                                  "[tree]\nnum_steps = 1\nhorizon = 1.0\n"
                                  "[problem]\nterminal = constant 0.0\n"
                                  "barrier = constant 1.0\ndriver = zero\n");
  const RunResult r1 =
      run_cli("solve --config " + bad.string() + " --out " +
              (scratch_dir() / "out_bad").string());
  CHECK(r1.status == 2);
  CHECK(r1.err.find("VALIDATION_TERMINAL") != std::string::npos);

  // contraction guard: mu dt >= 1, exit 3
  const fs::path guard = write_file("guard.cfg",
                                    "[tree]\nnum_steps = 1\nhorizon = 2.0\n"
                                    "[problem]\nterminal = constant 1.0\n"
                                    "barrier = constant 0.0\n"
                                    "driver = affine 0.6 0.0 0.0\n");
  const RunResult r2 =
      run_cli("solve --config " + guard.string() + " --out " +
              (scratch_dir() / "out_guard").string());
  CHECK(r2.status == 3);
  CHECK(r2.err.find("GUARD_IMPLICIT") != std::string::npos);

  // missing config file
  CHECK(run_cli("solve --config /nonexistent.cfg --out /tmp/x").status != 0);
}

TEST_CASE("run_command writes timing to the summary only") {
  const RunConfig cfg = parse_config(kGoodConfig);
  const fs::path out = scratch_dir() / "out_direct";
  run_command(cfg, "solve", out.string());
  for (const char* name : {"solution.csv", "diagnostics.csv"}) {
    std::ostringstream ss;
    ss << std::ifstream(out / name).rdbuf();
    CHECK(ss.str().find("wall") == std::string::npos);
  }
  std::ostringstream ss;
  ss << std::ifstream(out / "summary.txt").rdbuf();
  CHECK(ss.str().find("wall_ms:") != std::string::npos);
}
