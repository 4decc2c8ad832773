#include <catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "optomech/sweep.hpp"

using namespace optomech;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(OPTOMECH_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "optomech_cli_test";
  fs::create_directories(dir);
  return dir / name;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("point writes one csv row") {
  const fs::path out = scratch("point.csv");
  REQUIRE(run("point --g 1e5 --p-over-q 1e10 -o " + out.string()) == 0);
  std::ifstream in(out);
  const CsvTable t = read_csv(in);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.header == csv_columns());
  CHECK(t.rows[0][t.column("status")] == "ok");
  CHECK(t.rows[0][t.column("g")] == "100000");
}

TEST_CASE("sweep from a config file") {
  const fs::path cfg = scratch("sweep.toml");
  std::ofstream(cfg) << "[params]\nomega_m = 1e6\n[[grid]]\naxis = \"model\"\nmodels = [\"rwa\", \"nonrwa\"]\n"
                        "[[grid]]\naxis = \"g\"\nvalues = [1e4, 1e5, 1e6]\n";
  const fs::path out = scratch("sweep.csv");
  REQUIRE(run("sweep --config " + cfg.string() + " -o " + out.string()) == 0);
  std::ifstream in(out);
  CHECK(read_csv(in).rows.size() == 6);
  CHECK(run("check --strict " + out.string()) == 0);

  const fs::path json = scratch("sweep.json");
  REQUIRE(run("sweep --config " + cfg.string() + " --format json -o " + json.string()) == 0);
  CHECK(slurp(json).find(kSchemaVersion) != std::string::npos);
}

TEST_CASE("configuration errors exit with 2") {
  CHECK(run("point --eta 2") == 2);
  CHECK(run("point --model exact") == 2);
  CHECK(run("point --cyclic-hz eta") == 2);
  CHECK(run("sweep --preset fig99") == 2);
  CHECK(run("point --unknown-flag") == 2);
  CHECK(run("frobnicate") == 2);
  const fs::path bad = scratch("bad.toml");
  std::ofstream(bad) << "[params]\ncolour = 3\n";
  CHECK(run("sweep --config " + bad.string()) == 2);
}

TEST_CASE("solver failures exit with 3 under --strict") {
  // At g = 0 the feedback cannot reach the mechanics, and with damping below
  // double resolution the control Hamiltonian has eigenvalues on the imaginary axis.
  const std::string args = "point --g 0 --q-m 1e20 --temperature 0 --p-over-q 1e300";
  const int relaxed = run(args);
  const int strict = run(args + " --strict");
  CHECK(relaxed == 0);
  CHECK(strict == 3);
}

TEST_CASE("optimize and trajectory subcommands") {
  const fs::path out = scratch("opt.json");
  REQUIRE(run("optimize --which theta --g 1e6 --objective conditional_phonon -o " + out.string()) == 0);
  CHECK(slurp(out).find("\"angle\"") != std::string::npos);

  const fs::path traj = scratch("traj.json");
  const fs::path dump = scratch("traj.bin");
  REQUIRE(run("trajectory --omega-m 1e6 --q-m 10 --kappa 2e6 --g 2e5 --temperature 1e-3 "
              "--p-over-q 1e4 --ensemble 100 --window 5 --dump " + dump.string() + " -o " +
              traj.string()) == 0);
  CHECK(slurp(traj).find("estimate") != std::string::npos);
  CHECK(fs::file_size(dump) > 0);
}
