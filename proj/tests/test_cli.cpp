#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "coslat/harness.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(COSLAT_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  TempDir() : path(fs::temp_directory_path() / "coslat_cli_test") {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

}  // namespace

TEST_CASE("cli exit codes and outputs") {
  TempDir dir;
  {
    std::ofstream(dir / "small.conf") << "steps = 2\nruns = 1\nparticles = 60\n";
    std::ofstream(dir / "bad.conf") << "steps = 2\nwhat = 1\n";
  }
  CHECK(run("validate-config " + (dir / "small.conf")) == 0);
  CHECK(run("validate-config " + (dir / "bad.conf")) != 0);
  CHECK(run("validate-config " + (dir / "missing.conf")) != 0);
  CHECK(run("") != 0);
  CHECK(run("frobnicate") != 0);
  CHECK(run("simulate --method neither") != 0);
  CHECK(run("simulate --scenario 3") != 0);

  const std::string common = "--config " + (dir / "small.conf") + " --quiet --seed 3 ";
  REQUIRE(run("simulate " + common + "--scenario 1 --detail --out " + (dir / "a")) == 0);
  REQUIRE(run("simulate " + common + "--scenario 1 --detail --out " + (dir / "b")) == 0);
  for (const char* f : {"rmse.csv", "runs.csv", "events.csv", "truth.csv"}) {
    CHECK(fs::exists(dir.path / "a" / f));
    CHECK(slurp(dir.path / "a" / f) == slurp(dir.path / "b" / f));
  }
  std::istringstream in(slurp(dir.path / "a" / "rmse.csv"));
  const auto curves = coslat::read_rmse_csv(in);
  CHECK(curves.size() == 4);

  REQUIRE(run("simulate " + common + "--method coslat --mode centralized --out " + (dir / "c")) == 0);
  std::istringstream one(slurp(dir.path / "c" / "rmse.csv"));
  CHECK(coslat::read_rmse_csv(one).size() == 2);

  // Replaying the stored truth reproduces the run.
  REQUIRE(run("replay " + common + "--scenario 1 --truth " + (dir / "a/truth.csv") + " --out " + (dir / "r")) == 0);
  CHECK(slurp(dir.path / "r" / "rmse.csv") == slurp(dir.path / "a" / "rmse.csv"));

  { std::ofstream(dir / "short.csv") << "node_id,n,x1,x2,v1,v2\n0,0,0,0,0,0\n"; }
  CHECK(run("replay " + common + "--truth " + (dir / "short.csv") + " --out " + (dir / "x")) != 0);
  CHECK(run("replay " + common + "--out " + (dir / "x")) != 0);
  { std::ofstream(dir / "file") << "x"; }
  CHECK(run("simulate " + common + "--out " + (dir / "file/sub")) != 0);
}
