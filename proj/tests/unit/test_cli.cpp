#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cpmmd/cli.hpp"
#include "cpmmd/csv.hpp"
#include "cpmmd/pipeline.hpp"

using namespace cpmmd;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& f) const { return (path / f).string(); }
};

const std::vector<std::string> kQuick = {"--n-perm", "30", "--n-cal", "3", "--steps", "5"};

std::vector<std::string> concat(std::vector<std::string> a, const std::vector<std::string>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

}  // namespace

TEST_CASE("cli exit codes") {
  TempDir dir("cpmmd_cli_codes");
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  const Run missing = cli({"test", "--x", dir / "nope.csv", "--y", dir / "nope.csv", "--out", dir / "r.csv"});
  CHECK(missing.code == 2);
  CHECK(missing.err.find("nope.csv") != std::string::npos);
  CHECK(cli({"power-sweep", "--experiment", "hdgm", "--reps", "0", "--out", dir / "sweep"}).code == 2);
  CHECK(cli({"test", "--x", "a", "--y", "b", "--regime", "cubic"}).code == 2);
}

TEST_CASE("generate then test reproduces the in-process pipeline") {
  TempDir dir("cpmmd_cli_roundtrip");
  REQUIRE(cli({"--seed", "5", "generate", "--family", "hdgm", "--d", "2", "--param", "0.8", "--m", "20", "--n", "20",
               "--x", dir / "x.csv", "--y", dir / "y.csv"})
              .code == 0);
  const Run r = cli(concat({"--seed", "9", "test", "--x", dir / "x.csv", "--y", dir / "y.csv", "--regime", "linear",
                            "--out", dir / "r.csv"},
                           kQuick));
  REQUIRE(r.code == 0);

  const PooledSample data = load_csv_pair(dir / "x.csv", dir / "y.csv");
  TestConfig cfg;
  cfg.seed = 9;
  cfg.n_perm = 30;
  cfg.n_cal = 3;
  OptimizerConfig opt;
  opt.steps = 5;
  const TestReport direct = run_cpmmd_test(data.x(), data.y(), LinearClass{}, cfg, opt);
  CHECK(slurp(dir / "r.csv").rfind("reject,p_value,", 0) == 0);
  CHECK(slurp(dir / "r.csv").find(format_double(direct.p_value)) != std::string::npos);
  CHECK(slurp(dir / "r.csv").find(format_double(direct.statistic)) != std::string::npos);
}

TEST_CASE("manifests record the seed and replay bit-for-bit") {
  TempDir dir("cpmmd_cli_replay");
  REQUIRE(cli({"--seed", "1", "generate", "--d", "2", "--m", "16", "--n", "16", "--x", dir / "x.csv", "--y",
               dir / "y.csv"})
              .code == 0);
  ::unsetenv("CPMMD_SEED");
  REQUIRE(cli(concat({"test", "--x", dir / "x.csv", "--y", dir / "y.csv", "--regime", "deep:6x6/2", "--c1", "0.01",
                      "--out", dir / "a.csv"},
                     kQuick))
              .code == 0);
  const nlohmann::json m = nlohmann::json::parse(slurp(dir / "a.csv.manifest.json"));
  CHECK(m["seed_source"] == "default");
  CHECK(m["seed"] == 0);
  CHECK(m["c1_injected"] == true);
  CHECK_FALSE(m.contains("calibration"));
  CHECK(m["args"][0] == "--seed");

  REQUIRE(cli({"replay", dir / "a.csv.manifest.json", "--out", dir / "b.csv"}).code == 0);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  // the environment seed is replaced by an explicit flag
  ::setenv("CPMMD_SEED", "77", 1);
  REQUIRE(cli(concat({"test", "--x", dir / "x.csv", "--y", dir / "y.csv", "--regime", "linear", "--out",
                      dir / "env.csv"},
                     kQuick))
              .code == 0);
  REQUIRE(cli(concat({"--seed", "3", "test", "--x", dir / "x.csv", "--y", dir / "y.csv", "--regime", "linear",
                      "--out", dir / "flag.csv"},
                     kQuick))
              .code == 0);
  ::unsetenv("CPMMD_SEED");
  const nlohmann::json env = nlohmann::json::parse(slurp(dir / "env.csv.manifest.json"));
  const nlohmann::json flag = nlohmann::json::parse(slurp(dir / "flag.csv.manifest.json"));
  CHECK(env["seed"] == 77);
  CHECK(env["seed_source"] == "env");
  CHECK(flag["seed"] == 3);
  CHECK(flag["seed_source"] == "flag");
  // replaying the env run needs no environment
  REQUIRE(cli({"replay", dir / "env.csv.manifest.json", "--out", dir / "env2.csv"}).code == 0);
  CHECK(slurp(dir / "env.csv") == slurp(dir / "env2.csv"));
}

TEST_CASE("collapse subcommand rows") {
  TempDir dir("cpmmd_cli_collapse");
  REQUIRE(cli({"collapse", "--widths", "8", "--seeds", "1", "--steps", "0", "--n", "20", "--out", dir / "c.csv"})
              .code == 0);
  const std::string text = slurp(dir / "c.csv");
  CHECK(std::count(text.begin(), text.end(), '\n') == 2);
  CHECK(text.find("false") != std::string::npos);
  CHECK(text.find("true") == std::string::npos);
}
