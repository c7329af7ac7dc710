#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"

#ifndef ADEPINN_CLI_PATH
#define ADEPINN_CLI_PATH "adepinn"
#endif

namespace fs = std::filesystem;

namespace {

int run_cli(const std::string& args) {
  const std::string cmd = std::string(ADEPINN_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  return std::system(cmd.c_str());
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "adepinn_cli_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Tiny overlay config so CLI tests stay fast.
fs::path tiny_config(const fs::path& dir) {
  const fs::path p = dir / "tiny.json";
  std::ofstream os(p);
  os << R"({
    "grid": {"nx1": 24, "nx2": 12, "nt_save": 4},
    "sampling": {"n_res": 120, "n_ic": 60, "n_t": 3, "n_bc_x2_side": 3, "n_bc_x1_side": 4,
                  "ic_fraction": 0.5},
    "optim": {"adam_epochs": 60, "batch_size": 60, "lbfgs_max_iters": 25,
               "field_adam_epochs": 150, "field_lbfgs_max_iters": 60},
    "inverse": {"n_x": 2, "n_obs_t": 3, "n_k": 5, "n_h": 5, "darcy_n_res": 40,
                 "darcy_n_bc_x2_side": 3, "darcy_n_bc_x1_side": 4}
  })";
  return p;
}

}  // namespace

TEST_CASE("cli pipeline: gen-field, solve-darcy, solve-ade chain with run artifacts") {
  auto dir = fresh_dir("pipeline");
  auto cfgp = tiny_config(dir);
  const std::string base = "--preset paper2d --config " + cfgp.string() + " --seed 3 ";

  REQUIRE(run_cli(base + "--out " + (dir / "gf").string() + " gen-field") == 0);
  CHECK(fs::exists(dir / "gf" / "K.txt"));
  CHECK(fs::exists(dir / "gf" / "config.json"));
  CHECK(fs::exists(dir / "gf" / "version.txt"));

  REQUIRE(run_cli(base + "--out " + (dir / "sd").string() + " solve-darcy --k-file " +
                  (dir / "gf" / "K.txt").string()) == 0);
  CHECK(fs::exists(dir / "sd" / "h.txt"));

  REQUIRE(run_cli(base + "--out " + (dir / "sa").string() + " solve-ade --k-file " +
                  (dir / "gf" / "K.txt").string() + " --h-file " +
                  (dir / "sd" / "h.txt").string()) == 0);
  CHECK(fs::exists(dir / "sa" / "u.manifest"));
  CHECK(fs::exists(dir / "sa" / "mass_report.csv"));
}

TEST_CASE("cli names the missing prerequisite subcommand") {
  auto dir = fresh_dir("missing");
  auto cfgp = tiny_config(dir);
  const int rc = run_cli("--preset paper2d --config " + cfgp.string() + " --out " +
                         (dir / "sd").string() + " solve-darcy --k-file " +
                         (dir / "nope.txt").string());
  CHECK(rc != 0);
}

TEST_CASE("cli deterministic reruns are byte-identical") {
  auto dir = fresh_dir("determinism");
  auto cfgp = tiny_config(dir);
  const std::string base = "--preset meanfield2d --config " + cfgp.string() +
                           " --seed 5 --deterministic ";
  REQUIRE(run_cli(base + "--out " + (dir / "a").string() + " train-forward") == 0);
  REQUIRE(run_cli(base + "--out " + (dir / "b").string() + " train-forward") == 0);
  for (const char* f : {"history.csv", "metrics.csv", "summary.txt", "u.ckpt", "plan.txt"}) {
    CAPTURE(f);
    CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(!slurp(dir / "a" / f).empty());
  }
}

TEST_CASE("cli train-backward emits positivity and source diagnostics") {
  auto dir = fresh_dir("backward");
  auto cfgp = tiny_config(dir);
  REQUIRE(run_cli("--preset meanfield2d --config " + cfgp.string() + " --seed 4 --out " +
                  (dir / "tb").string() + " train-backward --wrapper sigmoid") == 0);
  const std::string sum = slurp(dir / "tb" / "summary.txt");
  CHECK(sum.find("min_u") != std::string::npos);
  CHECK(sum.find("x1c_t0") != std::string::npos);
  CHECK(fs::exists(dir / "tb" / "metrics.csv"));
}

TEST_CASE("cli train-inverse consumes the fd reference pipeline") {
  auto dir = fresh_dir("inverse");
  auto cfgp = tiny_config(dir);
  const std::string base = "--preset paper2d --config " + cfgp.string() + " --seed 2 ";
  REQUIRE(run_cli(base + "--out " + (dir / "gf").string() + " gen-field") == 0);
  REQUIRE(run_cli(base + "--out " + (dir / "sd").string() + " solve-darcy --k-file " +
                  (dir / "gf" / "K.txt").string()) == 0);
  REQUIRE(run_cli(base + "--out " + (dir / "sa").string() + " solve-ade --k-file " +
                  (dir / "gf" / "K.txt").string() + " --h-file " +
                  (dir / "sd" / "h.txt").string()) == 0);
  REQUIRE(run_cli(base + "--out " + (dir / "ti").string() + " train-inverse --k-file " +
                  (dir / "gf" / "K.txt").string() + " --h-file " +
                  (dir / "sd" / "h.txt").string() + " --u-manifest " +
                  (dir / "sa" / "u.manifest").string()) == 0);
  const std::string sum = slurp(dir / "ti" / "summary.txt");
  CHECK(sum.find("rel_l2_k") != std::string::npos);
  CHECK(fs::exists(dir / "ti" / "k.ckpt"));
  CHECK(fs::exists(dir / "ti" / "h.ckpt"));
  CHECK(fs::exists(dir / "ti" / "u.ckpt"));
}

TEST_CASE("cli approx1d writes per-time error columns") {
  auto dir = fresh_dir("approx1d");
  const fs::path p = dir / "tiny1d.json";
  {
    std::ofstream os(p);
    os << R"({"approx1d": {"nx": 41, "nt": 11, "seeds": [1], "layers": [2, 12, 1],
              "adam_epochs": 100, "batch_size": 128, "lbfgs_max_iters": 30}})";
  }
  REQUIRE(run_cli("--preset approx1d --config " + p.string() + " --seed 2 --out " +
                  (dir / "ax").string() + " approx1d") == 0);
  const std::string csv = slurp(dir / "ax" / "approx1d.csv");
  CHECK(csv.find("time,raw_mean,norm_mean") != std::string::npos);
  CHECK(fs::exists(dir / "ax" / "summary.txt"));
}
