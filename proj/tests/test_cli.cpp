#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "clusterfit/chain_io.hpp"
#include "clusterfit/diagnostics.hpp"
#include "clusterfit/likelihood.hpp"
#include "clusterfit/synthetic.hpp"

namespace fs = std::filesystem;
using clusterfit::cli::run;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path workdir(const std::string& name) {
  const char* base = std::getenv("CLUSTERFIT_TEST_TMP");
  auto dir = (base ? fs::path(base) : fs::temp_directory_path() / "clusterfit_cli") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

const char* kQuickConfig =
    "burn_in = 500\ntuning_draws = 500\nthin = 10\ndraws = 1000\ninit.dm = 0.5\n"
    "sim.n_cluster = 10\nsim.n_field = 2\n";

}  // namespace

TEST_CASE("usage errors") {
  auto r = cli({});
  CHECK(r.code == 1);
  r = cli({"frobnicate"});
  CHECK(r.code == 1);
  CHECK(r.err.find("fit") != std::string::npos);
  r = cli({"fit", "--no-such-flag"});
  CHECK(r.code == 1);
  r = cli({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("simulate") != std::string::npos);
  CHECK(cli({"--version"}).code == 0);
}

TEST_CASE("fit without photometry names the missing field") {
  const auto dir = workdir("missing");
  const auto r = cli({"fit", "--out", dir.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("photometry") != std::string::npos);

  spit(dir / "bad.cfg", "burn_in = -1\n");
  const auto bad = cli({"fit", "--config", (dir / "bad.cfg").string()});
  CHECK(bad.code == 1);
  CHECK(bad.err.find("burn_in") != std::string::npos);
}

TEST_CASE("table checks") {
  const auto dir = workdir("tables");
  const auto sim = cli({"simulate", "--out", dir.string(), "--seed", "3"});
  REQUIRE(sim.code == 0);
  const auto table = dir / "toy_table.txt";
  REQUIRE(fs::exists(table));
  const auto ok = cli({"check-table", table.string()});
  CHECK(ok.code == 0);
  CHECK(ok.out.find("ok") != std::string::npos);

  spit(dir / "broken.txt", "filters V\nkappa 1\nfeh 0\nage 9\nmass 0.4 10\nmass 0.2 8\n");
  CHECK(cli({"check-table", (dir / "broken.txt").string()}).code == 1);
}

TEST_CASE("simulate writes a catalog and its truth sidecar") {
  const auto dir = workdir("simulate");
  spit(dir / "sim.cfg", kQuickConfig);
  const auto out = dir / "cat.csv";
  const auto r = cli({"simulate", "--config", (dir / "sim.cfg").string(), "--output", out.string(), "--seed", "9"});
  REQUIRE(r.code == 0);
  const auto truth_path = dir / "cat.truth";
  REQUIRE(fs::exists(truth_path));
  const auto catalog = clusterfit::read_catalog_csv(out.string());
  CHECK(catalog.size() == 12);
  std::ifstream truth_in(truth_path);
  const auto truth = clusterfit::parse_truth_csv(truth_in, "truth");
  CHECK(truth.stars.size() == 12);

  const auto again = dir / "again.csv";
  REQUIRE(cli({"simulate", "--config", (dir / "sim.cfg").string(), "--output", again.string(), "--seed", "9"}).code ==
          0);
  CHECK(slurp(out) == slurp(again));
}

TEST_CASE("fit, summarize and reproduce") {
  const auto dir = workdir("fit");
  spit(dir / "run.cfg", kQuickConfig);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(cli({"simulate", "--config", cfg, "--output", (dir / "cat.csv").string(), "--seed", "4"}).code == 0);

  const auto a = cli({"fit", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--out",
                      (dir / "a").string(), "--seed", "6", "--chains", "2", "--per-star"});
  REQUIRE(a.code == 0);
  CHECK(a.out.find("theta_dm") != std::string::npos);
  for (const char* f : {"chain_0.csv", "chain_1.csv", "summary.csv", "membership.csv", "manifest.txt"})
    CHECK(fs::exists(dir / "a" / f));
  CHECK(slurp(dir / "a" / "chain_0.csv").find("Z_C0001") != std::string::npos);

  REQUIRE(cli({"fit", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--out", (dir / "b").string(),
               "--seed", "6", "--chains", "2", "--per-star"})
              .code == 0);
  CHECK(slurp(dir / "a" / "chain_1.csv") == slurp(dir / "b" / "chain_1.csv"));
  CHECK(slurp(dir / "a" / "manifest.txt") == slurp(dir / "b" / "manifest.txt"));

  const auto s = cli({"summarize", (dir / "a" / "chain_0.csv").string(), (dir / "a" / "chain_1.csv").string(), "--out",
                      (dir / "resummary").string()});
  REQUIRE(s.code == 0);
  CHECK(s.out.find("theta_age") != std::string::npos);
  CHECK(fs::exists(dir / "resummary" / "summary.csv"));
  CHECK(fs::exists(dir / "resummary" / "membership.csv"));

  // A faint-magnitude cut from the command line removes stars.
  const auto cut = cli({"fit", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--out",
                        (dir / "cut").string(), "--max-mag", "V", "8.0"});
  REQUIRE(cut.code == 0);
  std::ifstream mem(dir / "cut" / "membership.csv");
  const auto rows = clusterfit::parse_membership_csv(mem, "membership");
  CHECK(rows.size() < 12);
}

TEST_CASE("output directory from the environment") {
  const auto dir = workdir("env");
  spit(dir / "run.cfg", kQuickConfig);
  const auto target = dir / "from_env";
  ::setenv("CLUSTERFIT_OUT", target.string().c_str(), 1);
  const auto r = cli({"simulate", "--config", (dir / "run.cfg").string()});
  ::unsetenv("CLUSTERFIT_OUT");
  REQUIRE(r.code == 0);
  CHECK(fs::exists(target / "synthetic.csv"));
  CHECK(fs::exists(target / "synthetic.truth"));
}

TEST_CASE("sweep") {
  const auto dir = workdir("sweep");
  spit(dir / "run.cfg", kQuickConfig);
  const auto cfg = (dir / "run.cfg").string();
  REQUIRE(cli({"simulate", "--config", cfg, "--output", (dir / "cat.csv").string()}).code == 0);
  const auto r = cli({"sweep", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--out",
                      (dir / "out").string(), "--filter", "V", "--cuts", "30,9"});
  REQUIRE(r.code == 0);
  CHECK(r.out.rfind("cut,threshold,stars,parameter,mean,sd\n", 0) == 0);
  CHECK(fs::exists(dir / "out" / "sweep.csv"));
  CHECK(fs::exists(dir / "out" / "cut_1" / "chain_0.csv"));
  CHECK(fs::exists(dir / "out" / "manifest.txt"));

  const auto none = cli({"sweep", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--out",
                         (dir / "out2").string(), "--filter", "V", "--cuts", "-50"});
  CHECK(none.code == 2);
  CHECK(none.err.find("leaves") != std::string::npos);
  CHECK(cli({"sweep", "--config", cfg, "--photometry", (dir / "cat.csv").string(), "--cuts", "9"}).code == 1);
}

TEST_CASE("oracle checks") {
  const auto r = cli({"oracle", "--invariance"});
  CHECK(r.code == 0);
  CHECK(r.out.find("PASS") != std::string::npos);
  CHECK(r.out.find("max |p_A(theta,Z) - p_B(theta,Z)|") != std::string::npos);
  const auto e = cli({"oracle", "--exactness", "--draws", "20000"});
  CHECK(e.code == 0);
  CHECK(e.out.find("max z-score") != std::string::npos);
  CHECK(cli({"oracle"}).code == 1);
}
