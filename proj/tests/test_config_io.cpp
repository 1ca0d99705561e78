#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "clusterfit/chain_io.hpp"
#include "clusterfit/config.hpp"
#include "clusterfit/errors.hpp"
#include "clusterfit/pipeline.hpp"
#include "clusterfit/synthetic.hpp"
#include "clusterfit/text.hpp"
#include "support.hpp"

using namespace clusterfit;
using clusterfit::test::scratch_dir;
using clusterfit::test::toy;
namespace fs = std::filesystem;

namespace {

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

template <class F>
std::pair<std::size_t, std::size_t> parse_error_at(F&& f) {
  try {
    f();
  } catch (const ParseError& e) {
    return {e.line(), e.column()};
  }
  return {0, 0};
}

std::string validation_field(const std::string& text) {
  try {
    parse_config(text, "cfg");
  } catch (const ValidationError& e) {
    return e.field();
  }
  return "";
}

RunConfig small_run(const fs::path& photometry) {
  RunConfig c;
  c.photometry = photometry.string();
  c.burn_in = 500;
  c.tuning_draws = 500;
  c.thin = 10;
  c.draws = 1000;
  c.init = {9.0, 0.0, 0.0, 0.5, 0.1};
  c.seed = 17;
  c.per_star = true;
  return c;
}

fs::path write_synthetic(const fs::path& dir, std::size_t n_cluster, std::size_t n_field) {
  SyntheticConfig sc;
  sc.theta = {9.0, 0.0, 0.0, 0.5, 0.1};
  sc.n_cluster = n_cluster;
  sc.n_field = n_field;
  sc.field_min_offset_sigma = 5.0;
  sc.seed = 2;
  const auto synth = generate_cluster(*toy(), sc);
  const auto path = dir / "phot.csv";
  std::ofstream out(path, std::ios::binary);
  write_catalog_csv(out, synth.catalog);
  return path;
}

}  // namespace

TEST_CASE("configuration defaults") {
  const auto c = parse_config("photometry = stars.csv\n", "cfg");
  CHECK(c.photometry == "stars.csv");
  CHECK(c.burn_in == 30000);
  CHECK(c.tuning_draws == 10000);
  CHECK(c.thin == 50);
  CHECK(c.prior.age_min == 8.0);
  CHECK(c.prior.age_max == 9.7);
  RunConfig expected;
  expected.photometry = "stars.csv";
  CHECK(c == expected);
  CHECK(parse_config("", "empty") == RunConfig{});
}

TEST_CASE("configuration syntax") {
  const auto c = parse_config("# comment\nseed = 42   # trailing\n\nburn_in=100\nfit_transform = false\n"
                              "cut_filter = V\ncut_thresholds = 7, 8.5\ncut_side = fainter\n",
                              "cfg");
  CHECK(c.seed == 42);
  CHECK(c.burn_in == 100);
  CHECK_FALSE(c.fit_transform);
  CHECK(c.cut_thresholds == std::vector<double>{7.0, 8.5});
  CHECK(c.cut_side == CutSide::kKeepFainter);

  CHECK(parse_error_at([] { parse_config("seed = 1\nbogus = 3\n", "cfg"); }).first == 2);
  CHECK(parse_error_at([] { parse_config("seed = 1\njust words\n", "cfg"); }).first == 2);
  const auto at = parse_error_at([] { parse_config("draws = many\n", "cfg"); });
  CHECK(at.first == 1);
  CHECK(at.second == 9);

  CHECK(validation_field("burn_in = -1\n") == "burn_in");
  CHECK(validation_field("draws = 0\n") == "draws");
  CHECK(validation_field("default_pmember = 1.5\n") == "default_pmember");
  CHECK(validation_field("init.age = 7.5\n") == "init.age");
  CHECK(validation_field("cut_thresholds = 7\n") == "cut_filter");
}

TEST_CASE("configuration round trip") {
  RunConfig c;
  c.table = "t.txt";
  c.photometry = "p.csv";
  c.out_dir = "out dir";
  c.seed = 123456789012345ULL;
  c.chains = 3;
  c.zero_threshold = 2.5;
  c.signs.beta_dm = -1;
  c.signs.gamma_feh = 1;
  c.prior.dm = {3.3, 0.05};
  c.prior.log_av = {-3.0, 0.5};
  c.init = {9.1, -0.1, 0.0, 3.3, 0.01};
  c.max_mag_filter = "V";
  c.max_mag = 15.25;
  c.cut_filter = "B";
  c.cut_thresholds = {10.1, 11.0 / 3.0};
  c.per_star = true;
  c.sim.binary_fraction = 0.3;
  c.sim.sigma = 0.1 / 3.0;
  CHECK(parse_config(emit_config(c), "emit") == c);
  CHECK(parse_config(emit_config(RunConfig{}), "emit") == RunConfig{});
}

TEST_CASE("config files resolve relative paths") {
  const auto dir = scratch_dir("config_paths");
  fs::create_directories(dir / "data");
  spit(dir / "data" / "phot.csv", "id,pmember,V_mag,V_sd\n");
  spit(dir / "run.cfg", "photometry = data/phot.csv\nseed = 5\n");
  const auto c = load_config((dir / "run.cfg").string());
  CHECK(fs::equivalent(c.photometry, dir / "data" / "phot.csv"));
  CHECK(c.seed == 5);
  CHECK_NOTHROW(c.validate_for_fit());

  RunConfig missing;
  try {
    missing.validate_for_fit();
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "photometry");
  }
  missing.photometry = (dir / "nope.csv").string();
  CHECK_THROWS_AS(missing.validate_for_fit(), ValidationError);
}

TEST_CASE("chain CSV round trip") {
  SampleSet s;
  s.star_ids = {"a", "b"};
  for (int k = 0; k < 5; ++k) {
    NaturalState nat;
    nat.theta = {9.0 + k / 7.0, -0.1 * k, 0.0, 0.5 + k / 3.0, 0.1};
    nat.stars = {{1.0 / (k + 1), k / 9.0, k % 2}, {2.0 + k / 11.0, 0.0, 1}};
    s.append(k * 10 + 10, -100.0 / (k + 3), nat);
  }
  std::stringstream full;
  write_chain_csv(full, s, true);
  CHECK(full.str().rfind("iter,logpost,theta_age,theta_feh,theta_heh,theta_dm,theta_av,Z_a,M1_a,R_a,Z_b,M1_b,R_b\n", 0) ==
        0);
  CHECK(parse_chain_csv(full, "chain") == s);

  std::stringstream bare;
  write_chain_csv(bare, s, false);
  CHECK(bare.str().rfind("iter,logpost,theta_age,theta_feh,theta_heh,theta_dm,theta_av\n", 0) == 0);
  const auto back = parse_chain_csv(bare, "chain");
  CHECK(back.n_stars() == 0);
  CHECK(back.theta == s.theta);
  CHECK(back.log_post == s.log_post);
  CHECK(back.iter == s.iter);

  std::istringstream bad("iter,logpost,theta_age,theta_feh,theta_heh,theta_dm,theta_av\n1,2,3,x,5,6,7\n");
  CHECK(parse_error_at([&] { parse_chain_csv(bad, "bad"); }).first == 2);
}

TEST_CASE("inputs, cuts and checksums") {
  const auto dir = scratch_dir("inputs");
  const auto phot = write_synthetic(dir, 20, 3);
  auto c = small_run(phot);
  const auto in = load_inputs(c);
  CHECK(in.table_checksum == "toy");
  CHECK(in.photometry_checksum.rfind("fnv1a64:", 0) == 0);
  CHECK(in.catalog.size() == 23);
  CHECK(load_inputs(c).photometry_checksum == in.photometry_checksum);

  c.max_mag_filter = "V";
  c.max_mag = 8.0;
  const auto cut = apply_max_mag(c, in.catalog);
  for (std::size_t i = 0; i < cut.size(); ++i) CHECK(cut.x(i, 0) <= 8.0);
  CHECK(cut.size() == magnitude_cut_rows(in.catalog, "V", 8.0).size());

  write_table((dir / "toy.txt").string(), *toy());
  c.table = (dir / "toy.txt").string();
  const auto from_file = load_inputs(c);
  CHECK(*from_file.table == *toy());
  CHECK(from_file.table_checksum != "toy");
}

TEST_CASE("fit outputs are complete, parseable and reproducible") {
  const auto dir = scratch_dir("fit_outputs");
  const auto phot = write_synthetic(dir, 8, 2);
  auto c = small_run(phot);
  c.chains = 2;
  const auto inputs = load_inputs(c);
  const auto a = run_fit(c, inputs.table, inputs.catalog);
  REQUIRE(a.chains.size() == 2);
  CHECK(a.chains[0].seed == 17);
  CHECK(a.chains[1].seed == 18);
  CHECK_FALSE(a.chains[0].samples == a.chains[1].samples);
  CHECK(a.summary.draws == 2 * c.draws);

  write_fit_outputs((dir / "one").string(), c, inputs, a);
  const auto b = run_fit(c, inputs.table, inputs.catalog);
  write_fit_outputs((dir / "two").string(), c, inputs, b);

  for (const char* name : {"chain_0.csv", "chain_1.csv", "tuning_0.txt", "tuning_1.txt", "regressions_0.csv",
                           "chains.csv", "summary.csv", "summary.txt", "membership.csv", "config.txt", "manifest.txt"}) {
    INFO(name);
    REQUIRE(fs::exists(dir / "one" / name));
    CHECK(slurp(dir / "one" / name) == slurp(dir / "two" / name));
  }

  std::ifstream chain(dir / "one" / "chain_0.csv");
  CHECK(parse_chain_csv(chain, "chain") == a.chains[0].samples);
  std::ifstream summary(dir / "one" / "summary.csv");
  CHECK(parse_summary_csv(summary, "summary").size() == a.summary.parameters.size());
  std::ifstream membership(dir / "one" / "membership.csv");
  CHECK(parse_membership_csv(membership, "membership").size() == inputs.catalog.size());
  std::ifstream tuning(dir / "one" / "tuning_1.txt");
  CHECK(parse_tuning(tuning, inputs.catalog.size()).transform == a.chains[1].tuning.transform);
  CHECK(parse_config(slurp(dir / "one" / "config.txt"), "config") == c);

  const auto per_chain = slurp(dir / "one" / "chains.csv");
  CHECK(per_chain.rfind("chain,seed,parameter,mean,sd,ess,lag1\n", 0) == 0);
  CHECK(per_chain.find("\n1,18,theta_dm,") != std::string::npos);
  const double dm0 = summarize(a.chains[0].samples).parameter("theta_dm").mean;
  CHECK(per_chain.find("\n0,17,theta_dm," + text::format_double(dm0) + ",") != std::string::npos);

  const auto manifest = slurp(dir / "one" / "manifest.txt");
  CHECK(manifest.find("seed = 17") != std::string::npos);
  CHECK(manifest.find("chain_seeds = 17,18") != std::string::npos);
  CHECK(manifest.find("input.photometry = " + inputs.photometry_checksum) != std::string::npos);
  CHECK(manifest.find("output.chain_0.csv = fnv1a64:") != std::string::npos);
  CHECK(manifest.find(dir.string()) == std::string::npos);

  PhotometryCatalog lonely = inputs.catalog.select(std::vector<std::size_t>{0});
  CHECK_THROWS_AS(run_fit(c, inputs.table, lonely), InsufficientStars);
}

TEST_CASE("output files report their checksum") {
  const auto dir = scratch_dir("checksums");
  const auto sum = write_output_file(dir.string(), "x.txt", "hello");
  CHECK(slurp(dir / "x.txt") == "hello");
  CHECK(sum == "fnv1a64:" + text::hex64(text::fnv1a("hello")));
  CHECK(sum != write_output_file(dir.string(), "y.txt", "hellp"));
}
