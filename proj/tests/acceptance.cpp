// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "clusterfit/config.hpp"
#include "clusterfit/diagnostics.hpp"
#include "clusterfit/likelihood.hpp"
#include "clusterfit/pipeline.hpp"
#include "clusterfit/priors.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/synthetic.hpp"
#include "support.hpp"

using namespace clusterfit;
using clusterfit::test::integrate;
using clusterfit::test::toy;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [x]");
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome invariance() {
  const auto start = Clock::now();
  const OracleInstance inst = invariance_fixture();
  const Posterior post = inst.posterior();
  const auto rep = pseudo_prior_invariance_check(post, inst.grid, uniform_field_pmf(inst.grid, inst.catalog.size()),
                                                 invariance_fixture_peaked_pmf(inst));
  const double t = seconds_since(start);
  Outcome o;
  o.require(rep.theta_z <= 1e-10, "max |dp(theta,Z)| " + fmt(rep.theta_z) + " <= 1e-10");
  o.require(rep.member_mass <= 1e-10, "member mass " + fmt(rep.member_mass) + " <= 1e-10");
  o.require(rep.field_mass > 0.0, "field mass differs by " + fmt(rep.field_mass) + " > 0");
  o.require(t <= 60.0, fmt(t) + " s <= 60 s");
  return o;
}

Outcome exactness() {
  const auto start = Clock::now();
  const auto rep = sampler_exactness_check(exactness_fixture(), 200000, 5000, 1);
  const double t = seconds_since(start);
  Outcome o;
  o.require(rep.draws >= 100000, std::to_string(rep.draws) + " draws >= 1e5");
  o.require(rep.passes(3.0), "max z " + fmt(rep.max_z_score()) + " <= 3 over " +
                                 std::to_string(rep.oracle_theta.size()) + " theta cells and " +
                                 std::to_string(rep.oracle_member.size()) + " memberships");
  o.require(t <= 300.0, fmt(t) + " s <= 300 s");
  return o;
}

SyntheticConfig recovery_data(std::uint64_t seed) {
  SyntheticConfig sc;
  sc.theta = {9.0, 0.0, 0.0, 0.5, 0.1};
  sc.n_cluster = 100;
  sc.n_field = 20;
  sc.binary_fraction = 0.5;
  sc.sigma = {0.03};
  sc.field_min_offset_sigma = 5.0;
  sc.seed = seed;
  return sc;
}

Outcome recovery() {
  const auto synth = generate_cluster(*toy(), recovery_data(7));
  RunConfig cfg;  // default schedule and 50k main draws
  const auto start = Clock::now();
  const FitResult fit = run_fit(cfg, toy(), synth.catalog);
  const double t = seconds_since(start);

  Outcome o;
  const ClusterParams& truth = synth.truth.theta;
  const std::pair<const char*, double> params[] = {
      {"theta_age", truth.age}, {"theta_feh", truth.feh}, {"theta_dm", truth.dm}, {"theta_av", truth.av}};
  for (const auto& [name, value] : params) {
    const auto& p = fit.summary.parameter(name);
    const double z = (p.mean - value) / p.sd;
    o.require(std::fabs(z) <= 4.0, std::string(name) + " " + fmt(p.mean) + "+-" + fmt(p.sd) + " vs " + fmt(value) +
                                       " (" + fmt(z) + " sd)");
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < synth.truth.stars.size(); ++i)
    if ((fit.summary.stars[i].p_member >= 0.5) == (synth.truth.stars[i].z == 1)) ++correct;
  const double frac = static_cast<double>(correct) / static_cast<double>(synth.truth.stars.size());
  o.require(frac >= 0.9, "classified " + std::to_string(correct) + "/" + std::to_string(synth.truth.stars.size()) +
                             " >= 90%");
  o.require(t <= 600.0, fmt(t) + " s <= 600 s");
  return o;
}

// Toy table whose main sequence brightens with age, so cluster stars couple
// age, distance modulus and masses. The plain toy main sequence ignores age.
std::shared_ptr<const IsochroneTable> aging_main_sequence_table() {
  const auto& tc = ToyModelConfig::defaults();
  const IsochroneTable& base = *toy();
  const double slope[] = {0.5, 0.7};
  std::vector<Track> tracks;
  for (std::size_t f = 0; f < tc.feh_grid.size(); ++f)
    for (std::size_t a = 0; a < tc.age_grid.size(); ++a) {
      Track t = base.track(0, f, a);
      for (std::size_t k = 0; k < t.size(); ++k)
        if (t.mass[k] <= t.remnant_above)
          for (std::size_t j = 0; j < 2; ++j) t.magnitudes[k * 2 + j] -= slope[j] * (tc.age_grid[a] - 9.0);
      tracks.push_back(std::move(t));
    }
  return std::make_shared<const IsochroneTable>(tc.filters, std::vector<double>{}, tc.feh_grid, tc.age_grid,
                                                std::move(tracks));
}

Outcome tuning_efficacy() {
  const auto table = aging_main_sequence_table();
  auto sc = recovery_data(1);
  sc.n_cluster = 40;
  sc.n_field = 0;
  const auto synth = generate_cluster(*table, sc);
  RunConfig cfg;
  cfg.burn_in = 10000;
  cfg.tuning_draws = 5000;
  cfg.thin = 25;
  cfg.draws = 20000;
  cfg.init.dm = 0.5;
  cfg.seed = 3;
  const FitResult tuned = run_fit(cfg, table, synth.catalog);
  cfg.fit_transform = false;
  const FitResult plain = run_fit(cfg, table, synth.catalog);

  Outcome o;
  for (const char* name : {"theta_age", "theta_dm"}) {
    const double a = tuned.summary.parameter(name).lag1();
    const double b = plain.summary.parameter(name).lag1();
    o.require(a < b, std::string(name) + " lag1 " + fmt(a) + " tuned < " + fmt(b) + " untuned");
  }
  return o;
}

Outcome numerics() {
  Outcome o;
  const double g = 4.2;
  const double offset = g - combine_binary(g, g);
  o.require(std::fabs(offset - 2.5 * std::log10(2.0)) <= 1e-12, "binary offset error " +
                                                                    fmt(std::fabs(offset - 2.5 * std::log10(2.0))));

  const double imf = integrate([](double m) { return std::exp(log_mass_prior(m)); }, 0.1, 8.0);
  o.require(std::fabs(imf - 1.0) <= 1e-8, "mass prior integral - 1 = " + fmt(imf - 1.0));
  double t6_worst = 0.0;
  for (auto [loc, scale] : {std::pair{1.0, 0.3}, {0.15, 0.05}, {7.9, 0.5}, {3.0, 4.0}}) {
    const TruncatedT6 t(loc, scale, 0.1, 8.0);
    const double total = integrate([&](double x) { return std::exp(t.log_density(x)); }, 0.1, 8.0);
    t6_worst = std::max(t6_worst, std::fabs(total - 1.0));
  }
  o.require(t6_worst <= 1e-8, "pseudo-prior integral error " + fmt(t6_worst));

  const auto& table = *toy();
  const auto& tc = ToyModelConfig::defaults();
  double node_err = 0.0;
  for (std::size_t f = 0; f < tc.feh_grid.size(); ++f)
    for (std::size_t a = 0; a < tc.age_grid.size(); ++a) {
      const Track& t = table.track(0, f, a);
      for (std::size_t k = 0; k < t.size(); ++k) {
        const auto v = interpolate_magnitudes(table, t.mass[k], tc.age_grid[a], tc.feh_grid[f]);
        for (std::size_t j = 0; j < v.size(); ++j)
          node_err = std::max(node_err, std::fabs(v[j] - t.magnitudes[k * v.size() + j]));
      }
    }
  o.require(node_err <= 1e-12, "node error " + fmt(node_err));

  // g_j = 2 mass + 3 age + feh + j on ragged mass grids.
  const std::vector<double> feh{-0.5, 0.0, 0.5}, age{8.5, 9.0, 9.5};
  std::vector<Track> tracks;
  int variant = 0;
  for (double f : feh)
    for (double a : age) {
      Track t;
      t.mass = (variant++ % 2 == 0) ? std::vector<double>{0.5, 1.0, 2.0, 3.0}
                                    : std::vector<double>{0.4, 1.2, 1.7, 2.5, 3.5};
      for (double m : t.mass)
        for (int j = 0; j < 2; ++j) t.magnitudes.push_back(2.0 * m + 3.0 * a + f + j);
      tracks.push_back(std::move(t));
    }
  const IsochroneTable affine(FilterSet{{"V", "B"}, {1.0, 1.32}}, {}, feh, age, std::move(tracks));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> um(0.5, 3.0), ua(8.5, 9.5), uf(-0.5, 0.5);
  double affine_err = 0.0;
  for (int n = 0; n < 5000; ++n) {
    const double m = um(rng), a = ua(rng), f = uf(rng);
    const auto v = interpolate_magnitudes(affine, m, a, f);
    for (int j = 0; j < 2; ++j) affine_err = std::max(affine_err, std::fabs(v[j] - (2 * m + 3 * a + f + j)));
  }
  o.require(affine_err <= 1e-10, "affine error " + fmt(affine_err));

  // Field-only stars with narrow pseudo-priors: independent, near-Gaussian conditionals.
  PhotometryCatalog cat;
  cat.filters = {"V", "B"};
  const double sd[] = {0.05, 0.05};
  const double m0[] = {6.0, 6.8}, m1[] = {8.0, 9.0};
  cat.add_star("s1", 0.0, m0, sd);
  cat.add_star("s2", 0.0, m1, sd);
  Posterior post(toy(), cat, FieldRanges::from_catalog(cat), ClusterPriorSpec{});
  auto pseudo = std::make_shared<PseudoPriorSpec>();
  pseudo->stars = {{TruncatedT6(1.0, 0.1, 0.1, 8.0), TruncatedT6(0.5, 0.03, 0.0, 1.0)},
                   {TruncatedT6(2.0, 0.3, 0.1, 8.0), TruncatedT6(0.4, 0.04, 0.0, 1.0)}};
  post.set_pseudo_prior(pseudo);
  NaturalState nat;
  nat.theta = {9.0, 0.0, 0.0, 0.0, 0.1};
  nat.stars.assign(2, StarState{1.0, 0.5, 0});
  auto state = make_chain_state(nat, post, TransformSpec::zero(2), 23);
  auto steps = StepSizes::initial(2);
  ChainRunConfig rc;
  rc.burn_in = 20000;
  rc.draws = 0;
  rc.sweep.sample_membership = false;
  rc.sweep.adapt = true;
  run_chain(state, post, TransformSpec::zero(2), steps, rc);
  steps.reset_totals();
  rc.burn_in = 0;
  rc.draws = 20000;
  rc.sweep.adapt = false;
  run_chain(state, post, TransformSpec::zero(2), steps, rc);
  double lo = 1.0, hi = 0.0;
  auto track = [&](const StepControl& s) {
    lo = std::min(lo, s.acceptance_rate());
    hi = std::max(hi, s.acceptance_rate());
  };
  for (const auto& s : steps.u) track(s);
  for (const auto& s : steps.r) track(s);
  for (const auto& s : steps.cluster) track(s);
  o.require(lo >= 0.15 && hi <= 0.35, "acceptance rates in [" + fmt(lo) + ", " + fmt(hi) + "] within [0.15, 0.35]");
  return o;
}

Outcome determinism(const fs::path& workdir) {
  const auto synth = generate_cluster(*toy(), recovery_data(7));
  const fs::path data = workdir / "determinism";
  fs::remove_all(data);
  fs::create_directories(data);
  {
    std::ofstream out(data / "phot.csv", std::ios::binary);
    write_catalog_csv(out, synth.catalog);
  }
  RunConfig cfg;
  cfg.photometry = (data / "phot.csv").string();
  cfg.burn_in = 2000;
  cfg.tuning_draws = 1000;
  cfg.thin = 10;
  cfg.draws = 5000;
  cfg.chains = 2;
  cfg.per_star = true;
  cfg.seed = 42;
  const FitInputs inputs = load_inputs(cfg);
  for (const char* run : {"a", "b"}) {
    cfg.out_dir = (data / run).string();
    write_fit_outputs(cfg.out_dir, cfg, inputs, run_fit(cfg, inputs.table, inputs.catalog));
  }
  Outcome o;
  for (const char* name : {"chain_0.csv", "chain_1.csv", "manifest.txt"}) {
    const auto a = slurp(data / "a" / name);
    o.require(!a.empty() && a == slurp(data / "b" / name), std::string(name) + " identical");
  }
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::string workdir = (fs::temp_directory_path() / "clusterfit_acceptance").string();
  app.add_option("--workdir", workdir, "Scratch directory for run outputs");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(workdir);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1 field-mass prior invariance", invariance},
      {"2 sampler exactness", exactness},
      {"3 synthetic recovery", recovery},
      {"4 tuning efficacy", tuning_efficacy},
      {"5 numeric checks", numerics},
      {"6 determinism", [&] { return determinism(workdir); }},
  };
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("error: ") + e.what();
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
