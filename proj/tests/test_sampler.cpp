#include <doctest.h>

#include <cmath>
#include <random>

#include "clusterfit/diagnostics.hpp"
#include "clusterfit/errors.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/synthetic.hpp"
#include "support.hpp"

using namespace clusterfit;
using clusterfit::test::kInf;
using clusterfit::test::toy;

namespace {

PhotometryCatalog catalog_of(std::initializer_list<std::array<double, 2>> mags, double pmember) {
  PhotometryCatalog c;
  c.filters = {"V", "B"};
  const double s[] = {0.05, 0.05};
  int k = 0;
  for (const auto& m : mags) c.add_star("s" + std::to_string(++k), pmember, m, s);
  return c;
}

// Field-only stars with a narrow pseudo-prior: every scalar has an
// independent, roughly Gaussian conditional.
Posterior product_target() {
  const auto cat = catalog_of({{6.0, 6.8}, {8.0, 9.0}}, 0.0);
  Posterior post(toy(), cat, FieldRanges::from_catalog(cat), ClusterPriorSpec{});
  auto pseudo = std::make_shared<PseudoPriorSpec>();
  pseudo->stars = {{TruncatedT6(1.0, 0.1, 0.1, 8.0), TruncatedT6(0.5, 0.03, 0.0, 1.0)},
                   {TruncatedT6(2.0, 0.3, 0.1, 8.0), TruncatedT6(0.4, 0.04, 0.0, 1.0)}};
  post.set_pseudo_prior(pseudo);
  return post;
}

NaturalState field_state(std::size_t n, const ClusterParams& theta) {
  NaturalState s;
  s.theta = theta;
  s.stars.assign(n, StarState{1.0, 0.5, 0});
  return s;
}

TransformSpec random_spec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  TransformSpec spec = TransformSpec::zero(n);
  for (std::size_t i = 0; i < n; ++i) {
    spec.beta_r[i] = u(rng);
    spec.beta_age[i] = u(rng);
    spec.beta_feh[i] = u(rng);
    spec.beta_dm[i] = u(rng);
    spec.r_hat[i] = 0.5 + u(rng);
  }
  spec.age_hat = 9.0 + u(rng);
  spec.feh_hat = u(rng);
  spec.dm_hat = u(rng);
  spec.gamma_feh = u(rng) * 0.1;
  spec.gamma_dm = u(rng) * 0.1;
  return spec;
}

}  // namespace

TEST_CASE("transform to natural coordinates") {
  TransformedState t;
  t.u = {1.0, 0.7};
  t.r = {0.7, 0.2};
  t.z = {1, 0};
  t.age = 9.1;
  t.feh = 0.1;
  t.dm = 0.4;
  t.v = 0.2;
  const auto identity = to_natural(t, TransformSpec::zero(2));
  CHECK(identity.stars[0].m1 == 1.0);
  CHECK(identity.theta.av == 0.2);

  auto spec = TransformSpec::zero(2);
  spec.beta_r[0] = 0.5;
  spec.r_hat[0] = 0.5;
  CHECK(to_natural(t, spec).stars[0].m1 == doctest::Approx(1.1).epsilon(1e-15));

  std::mt19937_64 rng(1);
  for (int k = 0; k < 200; ++k) {
    const auto s = random_spec(2, rng);
    const auto back = from_natural(to_natural(t, s), s);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(std::fabs(back.u[i] - t.u[i]) <= 1e-12);
      CHECK(back.r[i] == t.r[i]);
      CHECK(back.z[i] == t.z[i]);
    }
    CHECK(std::fabs(back.v - t.v) <= 1e-12);
    CHECK(back.dm == t.dm);
  }
}

TEST_CASE("the transform has unit Jacobian") {
  const auto inst = exactness_fixture();
  const Posterior post = inst.posterior();
  NaturalState nat;
  nat.theta = {9.0, 0.0, 0.0, 0.5, 0.1};
  nat.stars = {{0.9, 0.1, 1}, {1.2, 0.5, 0}};
  const double direct = post.log_posterior(nat);
  REQUIRE(std::isfinite(direct));
  std::mt19937_64 rng(2);
  for (int k = 0; k < 100; ++k) {
    const auto spec = random_spec(2, rng);
    const auto state = make_chain_state(nat, post, spec, 1);
    CHECK(std::fabs(state.log_post - direct) <= 1e-10);
  }
}

TEST_CASE("reflection") {
  CHECK(reflect(1.2, 0.0, 1.0) == doctest::Approx(0.8));
  CHECK(reflect(-0.3, 0.0, 1.0) == doctest::Approx(0.3));
  CHECK(reflect(2.5, 0.0, 1.0) == doctest::Approx(0.5));
  CHECK(reflect(0.4, 0.0, 1.0) == 0.4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-3.0, 4.0);
  for (int k = 0; k < 1000; ++k) {
    const double x = u(rng);
    const double y = reflect(x, 0.0, 1.0);
    CHECK(y >= 0.0);
    CHECK(y <= 1.0);
    // Folding is periodic with period 2 and even about each boundary.
    CHECK(std::fabs(reflect(x + 2.0, 0.0, 1.0) - y) <= 1e-12);
    CHECK(std::fabs(reflect(-x, 0.0, 1.0) - y) <= 1e-12);
  }
}

TEST_CASE("metropolis rule") {
  for (double u : {1e-12, 0.3, 0.999999}) CHECK(metropolis_accept(-1.0, -2.0, u));
  CHECK_FALSE(metropolis_accept(-kInf, -2.0, 0.5));
  CHECK_FALSE(metropolis_accept(-3.0, -2.0, 0.5));
  CHECK(metropolis_accept(-3.0, -2.0, 0.3));
}

TEST_CASE("step adaptation") {
  auto run_window = [](int accepted) {
    StepControl s{1.0};
    for (int k = 0; k < 200; ++k) {
      s.record(k < accepted);
      adapt_step(s);
    }
    return s;
  };
  CHECK(run_window(30).width == doctest::Approx(0.8));
  CHECK(run_window(50).width == 1.0);
  CHECK(run_window(70).width == doctest::Approx(1.25));
  const auto s = run_window(70);
  CHECK(s.window_proposed == 0);
  CHECK(s.total_proposed == 200);

  StepControl partial{1.0};
  for (int k = 0; k < 199; ++k) partial.record(false);
  adapt_step(partial);
  CHECK(partial.width == 1.0);

  StepControl capped{0.9};
  for (int k = 0; k < 200; ++k) capped.record(true);
  adapt_step(capped, 1.0);
  CHECK(capped.width == 1.0);
}

TEST_CASE("membership flips") {
  const auto inst = exactness_fixture();
  Posterior post = inst.posterior();
  auto pseudo = std::make_shared<PseudoPriorSpec>();
  pseudo->stars = {{TruncatedT6(0.9, 0.1, 0.1, 8.0), TruncatedT6(0.2, 0.2, 0.0, 1.0)},
                   {TruncatedT6(1.2, 0.1, 0.1, 8.0), TruncatedT6(0.5, 0.2, 0.0, 1.0)}};
  post.set_pseudo_prior(pseudo);
  const ClusterParams theta = inst.truth;
  const StarState s{1.15, 0.45, 1};

  // The flip ratio is likelihood times normalized mass density times membership prior.
  const auto mu = predicted_magnitudes(s, theta, post.table());
  const double member = cluster_log_density(post.catalog().x_row(1), post.catalog().sigma_row(1), mu) +
                        log_mass_prior(s.m1) + log_ratio_prior(s.r) + std::log(post.pmember()[1]);
  const double field = post.field_term(1) + pseudo->stars[1].log_density(s.m1, s.r) + std::log1p(-post.pmember()[1]);
  CHECK(post.star_term(1, s, theta) == doctest::Approx(member).epsilon(1e-13));
  CHECK(post.star_term(1, {s.m1, s.r, 0}, theta) == doctest::Approx(field).epsilon(1e-13));

  NaturalState nat;
  nat.theta = theta;
  nat.stars = {{0.9, 0.1, 1}, s};
  const double expected = std::min(1.0, std::exp(field - member));
  int accepted = 0;
  const int trials = 20000;
  auto state = make_chain_state(nat, post, TransformSpec::zero(2), 5);
  for (int k = 0; k < trials; ++k) {
    auto copy = state;
    copy.rng.seed(static_cast<std::uint64_t>(k));
    accepted += update_membership(copy, post, TransformSpec::zero(2), 1);
  }
  const double se = std::sqrt(expected * (1 - expected) / trials);
  CHECK(std::fabs(accepted / double(trials) - expected) <= 3 * se + 1e-12);

  // Certain members never leave.
  auto cat = inst.catalog;
  cat.pmember = {1.0, 1.0};
  const Posterior sure(inst.table, cat, inst.ranges, inst.cluster_prior);
  auto st = make_chain_state(nat, sure, TransformSpec::zero(2), 7);
  for (int k = 0; k < 1000; ++k) CHECK_FALSE(update_membership(st, sure, TransformSpec::zero(2), 0));
  CHECK(st.params.z[0] == 1);
}

TEST_CASE("single-star membership frequency matches the oracle") {
  auto inst = exactness_fixture();
  const std::size_t rows[] = {1};
  inst.catalog = inst.catalog.select(rows);
  const auto report = sampler_exactness_check(inst, 100000, 2000, 3);
  REQUIRE(report.oracle_member.size() == 1);
  CHECK(report.oracle_member[0] > 0.05);
  CHECK(report.oracle_member[0] < 0.95);
  CHECK(report.passes(3.0));
}

TEST_CASE("three-star discretized posterior matches the oracle") {
  const auto report = sampler_exactness_check(invariance_fixture(), 200000, 5000, 11);
  INFO("max z " << report.max_z_score());
  for (std::size_t i = 0; i < report.oracle_member.size(); ++i)
    INFO(i << ": " << report.oracle_member[i] << " vs " << report.chain_member[i] << " se " << report.se_member[i]);
  CHECK(report.passes(3.0));
}

TEST_CASE("degenerate sweeps") {
  const Posterior post = product_target();
  auto nat = field_state(2, {9.0, 0.0, 0.0, 0.5, 0.1});
  auto state = make_chain_state(nat, post, TransformSpec::zero(2), 1);
  auto zero = StepSizes::initial(2);
  for (auto& c : zero.u) c.width = 0.0;
  for (auto& c : zero.r) c.width = 0.0;
  for (auto& c : zero.cluster) c.width = 0.0;
  const auto before = state.params;
  const double lp = state.log_post;
  SweepOptions opts;
  opts.sample_membership = false;
  for (int k = 0; k < 50; ++k) gibbs_sweep(state, post, TransformSpec::zero(2), zero, opts);
  CHECK(state.params == before);
  CHECK(state.log_post == lp);

  const auto inst = exactness_fixture();
  const Posterior p2 = inst.posterior();
  NaturalState n2;
  n2.theta = inst.truth;
  n2.stars = {{0.9, 0.1, 1}, {1.2, 0.5, 0}};
  auto s2 = make_chain_state(n2, p2, TransformSpec::zero(2), 3);
  auto steps = StepSizes::initial(2);
  for (int k = 0; k < 2000; ++k) {
    gibbs_sweep(s2, p2, TransformSpec::zero(2), steps, opts);
    REQUIRE(s2.params.z == std::vector<int>{1, 0});
  }
}

TEST_CASE("two-parameter Gaussian target") {
  // With only field stars the cluster parameters follow their prior.
  const Posterior post = product_target();
  auto state = make_chain_state(field_state(2, {9.0, 0.0, 0.0, 0.0, 0.1}), post, TransformSpec::zero(2), 17);
  auto steps = StepSizes::initial(2);
  ChainRunConfig cfg;
  cfg.burn_in = 2000;
  cfg.draws = 0;
  cfg.sweep.sample_membership = false;
  cfg.sweep.adapt = true;
  cfg.sweep.frozen[kSlotAge] = cfg.sweep.frozen[kSlotHeh] = cfg.sweep.frozen[kSlotV] = true;
  run_chain(state, post, TransformSpec::zero(2), steps, cfg);
  cfg.burn_in = 0;
  cfg.draws = 50000;
  cfg.sweep.adapt = false;
  const auto samples = run_chain(state, post, TransformSpec::zero(2), steps, cfg);

  const auto feh = samples.cluster_series(1), dm = samples.cluster_series(3);
  const ClusterPriorSpec prior;
  auto check_moments = [](const std::vector<double>& x, double mean, double sd) {
    CHECK(std::fabs(sample_mean(x) - mean) <= 3 * batch_means_se(x));
    std::vector<double> sq(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) sq[k] = (x[k] - mean) * (x[k] - mean);
    CHECK(std::fabs(sample_mean(sq) - sd * sd) <= 3 * batch_means_se(sq));
  };
  check_moments(feh, prior.feh.mean, prior.feh.sd);
  check_moments(dm, prior.dm.mean, prior.dm.sd);
  std::vector<double> cross(feh.size());
  for (std::size_t k = 0; k < feh.size(); ++k) cross[k] = (feh[k] - prior.feh.mean) * (dm[k] - prior.dm.mean);
  CHECK(std::fabs(sample_mean(cross)) <= 3 * batch_means_se(cross));
}

TEST_CASE("adaptation settles acceptance rates on a product target") {
  const Posterior post = product_target();
  auto state = make_chain_state(field_state(2, {9.0, 0.0, 0.0, 0.0, 0.1}), post, TransformSpec::zero(2), 23);
  auto steps = StepSizes::initial(2);
  ChainRunConfig cfg;
  cfg.burn_in = 20000;
  cfg.draws = 0;
  cfg.sweep.sample_membership = false;
  cfg.sweep.adapt = true;
  run_chain(state, post, TransformSpec::zero(2), steps, cfg);
  steps.reset_totals();
  cfg.burn_in = 0;
  cfg.draws = 20000;
  cfg.sweep.adapt = false;
  const auto frozen = steps;
  run_chain(state, post, TransformSpec::zero(2), steps, cfg);
  for (std::size_t i = 0; i < 2; ++i) {
    INFO("star " << i << " u width " << steps.u[i].width << " rate " << steps.u[i].acceptance_rate() << " r width "
                  << steps.r[i].width << " rate " << steps.r[i].acceptance_rate());
    CHECK(steps.u[i].width == frozen.u[i].width);
    CHECK(steps.u[i].acceptance_rate() >= 0.15);
    CHECK(steps.u[i].acceptance_rate() <= 0.35);
    CHECK(steps.r[i].acceptance_rate() >= 0.15);
    CHECK(steps.r[i].acceptance_rate() <= 0.35);
  }
  for (std::size_t k = 0; k < kClusterSlots; ++k) {
    INFO(kClusterSlotNames[k]);
    CHECK(steps.cluster[k].width == frozen.cluster[k].width);
    CHECK(steps.cluster[k].acceptance_rate() >= 0.15);
    CHECK(steps.cluster[k].acceptance_rate() <= 0.35);
  }
}

TEST_CASE("chains are deterministic and thinned") {
  const auto inst = exactness_fixture();
  const Posterior post = inst.posterior();
  NaturalState nat;
  nat.theta = inst.truth;
  nat.stars = {{0.9, 0.1, 1}, {1.2, 0.5, 1}};
  ChainRunConfig cfg;
  cfg.burn_in = 100;
  cfg.draws = 10000;
  cfg.thin = 50;
  auto run = [&](std::uint64_t seed) {
    auto st = make_chain_state(nat, post, TransformSpec::zero(2), seed);
    auto steps = StepSizes::initial(2);
    return run_chain(st, post, TransformSpec::zero(2), steps, cfg);
  };
  const auto a = run(4), b = run(4), c = run(5);
  CHECK(a.size() == 200);
  CHECK(a.iter.front() == 50);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(ChainRunConfig{}.burn_in == 30000);

  NaturalState impossible = nat;
  impossible.theta.age = 7.0;
  CHECK_THROWS_AS(make_chain_state(impossible, post, TransformSpec::zero(2), 1), DegeneratePosterior);
}

TEST_CASE("starting states") {
  const auto& table = *toy();
  const ClusterParams truth{9.0, 0.0, 0.0, 0.5, 0.1};
  PhotometryCatalog cat;
  cat.filters = {"V", "B"};
  const double s[] = {0.03, 0.03};
  for (double m : {0.4, 0.7, 1.0, 1.4, 1.9}) {
    const auto mu = predicted_magnitudes({m, 0.0, 1}, truth, table);
    cat.add_star("m" + std::to_string(m), 0.5, mu, s);
  }
  const double off[] = {7.0, 6.0};  // far bluer than the main sequence
  cat.add_star("field", 0.5, off, s);
  const Posterior post(toy(), cat, FieldRanges::from_catalog(cat), ClusterPriorSpec{});

  const auto plain = initial_natural_state(post, truth);
  for (std::size_t i = 0; i < post.size(); ++i) {
    CHECK(plain.stars[i].r == 0.0);
    CHECK(plain.stars[i].z == 1);
  }
  CHECK(plain.stars[2].m1 == doctest::Approx(1.0).epsilon(0.05));

  ClusterParams start = truth;
  start.dm = 0.0;
  const auto screened = screened_initial_state(post, start);
  for (std::size_t i = 0; i + 1 < post.size(); ++i) CHECK(screened.stars[i].z == 1);
  CHECK(screened.stars.back().z == 0);
  CHECK(std::fabs(screened.theta.dm - 0.5) <= 0.3);
  CHECK(std::isfinite(post.log_posterior(screened)));
}
