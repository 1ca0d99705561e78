#include "clusterfit/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <istream>
#include <ostream>
#include <string>

#include "clusterfit/errors.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

void TuningConfig::validate() const {
  if (burn_in_draws == 0) throw ValidationError("burn_in", "must be positive");
  if (initial_run_draws == 0) throw ValidationError("tuning_draws", "must be positive");
  if (regression_thin == 0) throw ValidationError("thin", "must be positive");
  if (regression_thin >= initial_run_draws) throw ValidationError("thin", "must be smaller than tuning_draws");
  if (initial_run_draws / regression_thin < 3) throw ValidationError("thin", "regressions need at least 3 points");
  if (!(zero_threshold >= 0.0)) throw ValidationError("zero_threshold", "must be >= 0");
}

SlopeEstimate recentered_slope(std::span<const double> y, std::span<const double> x) {
  if (y.size() != x.size()) throw ValidationError("regression", "x and y lengths differ");
  const std::size_t n = x.size();
  if (n < 3) throw ValidationError("regression", "at least 3 pairs required");
  double mx = 0.0, my = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double xc = x[k] - mx;
    sxx += xc * xc;
    sxy += xc * (y[k] - my);
  }
  if (!(sxx > 0.0)) throw ConstantPredictor("predictor has zero variance");
  const double slope = sxy / sxx;
  double sse = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double e = y[k] - my - slope * (x[k] - mx);
    sse += e * e;
  }
  return {slope, std::sqrt(sse / static_cast<double>(n - 2) / sxx)};
}

double zero_rule(double slope, double se, std::optional<int> expected_sign, double threshold) noexcept {
  if (std::fabs(slope) < threshold * se) return 0.0;
  if (expected_sign && *expected_sign != 0 && (slope > 0.0 ? 1 : -1) != (*expected_sign > 0 ? 1 : -1)) return 0.0;
  if (slope == 0.0) return 0.0;
  return slope;
}

namespace {

enum class Coef { R, Age, Feh, Dm };

double predictor(Coef c, const SampleSet& s, std::size_t k, std::size_t i) {
  switch (c) {
    case Coef::R: return s.r[k * s.n_stars() + i];
    case Coef::Age: return s.theta[k].age;
    case Coef::Feh: return s.theta[k].feh;
    default: return s.theta[k].dm;
  }
}

double& beta(TransformSpec& spec, Coef c, std::size_t i) {
  switch (c) {
    case Coef::R: return spec.beta_r[i];
    case Coef::Age: return spec.beta_age[i];
    case Coef::Feh: return spec.beta_feh[i];
    default: return spec.beta_dm[i];
  }
}

const char* coef_name(Coef c) {
  switch (c) {
    case Coef::R: return "beta_r";
    case Coef::Age: return "beta_age";
    case Coef::Feh: return "beta_feh";
    default: return "beta_dm";
  }
}

std::optional<int> sign_for(const ExpectedSigns& s, Coef c) {
  switch (c) {
    case Coef::R: return s.beta_r;
    case Coef::Age: return s.beta_age;
    case Coef::Feh: return s.beta_feh;
    default: return s.beta_dm;
  }
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct Schedule {
  Posterior& posterior;
  const TuningConfig& cfg;
  const TuningObserver& observer;
  TuningResult& res;
  int pass = 1;

  void check(int run) const {
    if (!std::isfinite(res.state.log_post))
      throw DegeneratePosterior("tuning pass " + std::to_string(pass) + " run " + std::to_string(run) +
                                ": log posterior is not finite");
  }

  SampleSet run(int run_index, std::size_t draws, std::size_t thin, const SweepOptions& opts) {
    ChainRunConfig rc;
    rc.burn_in = 0;
    rc.draws = draws;
    rc.thin = thin;
    rc.sweep = opts;
    SampleSet s = run_chain(res.state, posterior, res.transform, res.steps, rc);
    check(run_index);
    if (observer) observer(pass, run_index, s);
    return s;
  }

  void adopt(const TransformSpec& next) {
    retransform(res.state, posterior, res.transform, next);
    res.transform = next;
  }

  // Fits the per-star mass coefficient of one predictor. Each response is
  // the primary mass with every other transform term removed.
  void fit_mass_coefficient(int run_index, Coef c, const SampleSet& s, TransformSpec& next, double& hat_out) {
    const std::size_t n = s.size(), N = s.n_stars();
    std::vector<double> x(n), y(n);
    for (std::size_t i = 0; i < N; ++i) {
      for (std::size_t k = 0; k < n; ++k) {
        x[k] = predictor(c, s, k, i);
        const double own = beta(res.transform, c, i) *
                           (x[k] - (c == Coef::R ? res.transform.r_hat[i]
                                    : c == Coef::Age ? res.transform.age_hat
                                    : c == Coef::Feh ? res.transform.feh_hat
                                                     : res.transform.dm_hat));
        y[k] = s.m1[k * N + i] - res.transform.mass_offset(i, s.r[k * N + i], s.theta[k]) + own;
      }
      double adopted = 0.0;
      SlopeEstimate est{};
      try {
        est = recentered_slope(y, x);
        adopted = zero_rule(est.slope, est.se, sign_for(cfg.signs, c), cfg.zero_threshold);
      } catch (const ConstantPredictor&) {
      }
      beta(next, c, i) = adopted;
      if (c == Coef::R) next.r_hat[i] = mean_of(x);
      res.regressions.push_back(
          {pass, run_index, std::string(coef_name(c)) + "[" + std::to_string(i) + "]", est.slope, est.se, adopted});
    }
    if (c != Coef::R) {
      std::vector<double> xs(n);
      for (std::size_t k = 0; k < n; ++k) xs[k] = predictor(c, s, k, 0);
      hat_out = mean_of(xs);
    }
  }

  // Fits gamma for A_V on the distance modulus or metallicity.
  double fit_gamma(int run_index, bool on_dm, const SampleSet& s) {
    const std::size_t n = s.size();
    std::vector<double> x(n), y(n);
    const auto& t = res.transform;
    for (std::size_t k = 0; k < n; ++k) {
      const auto& th = s.theta[k];
      x[k] = on_dm ? th.dm : th.feh;
      y[k] = th.av - (on_dm ? t.gamma_feh * (th.feh - t.feh_hat) : t.gamma_dm * (th.dm - t.dm_hat));
    }
    double adopted = 0.0;
    SlopeEstimate est{};
    try {
      est = recentered_slope(y, x);
      adopted = zero_rule(est.slope, est.se, on_dm ? cfg.signs.gamma_dm : cfg.signs.gamma_feh, cfg.zero_threshold);
    } catch (const ConstantPredictor&) {
    }
    res.regressions.push_back({pass, run_index, on_dm ? "gamma_dm" : "gamma_feh", est.slope, est.se, adopted});
    return adopted;
  }

  PseudoPriorSpec fit_pseudo(const SampleSet& s) {
    const std::size_t n = s.size(), N = s.n_stars();
    const auto& support = posterior.mass_prior();
    PseudoPriorSpec spec;
    spec.stars.reserve(N);
    for (std::size_t i = 0; i < N; ++i) {
      MassDraws members, all;
      for (std::size_t k = 0; k < n; ++k) {
        const double m = s.m1[k * N + i], r = s.r[k * N + i];
        all.m1.push_back(m);
        all.r.push_back(r);
        if (s.z[k * N + i]) {
          members.m1.push_back(m);
          members.r.push_back(r);
        }
      }
      const MassDraws& use = members.m1.size() >= 10 ? members : all;
      try {
        spec.stars.push_back(fit_pseudo_prior(std::span(&use, 1), support).stars.front());
      } catch (const DegenerateSample&) {
        // Frozen coordinate: centre a narrow density on the observed value.
        const double mm = std::clamp(mean_of(use.m1), support.lo, support.hi);
        const double rm = std::clamp(mean_of(use.r), 0.0, 1.0);
        spec.stars.push_back({TruncatedT6(mm, 0.01 * (support.hi - support.lo), support.lo, support.hi),
                              TruncatedT6(rm, 0.01, 0.0, 1.0)});
      }
    }
    return spec;
  }

  void run_pass() {
    SweepOptions opts;
    opts.adapt = true;
    opts.sample_membership = pass == 2 && cfg.sample_membership;
    const std::size_t draws = cfg.initial_run_draws;
    const std::size_t thin = cfg.regression_thin;

    // Run 0: burn-in.
    run(0, cfg.burn_in_draws, cfg.burn_in_draws, opts);

    // Run 1: beta_r on the mass ratio.
    SampleSet s1 = run(1, draws, thin, opts);
    if (cfg.fit_transform) {
      TransformSpec next = res.transform;
      double unused = 0.0;
      fit_mass_coefficient(1, Coef::R, s1, next, unused);
      adopt(next);
    }

    // Run 2: beta_age with the other cluster parameters held at run-1 means.
    {
      NaturalState nat = to_natural(res.state.params, res.transform);
      const NaturalState before = nat;
      ClusterParams mean{};
      for (const auto& t : s1.theta) {
        mean.feh += t.feh;
        mean.heh += t.heh;
        mean.dm += t.dm;
        mean.av += t.av;
      }
      const double cnt = static_cast<double>(s1.size());
      nat.theta.feh = mean.feh / cnt;
      nat.theta.heh = mean.heh / cnt;
      nat.theta.dm = mean.dm / cnt;
      nat.theta.av = mean.av / cnt;
      res.state.params = from_natural(nat, res.transform);
      refresh(res.state, posterior, res.transform);
      if (!std::isfinite(res.state.log_post)) {
        res.state.params = from_natural(before, res.transform);
        refresh(res.state, posterior, res.transform);
      }
      SweepOptions fixed = opts;
      fixed.frozen = {false, true, true, true, true};
      SampleSet s2 = run(2, draws, thin, fixed);
      if (cfg.fit_transform) {
        TransformSpec next = res.transform;
        fit_mass_coefficient(2, Coef::Age, s2, next, next.age_hat);
        adopt(next);
      }
    }

    // Run 3: distance modulus.
    SampleSet s3 = run(3, draws, thin, opts);
    if (cfg.fit_transform) {
      TransformSpec next = res.transform;
      fit_mass_coefficient(3, Coef::Dm, s3, next, next.dm_hat);
      next.gamma_dm = fit_gamma(3, true, s3);
      adopt(next);
    }

    // Run 4: metallicity.
    SampleSet s4 = run(4, draws, thin, opts);
    if (cfg.fit_transform) {
      TransformSpec next = res.transform;
      fit_mass_coefficient(4, Coef::Feh, s4, next, next.feh_hat);
      next.gamma_feh = fit_gamma(4, false, s4);
      adopt(next);
    }

    // Run 5: field-star pseudo-prior from per-star mass moments.
    SampleSet s5 = run(5, draws, 1, opts);
    res.pseudo_prior = fit_pseudo(s5);
    posterior.set_pseudo_prior(std::make_shared<const PseudoPriorSpec>(res.pseudo_prior));
    refresh(res.state, posterior, res.transform);
    check(5);

    // Run 6: step fine-tuning only.
    run(6, draws, draws, opts);
  }
};

}  // namespace

TuningResult run_tuning_schedule(Posterior& posterior, const NaturalState& start, std::uint64_t seed,
                                 const TuningConfig& config, const TuningObserver& observer) {
  config.validate();
  TuningResult res;
  res.transform = TransformSpec::zero(posterior.size());
  res.steps = StepSizes::initial(posterior.size());
  res.state = make_chain_state(start, posterior, res.transform, seed);
  res.regression_points = config.initial_run_draws / config.regression_thin;
  Schedule sched{posterior, config, observer, res};
  for (int pass = 1; pass <= 2; ++pass) {
    sched.pass = pass;
    sched.run_pass();
  }
  return res;
}

// Persistence -------------------------------------------------------------------

void write_tuning(std::ostream& out, const TransformSpec& t, const PseudoPriorSpec& pseudo, const StepSizes& steps) {
  using text::format_double;
  const std::size_t n = t.size();
  out << "stars " << n << '\n';
  out << "age_hat " << format_double(t.age_hat) << '\n';
  out << "feh_hat " << format_double(t.feh_hat) << '\n';
  out << "dm_hat " << format_double(t.dm_hat) << '\n';
  out << "gamma_feh " << format_double(t.gamma_feh) << '\n';
  out << "gamma_dm " << format_double(t.gamma_dm) << '\n';
  out << "cluster_widths";
  for (const auto& c : steps.cluster) out << ' ' << format_double(c.width);
  out << '\n';
  out << "pseudo_prior " << (pseudo.stars.empty() ? 0 : 1) << '\n';
  out << "# star beta_r beta_age beta_feh beta_dm r_hat width_u width_r m1_loc m1_scale r_loc r_scale\n";
  for (std::size_t i = 0; i < n; ++i) {
    out << "star " << i << ' ' << format_double(t.beta_r[i]) << ' ' << format_double(t.beta_age[i]) << ' '
        << format_double(t.beta_feh[i]) << ' ' << format_double(t.beta_dm[i]) << ' ' << format_double(t.r_hat[i])
        << ' ' << format_double(steps.u[i].width) << ' ' << format_double(steps.r[i].width);
    if (pseudo.stars.empty()) {
      out << " NA NA NA NA";
    } else {
      const auto& p = pseudo.stars[i];
      out << ' ' << format_double(p.m1.location()) << ' ' << format_double(p.m1.scale()) << ' '
          << format_double(p.r.location()) << ' ' << format_double(p.r.scale());
    }
    out << '\n';
  }
}

TuningArtifact parse_tuning(std::istream& in, std::size_t n_stars, const MassPriorSpec& support,
                            const std::string& source) {
  TuningArtifact a;
  a.transform = TransformSpec::zero(n_stars);
  a.steps = StepSizes::initial(n_stars);
  bool have_pseudo = false, declared = false;
  std::vector<bool> seen(n_stars, false);
  std::string line;
  std::size_t lineno = 0;
  auto num = [&](std::string_view tok) {
    const auto v = text::parse_double(tok);
    if (!v) throw ParseError(source, lineno, 0, "invalid number '" + std::string(tok) + "'");
    return *v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto tok = text::split_whitespace(body);
    const auto key = tok[0];
    auto one = [&]() {
      if (tok.size() != 2) throw ParseError(source, lineno, 0, "expected one value");
      return num(tok[1]);
    };
    if (key == "stars") {
      if (static_cast<std::size_t>(one()) != n_stars)
        throw ParseError(source, lineno, 0, "tuning file star count does not match the catalog");
      declared = true;
    } else if (key == "age_hat") a.transform.age_hat = one();
    else if (key == "feh_hat") a.transform.feh_hat = one();
    else if (key == "dm_hat") a.transform.dm_hat = one();
    else if (key == "gamma_feh") a.transform.gamma_feh = one();
    else if (key == "gamma_dm") a.transform.gamma_dm = one();
    else if (key == "cluster_widths") {
      if (tok.size() != 1 + kClusterSlots) throw ParseError(source, lineno, 0, "expected 5 widths");
      for (std::size_t k = 0; k < kClusterSlots; ++k) a.steps.cluster[k].width = num(tok[k + 1]);
    } else if (key == "pseudo_prior") {
      have_pseudo = one() != 0.0;
      if (have_pseudo) a.pseudo_prior.stars.resize(n_stars);
    } else if (key == "star") {
      if (tok.size() != 13) throw ParseError(source, lineno, 0, "star row needs 12 values");
      const auto i = static_cast<std::size_t>(num(tok[1]));
      if (i >= n_stars) throw ParseError(source, lineno, 2, "star index out of range");
      seen[i] = true;
      a.transform.beta_r[i] = num(tok[2]);
      a.transform.beta_age[i] = num(tok[3]);
      a.transform.beta_feh[i] = num(tok[4]);
      a.transform.beta_dm[i] = num(tok[5]);
      a.transform.r_hat[i] = num(tok[6]);
      a.steps.u[i].width = num(tok[7]);
      a.steps.r[i].width = num(tok[8]);
      if (have_pseudo) {
        try {
          a.pseudo_prior.stars[i] = {TruncatedT6(num(tok[9]), num(tok[10]), support.lo, support.hi),
                                     TruncatedT6(num(tok[11]), num(tok[12]), 0.0, 1.0)};
        } catch (const DegenerateSample& e) {
          throw ParseError(source, lineno, 0, e.what());
        }
      }
    } else {
      throw ParseError(source, lineno, 1, "unknown key '" + std::string(key) + "'");
    }
  }
  if (!declared) throw ParseError(source, 0, 0, "missing 'stars' line");
  for (std::size_t i = 0; i < n_stars; ++i)
    if (!seen[i]) throw ParseError(source, 0, 0, "missing row for star " + std::to_string(i));
  return a;
}

}  // namespace clusterfit
