#include "clusterfit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "clusterfit/errors.hpp"

namespace clusterfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ClusterParams natural_theta(const TransformedState& p, const TransformSpec& spec) noexcept {
  ClusterParams t{p.age, p.feh, p.heh, p.dm, 0.0};
  t.av = p.v + spec.av_offset(t);
  return t;
}

double& slot_ref(TransformedState& p, std::size_t slot) noexcept {
  switch (slot) {
    case kSlotAge: return p.age;
    case kSlotFeh: return p.feh;
    case kSlotHeh: return p.heh;
    case kSlotDm: return p.dm;
    default: return p.v;
  }
}

const std::vector<double>* slot_grid(const ProposalGrids& g, std::size_t slot) noexcept {
  switch (slot) {
    case kSlotAge: return &g.age;
    case kSlotFeh: return &g.feh;
    case kSlotHeh: return &g.heh;
    case kSlotDm: return &g.dm;
    default: return &g.av;
  }
}

// Symmetric index random walk on a grid. Returns false when the grid cannot
// move (one point) so the parameter is left alone.
bool grid_propose(const std::vector<double>& grid, double current, double width, std::mt19937_64& rng,
                  double& out) {
  const auto n = static_cast<std::ptrdiff_t>(grid.size());
  if (n <= 1) return false;
  const auto it = std::lower_bound(grid.begin(), grid.end(), current);
  if (it == grid.end() || *it != current) throw Error("grid proposal: current value is not a grid point");
  const auto k = static_cast<std::ptrdiff_t>(it - grid.begin());
  const auto reach = std::max<std::ptrdiff_t>(1, static_cast<std::ptrdiff_t>(std::llround(width)));
  const auto j = static_cast<std::ptrdiff_t>(uniform01(rng) * static_cast<double>(2 * reach));
  const std::ptrdiff_t d = j < reach ? j - reach : j - reach + 1;
  out = grid[static_cast<std::size_t>(reflect_index(k + d, n))];
  return true;
}

double propose(double current, StepControl& step, std::mt19937_64& rng) {
  return current + step.width * (2.0 * uniform01(rng) - 1.0);
}

void finish(StepControl& step, bool accepted, const SweepOptions& options, double max_width) {
  step.record(accepted);
  if (options.adapt && options.grids == nullptr) adapt_step(step, max_width);
}

}  // namespace

void StepControl::record(bool accepted) noexcept {
  ++window_proposed;
  ++total_proposed;
  if (accepted) {
    ++window_accepted;
    ++total_accepted;
  }
}

double StepControl::acceptance_rate() const noexcept {
  return total_proposed == 0 ? std::numeric_limits<double>::quiet_NaN()
                             : static_cast<double>(total_accepted) / static_cast<double>(total_proposed);
}

StepSizes StepSizes::initial(std::size_t n_stars) {
  StepSizes s;
  s.u.assign(n_stars, StepControl{0.05});
  s.r.assign(n_stars, StepControl{0.1});
  s.cluster[kSlotAge].width = 0.02;
  s.cluster[kSlotFeh].width = 0.02;
  s.cluster[kSlotHeh].width = 0.02;
  s.cluster[kSlotDm].width = 0.02;
  s.cluster[kSlotV].width = 0.01;
  s.z.width = 0.0;
  return s;
}

void StepSizes::reset_totals() noexcept {
  auto clear = [](StepControl& c) {
    c.window_accepted = c.window_proposed = 0;
    c.total_accepted = c.total_proposed = 0;
  };
  for (auto& c : u) clear(c);
  for (auto& c : r) clear(c);
  for (auto& c : cluster) clear(c);
  clear(z);
}

void adapt_step(StepControl& step, double max_width) noexcept {
  if (step.window_proposed < StepSizes::kWindow) return;
  const double rate = static_cast<double>(step.window_accepted) / static_cast<double>(step.window_proposed);
  if (rate < StepSizes::kLowRate) step.width *= StepSizes::kShrink;
  else if (rate > StepSizes::kHighRate) step.width = std::min(step.width * StepSizes::kGrow, max_width);
  step.window_accepted = 0;
  step.window_proposed = 0;
}

double reflect(double value, double lo, double hi) noexcept {
  const double len = hi - lo;
  double y = std::fmod(value - lo, 2.0 * len);
  if (y < 0.0) y += 2.0 * len;
  if (y > len) y = 2.0 * len - y;
  return lo + y;
}

std::ptrdiff_t reflect_index(std::ptrdiff_t index, std::ptrdiff_t n) noexcept {
  std::ptrdiff_t y = index % (2 * n);
  if (y < 0) y += 2 * n;
  if (y >= n) y = 2 * n - 1 - y;
  return y;
}

bool metropolis_accept(double log_target_new, double log_target_old, double uniform_draw) noexcept {
  if (!(log_target_new > -kInf)) return false;
  return std::log(uniform_draw) < log_target_new - log_target_old;
}

double uniform01(std::mt19937_64& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void refresh(ChainState& state, const Posterior& posterior, const TransformSpec& spec) {
  const auto& p = state.params;
  const ClusterParams theta = natural_theta(p, spec);
  const std::size_t n = p.u.size();
  state.star_terms.resize(n);
  state.cluster_term = posterior.cluster_term(theta);
  double total = state.cluster_term;
  for (std::size_t i = 0; i < n; ++i) {
    state.star_terms[i] = posterior.star_term(i, {p.u[i] + spec.mass_offset(i, p.r[i], theta), p.r[i], p.z[i]}, theta);
    total += state.star_terms[i];
  }
  state.log_post = std::isnan(total) ? -kInf : total;
}

ChainState make_chain_state(const NaturalState& natural, const Posterior& posterior, const TransformSpec& spec,
                            std::uint64_t seed) {
  if (natural.stars.size() != posterior.size()) throw ValidationError("state", "one star state per catalog star");
  spec.validate(posterior.size());
  ChainState s;
  s.params = from_natural(natural, spec);
  s.rng.seed(seed);
  refresh(s, posterior, spec);
  if (!std::isfinite(s.log_post)) throw DegeneratePosterior("log posterior is not finite at the initial state");
  return s;
}

void retransform(ChainState& state, const Posterior& posterior, const TransformSpec& old_spec,
                 const TransformSpec& new_spec) {
  const NaturalState natural = to_natural(state.params, old_spec);
  state.params = from_natural(natural, new_spec);
  refresh(state, posterior, new_spec);
}

NaturalState initial_natural_state(const Posterior& posterior, const ClusterParams& theta0) {
  const auto& table = posterior.table();
  const auto& cat = posterior.catalog();
  const auto& mp = posterior.mass_prior();
  auto nearest = [](const std::vector<double>& g, double x) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < g.size(); ++k)
      if (std::fabs(g[k] - x) < std::fabs(g[best] - x)) best = k;
    return best;
  };
  const std::size_t ih = table.has_helium() ? nearest(table.heh_grid(), theta0.heh) : 0;
  const Track& track = table.track(ih, nearest(table.feh_grid(), theta0.feh), nearest(table.age_grid(), theta0.age));
  std::vector<double> candidates;
  for (double m : track.mass)
    if (m >= mp.lo && m <= mp.hi && m <= table.max_common_mass()) candidates.push_back(m);

  const std::size_t nf = table.n_filters();
  std::vector<double> mu(nf), scratch(nf);
  NaturalState out;
  out.theta = theta0;
  out.stars.resize(posterior.size());
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    std::size_t jb = nf;
    for (std::size_t j = 0; j < nf; ++j)
      if (cat.observed(i, j) && (jb == nf || cat.x(i, j) < cat.x(i, jb))) jb = j;
    double best_m = std::clamp(1.0, mp.lo, std::min(mp.hi, table.max_common_mass()));
    double best_d = kInf;
    for (double m : candidates) {
      if (!try_predict_magnitudes(table, m, 0.0, theta0, mu, scratch)) continue;
      const double d = std::fabs(mu[jb] - cat.x(i, jb));
      if (d < best_d) {
        best_d = d;
        best_m = m;
      }
    }
    out.stars[i] = {best_m, 0.0, posterior.pmember()[i] >= 0.5 ? 1 : 0};
  }
  return out;
}

namespace {

struct StarFit {
  double member = -kInf;
  double m1 = 1.0;
  double r = 0.0;
};

StarFit best_member_fit(const Posterior& posterior, std::size_t i, const ClusterParams& theta,
                        const std::vector<double>& masses) {
  static constexpr double kRatios[] = {0.0, 0.3, 0.5, 0.7, 0.85, 1.0};
  StarFit best;
  for (double m : masses)
    for (double r : kRatios) {
      const double t = posterior.star_term(i, {m, r, 1}, theta);
      if (t > best.member) best = {t, m, r};
    }
  return best;
}

double field_side(const Posterior& posterior, std::size_t i) {
  return posterior.field_term(i) + std::log1p(-posterior.pmember()[i]);
}

double screening_score(const Posterior& posterior, const ClusterParams& theta, const std::vector<double>& masses) {
  double total = posterior.cluster_term(theta);
  if (!std::isfinite(total)) return -kInf;
  for (std::size_t i = 0; i < posterior.size(); ++i)
    total += std::max(best_member_fit(posterior, i, theta, masses).member, field_side(posterior, i));
  return total;
}

}  // namespace

NaturalState screened_initial_state(const Posterior& posterior, const ClusterParams& theta0) {
  const auto& table = posterior.table();
  const auto& mp = posterior.mass_prior();
  const auto& prior = posterior.cluster_prior();
  const double lo = std::max(mp.lo, table.min_mass());
  const double hi = std::min(mp.hi, table.max_common_mass());
  constexpr std::size_t kMasses = 60;
  std::vector<double> masses(kMasses);
  for (std::size_t k = 0; k < kMasses; ++k)
    masses[k] = lo * std::pow(hi / lo, static_cast<double>(k) / static_cast<double>(kMasses - 1));

  std::vector<double> ages;
  for (double a : table.age_grid())
    if (a >= prior.age_min && a <= prior.age_max) ages.push_back(a);
  if (ages.empty()) ages.push_back(theta0.age);

  ClusterParams best = theta0;
  double best_score = screening_score(posterior, theta0, masses);
  auto consider = [&](double age, double dm) {
    ClusterParams t = theta0;
    t.age = age;
    t.dm = dm;
    const double s = screening_score(posterior, t, masses);
    if (s > best_score) {
      best_score = s;
      best = t;
    }
  };
  // Coarse pass over every other age node, then a finer local pass.
  constexpr double kDmHalfWidth = 3.0, kCoarseDm = 0.2, kFineDm = 0.05;
  for (std::size_t a = 0; a < ages.size(); a += 2)
    for (double d = -kDmHalfWidth; d <= kDmHalfWidth + 1e-9; d += kCoarseDm) consider(ages[a], theta0.dm + d);
  const ClusterParams coarse = best;
  const auto at = std::lower_bound(ages.begin(), ages.end(), coarse.age);
  const std::size_t ia = static_cast<std::size_t>(at - ages.begin());
  for (std::size_t a = ia > 2 ? ia - 2 : 0; a < std::min(ages.size(), ia + 3); ++a)
    for (double d = -kCoarseDm; d <= kCoarseDm + 1e-9; d += kFineDm) consider(ages[a], coarse.dm + d);

  NaturalState out;
  out.theta = best;
  out.stars.resize(posterior.size());
  for (std::size_t i = 0; i < posterior.size(); ++i) {
    const StarFit fit = best_member_fit(posterior, i, best, masses);
    const bool member = posterior.pmember()[i] >= 0.5 && fit.member >= field_side(posterior, i);
    out.stars[i] = {fit.m1, fit.r, member ? 1 : 0};
  }
  return out;
}

bool update_membership(ChainState& state, const Posterior& posterior, const TransformSpec& spec, std::size_t i,
                       StepControl* stats) {
  auto& p = state.params;
  const ClusterParams theta = natural_theta(p, spec);
  const StarState proposal{p.u[i] + spec.mass_offset(i, p.r[i], theta), p.r[i], 1 - p.z[i]};
  const double term = posterior.star_term(i, proposal, theta);
  const bool ok = metropolis_accept(term, state.star_terms[i], uniform01(state.rng));
  if (ok) {
    p.z[i] = proposal.z;
    state.log_post += term - state.star_terms[i];
    state.star_terms[i] = term;
  }
  if (stats) stats->record(ok);
  return ok;
}

void gibbs_sweep(ChainState& state, const Posterior& posterior, const TransformSpec& spec, StepSizes& steps,
                 const SweepOptions& options) {
  auto& p = state.params;
  auto& rng = state.rng;
  const std::size_t n = p.u.size();
  const ProposalGrids* grids = options.grids;
  if (grids && !spec.is_identity()) throw Error("grid proposals require the identity transform");

  ClusterParams theta = natural_theta(p, spec);

  for (std::size_t i = 0; i < n; ++i) {
    // U_i
    {
      double u_new = 0.0;
      bool moved = true;
      if (grids) moved = grid_propose(grids->m1, p.u[i], steps.u[i].width, rng, u_new);
      else u_new = propose(p.u[i], steps.u[i], rng);
      if (moved) {
        const StarState s{u_new + spec.mass_offset(i, p.r[i], theta), p.r[i], p.z[i]};
        const double term = posterior.star_term(i, s, theta);
        const bool ok = metropolis_accept(term, state.star_terms[i], uniform01(rng));
        if (ok) {
          p.u[i] = u_new;
          state.star_terms[i] = term;
        }
        finish(steps.u[i], ok, options, kInf);
      }
    }
    // R_i, reflected into [0, 1]
    {
      double r_new = 0.0;
      bool moved = true;
      if (grids) moved = grid_propose(grids->r, p.r[i], steps.r[i].width, rng, r_new);
      else r_new = reflect(propose(p.r[i], steps.r[i], rng), 0.0, 1.0);
      if (moved) {
        const StarState s{p.u[i] + spec.mass_offset(i, r_new, theta), r_new, p.z[i]};
        const double term = posterior.star_term(i, s, theta);
        const bool ok = metropolis_accept(term, state.star_terms[i], uniform01(rng));
        if (ok) {
          p.r[i] = r_new;
          state.star_terms[i] = term;
        }
        // Reflection into a unit interval gains nothing from wider steps.
        finish(steps.r[i], ok, options, 1.0);
      }
    }
  }

  std::vector<double> terms(n);
  for (std::size_t slot = 0; slot < kClusterSlots; ++slot) {
    if (options.frozen[slot]) continue;
    double& value = slot_ref(p, slot);
    double proposed = 0.0;
    if (grids) {
      if (!grid_propose(*slot_grid(*grids, slot), value, steps.cluster[slot].width, rng, proposed)) continue;
    } else {
      proposed = propose(value, steps.cluster[slot], rng);
    }
    const double saved = value;
    value = proposed;
    const ClusterParams t_new = natural_theta(p, spec);
    double total = posterior.cluster_term(t_new);
    const double cluster_new = total;
    for (std::size_t i = 0; i < n && total > -kInf; ++i) {
      terms[i] = posterior.star_term(i, {p.u[i] + spec.mass_offset(i, p.r[i], t_new), p.r[i], p.z[i]}, t_new);
      total += terms[i];
    }
    double current = state.cluster_term;
    for (double t : state.star_terms) current += t;
    const bool ok = metropolis_accept(total, current, uniform01(rng));
    if (ok) {
      theta = t_new;
      state.cluster_term = cluster_new;
      state.star_terms.swap(terms);
      terms.resize(n);
    } else {
      value = saved;
    }
    finish(steps.cluster[slot], ok, options, kInf);
  }

  if (options.sample_membership)
    for (std::size_t i = 0; i < n; ++i) update_membership(state, posterior, spec, i, &steps.z);

  double total = state.cluster_term;
  for (double t : state.star_terms) total += t;
  state.log_post = total;
}

void SampleSet::append(std::int64_t iteration, double lp, const NaturalState& natural) {
  iter.push_back(iteration);
  log_post.push_back(lp);
  theta.push_back(natural.theta);
  for (const auto& s : natural.stars) {
    z.push_back(static_cast<std::uint8_t>(s.z));
    m1.push_back(s.m1);
    r.push_back(s.r);
  }
}

double cluster_value(const ClusterParams& theta, std::size_t index) noexcept {
  switch (index) {
    case 0: return theta.age;
    case 1: return theta.feh;
    case 2: return theta.heh;
    case 3: return theta.dm;
    default: return theta.av;
  }
}

std::vector<double> SampleSet::cluster_series(std::size_t index) const {
  std::vector<double> out(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) out[k] = cluster_value(theta[k], index);
  return out;
}

SampleSet run_chain(ChainState& state, const Posterior& posterior, const TransformSpec& spec, StepSizes& steps,
                    const ChainRunConfig& config) {
  if (!std::isfinite(state.log_post)) throw DegeneratePosterior("log posterior is not finite at the initial state");
  if (config.thin == 0) throw ValidationError("thin", "must be positive");
  SampleSet out;
  out.star_ids = posterior.catalog().ids;
  for (std::size_t k = 0; k < config.burn_in; ++k) gibbs_sweep(state, posterior, spec, steps, config.sweep);
  const std::size_t kept = config.draws / config.thin;
  out.iter.reserve(kept);
  out.log_post.reserve(kept);
  out.theta.reserve(kept);
  out.z.reserve(kept * posterior.size());
  out.m1.reserve(kept * posterior.size());
  out.r.reserve(kept * posterior.size());
  for (std::size_t k = 1; k <= config.draws; ++k) {
    gibbs_sweep(state, posterior, spec, steps, config.sweep);
    if (k % config.thin == 0) out.append(static_cast<std::int64_t>(k), state.log_post, to_natural(state.params, spec));
  }
  return out;
}

}  // namespace clusterfit
