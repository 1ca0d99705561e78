#include "clusterfit/transform.hpp"

#include <algorithm>
#include <cmath>

#include "clusterfit/errors.hpp"

namespace clusterfit {

TransformSpec TransformSpec::zero(std::size_t n_stars) {
  TransformSpec s;
  s.beta_r.assign(n_stars, 0.0);
  s.beta_age.assign(n_stars, 0.0);
  s.beta_feh.assign(n_stars, 0.0);
  s.beta_dm.assign(n_stars, 0.0);
  s.r_hat.assign(n_stars, 0.0);
  return s;
}

bool TransformSpec::is_identity() const noexcept {
  auto zeros = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
  };
  return zeros(beta_r) && zeros(beta_age) && zeros(beta_feh) && zeros(beta_dm) && gamma_feh == 0.0 &&
         gamma_dm == 0.0;
}

void TransformSpec::validate(std::size_t n_stars) const {
  for (const auto* v : {&beta_r, &beta_age, &beta_feh, &beta_dm, &r_hat}) {
    if (v->size() != n_stars) throw ValidationError("transform", "per-star coefficient count mismatch");
    for (double x : *v)
      if (!std::isfinite(x)) throw ValidationError("transform", "non-finite coefficient");
  }
  for (double x : {age_hat, feh_hat, dm_hat, gamma_feh, gamma_dm})
    if (!std::isfinite(x)) throw ValidationError("transform", "non-finite coefficient");
}

double TransformSpec::mass_offset(std::size_t i, double r, const ClusterParams& theta) const noexcept {
  return beta_r[i] * (r - r_hat[i]) + beta_age[i] * (theta.age - age_hat) + beta_feh[i] * (theta.feh - feh_hat) +
         beta_dm[i] * (theta.dm - dm_hat);
}

double TransformSpec::av_offset(const ClusterParams& theta) const noexcept {
  return gamma_feh * (theta.feh - feh_hat) + gamma_dm * (theta.dm - dm_hat);
}

NaturalState to_natural(const TransformedState& s, const TransformSpec& spec) {
  NaturalState out;
  out.theta.age = s.age;
  out.theta.feh = s.feh;
  out.theta.heh = s.heh;
  out.theta.dm = s.dm;
  out.theta.av = s.v + spec.av_offset(out.theta);
  out.stars.resize(s.u.size());
  for (std::size_t i = 0; i < s.u.size(); ++i)
    out.stars[i] = {s.u[i] + spec.mass_offset(i, s.r[i], out.theta), s.r[i], s.z[i]};
  return out;
}

TransformedState from_natural(const NaturalState& n, const TransformSpec& spec) {
  TransformedState out;
  out.age = n.theta.age;
  out.feh = n.theta.feh;
  out.heh = n.theta.heh;
  out.dm = n.theta.dm;
  out.v = n.theta.av - spec.av_offset(n.theta);
  const std::size_t N = n.stars.size();
  out.u.resize(N);
  out.r.resize(N);
  out.z.resize(N);
  for (std::size_t i = 0; i < N; ++i) {
    out.u[i] = n.stars[i].m1 - spec.mass_offset(i, n.stars[i].r, n.theta);
    out.r[i] = n.stars[i].r;
    out.z[i] = n.stars[i].z;
  }
  return out;
}

}  // namespace clusterfit
