#include "clusterfit/priors.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <numbers>

#include "clusterfit/errors.hpp"

namespace clusterfit {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double t6_cdf(double t) {
  static const boost::math::students_t dist(TruncatedT6::kDof);
  return boost::math::cdf(dist, t);
}

// log of the t6 density at standardized t (untruncated, unit scale).
double t6_log_pdf(double t) noexcept {
  // Gamma(7/2) / (sqrt(6 pi) Gamma(3)) = 15 sqrt(pi)/8 / (2 sqrt(6 pi)) = 15 / (16 sqrt 6)
  static const double log_c = std::log(15.0 / (16.0 * std::sqrt(6.0)));
  return log_c - 3.5 * std::log1p(t * t / TruncatedT6::kDof);
}

}  // namespace

double GaussianPrior::log_density(double x) const noexcept {
  const double z = (x - mean) / sd;
  return -kHalfLog2Pi - std::log(sd) - 0.5 * z * z;
}

void ClusterPriorSpec::validate() const {
  for (const auto* g : {&feh, &heh, &dm, &log_av})
    if (!(g->sd > 0.0) || !std::isfinite(g->mean)) throw ValidationError("prior", "Gaussian prior needs finite mean and sd > 0");
  if (!(age_max > age_min)) throw ValidationError("age_range", "age_max must exceed age_min");
}

double log_mass_prior(double m1, const MassPriorSpec& spec) noexcept {
  if (!(m1 >= spec.lo && m1 <= spec.hi)) return -kInf;
  const double a = (std::log10(spec.lo) - spec.log10_mean) / spec.log10_sd;
  const double b = (std::log10(spec.hi) - spec.log10_mean) / spec.log10_sd;
  const double log_norm = std::log(normal_cdf(b) - normal_cdf(a));
  const double z = (std::log10(m1) - spec.log10_mean) / spec.log10_sd;
  return -kHalfLog2Pi - std::log(spec.log10_sd) - 0.5 * z * z - log_norm - std::log(m1 * std::numbers::ln10);
}

double log_ratio_prior(double r) noexcept { return (r >= 0.0 && r <= 1.0) ? 0.0 : -kInf; }

double log_cluster_prior(const ClusterParams& theta, const ClusterPriorSpec& spec) noexcept {
  if (!(theta.age >= spec.age_min && theta.age <= spec.age_max)) return -kInf;
  if (!(theta.av > 0.0)) return -kInf;
  const double log_av = std::log(theta.av);
  return spec.feh.log_density(theta.feh) + spec.heh.log_density(theta.heh) + spec.dm.log_density(theta.dm) +
         spec.log_av.log_density(log_av) - log_av;
}

double log_membership_prior(int z, double p) noexcept {
  return z == 1 ? std::log(p) : std::log1p(-p);
}

TruncatedT6::TruncatedT6(double location, double scale, double lo, double hi)
    : location_(location), scale_(scale), lo_(lo), hi_(hi) {
  if (!(scale > 0.0) || !std::isfinite(scale) || !std::isfinite(location))
    throw DegenerateSample("truncated t6 needs a finite location and scale > 0");
  if (!(hi > lo)) throw DegenerateSample("truncated t6 support is empty");
  const double mass = t6_cdf((hi - location) / scale) - t6_cdf((lo - location) / scale);
  if (!(mass > 0.0)) throw DegenerateSample("truncated t6 support carries no probability");
  log_norm_ = std::log(mass);
}

double TruncatedT6::log_density(double x) const noexcept {
  if (!(x >= lo_ && x <= hi_)) return -kInf;
  return t6_log_pdf((x - location_) / scale_) - std::log(scale_) - log_norm_;
}

PseudoPriorSpec fit_pseudo_prior(std::span<const MassDraws> draws, const MassPriorSpec& support) {
  const double shrink = std::sqrt((TruncatedT6::kDof - 2.0) / TruncatedT6::kDof);
  auto moments = [](const std::vector<double>& v, std::size_t star, const char* what) {
    if (v.size() < 10)
      throw DegenerateSample("star " + std::to_string(star) + ": fewer than 10 " + what + " draws");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double var = ss / static_cast<double>(v.size() - 1);
    if (!(var > 0.0)) throw DegenerateSample("star " + std::to_string(star) + ": " + what + " draws have zero variance");
    return std::pair{mean, std::sqrt(var)};
  };
  PseudoPriorSpec spec;
  spec.stars.reserve(draws.size());
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const auto [mm, ms] = moments(draws[i].m1, i, "m1");
    const auto [rm, rs] = moments(draws[i].r, i, "r");
    spec.stars.push_back({TruncatedT6(mm, ms * shrink, support.lo, support.hi), TruncatedT6(rm, rs * shrink, 0.0, 1.0)});
  }
  return spec;
}

bool is_excluded_remnant_binary(const StarState& state, const ClusterParams& theta,
                                const IsochroneTable& table, double min_secondary) noexcept {
  if (!(state.m2() >= min_secondary)) return false;
  const double threshold = table.remnant_threshold(theta.age, theta.feh, theta.heh);
  return state.m1 > threshold;  // false for NaN and +inf thresholds
}

double log_state_prior(const StarState& state, const MassPriorSpec& mass_prior, const FieldMassPrior* field,
                       const ClusterParams& theta, const IsochroneTable& table,
                       bool exclude_remnant_binaries) noexcept {
  if (state.z == 0 && field != nullptr) return field->log_density(state.m1, state.r);
  const double lp = log_mass_prior(state.m1, mass_prior) + log_ratio_prior(state.r);
  if (state.z == 1 && exclude_remnant_binaries && std::isfinite(lp) && is_excluded_remnant_binary(state, theta, table))
    return -kInf;
  return lp;
}

}  // namespace clusterfit
