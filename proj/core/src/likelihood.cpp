#include "clusterfit/likelihood.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "clusterfit/errors.hpp"

namespace clusterfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;  // log(2 pi)
}  // namespace

void FieldRanges::validate() const {
  if (lo.size() != hi.size()) throw DegenerateRange("field range bound counts differ");
  for (std::size_t j = 0; j < lo.size(); ++j)
    if (!(hi[j] > lo[j]) || !std::isfinite(hi[j] - lo[j]))
      throw DegenerateRange("field range for filter " + std::to_string(j) + " has max <= min");
}

FieldRanges FieldRanges::from_catalog(const PhotometryCatalog& catalog) {
  const std::size_t nf = catalog.n_filters();
  FieldRanges r;
  r.lo.assign(nf, kInf);
  r.hi.assign(nf, -kInf);
  std::vector<double> max_sd(nf, 0.0);
  for (std::size_t i = 0; i < catalog.size(); ++i)
    for (std::size_t j = 0; j < nf; ++j) {
      if (!catalog.observed(i, j)) continue;
      r.lo[j] = std::min(r.lo[j], catalog.x(i, j));
      r.hi[j] = std::max(r.hi[j], catalog.x(i, j));
      max_sd[j] = std::max(max_sd[j], catalog.sigma(i, j));
    }
  for (std::size_t j = 0; j < nf; ++j) {
    if (r.lo[j] > r.hi[j]) {
      // No star observed in this filter: it never enters any density.
      r.lo[j] = 0.0;
      r.hi[j] = 1.0;
      continue;
    }
    r.lo[j] -= max_sd[j];
    r.hi[j] += max_sd[j];
  }
  return r;
}

double combine_binary(double g1, double g2) noexcept {
  if (g1 == kInf) return g2;
  if (g2 == kInf) return g1;
  const double lo = std::min(g1, g2);
  return lo - 2.5 * std::log10(1.0 + std::pow(10.0, -std::fabs(g1 - g2) / 2.5));
}

std::vector<double> combine_binary(std::span<const double> g1, std::span<const double> g2) {
  std::vector<double> out(g1.size());
  for (std::size_t j = 0; j < g1.size(); ++j) out[j] = combine_binary(g1[j], g2[j]);
  return out;
}

bool try_predict_magnitudes(const IsochroneTable& table, double m1, double r,
                            const ClusterParams& theta, std::span<double> out,
                            std::span<double> scratch) noexcept {
  if (!table.try_interpolate(m1, theta.age, theta.feh, theta.heh, out)) return false;
  const std::size_t nf = table.n_filters();
  const double m2 = r * m1;
  if (m2 > 0.0) {
    if (!table.try_interpolate(m2, theta.age, theta.feh, theta.heh, scratch)) return false;
    const double floor = table.min_mass();
    const double taper = m2 < floor ? -2.5 * std::log10(m2 / floor) : 0.0;
    for (std::size_t j = 0; j < nf; ++j) out[j] = combine_binary(out[j], scratch[j] + taper);
  }
  to_apparent_inplace(out.first(nf), theta.dm, theta.av, table.filters());
  return true;
}

std::vector<double> predicted_magnitudes(const StarState& state, const ClusterParams& theta,
                                         const IsochroneTable& table) {
  std::vector<double> out(table.n_filters()), scratch(table.n_filters());
  if (!try_predict_magnitudes(table, state.m1, state.r, theta, out, scratch)) {
    // Re-run the throwing path to get a descriptive message.
    interpolate_magnitudes(table, state.m1, theta.age, theta.feh, theta.heh);
    interpolate_magnitudes(table, state.m2(), theta.age, theta.feh, theta.heh);
    throw OutOfRange("prediction outside table");
  }
  return out;
}

double cluster_log_density(std::span<const double> x, std::span<const double> sigma,
                           std::span<const double> mu, std::span<const std::uint8_t> present) noexcept {
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!present.empty() && !present[j]) continue;
    const double v = sigma[j] * sigma[j];
    const double d = x[j] - mu[j];
    s += -0.5 * (kLog2Pi + std::log(v)) - d * d / (2.0 * v);
  }
  return s;
}

double field_log_density(std::span<const double> x, const FieldRanges& ranges,
                         std::span<const std::uint8_t> present) {
  ranges.validate();
  double s = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    if (!present.empty() && !present[j]) continue;
    if (x[j] < ranges.lo[j] || x[j] > ranges.hi[j]) return -kInf;
    s -= std::log(ranges.hi[j] - ranges.lo[j]);
  }
  return s;
}

double total_log_likelihood(const PhotometryCatalog& catalog, std::span<const StarState> states,
                            const ClusterParams& theta, const IsochroneTable& table,
                            const FieldRanges& ranges) {
  if (catalog.filters != table.filters().names)
    throw ValidationError("catalog", "catalog filters are not aligned with the table");
  if (states.size() != catalog.size()) throw ValidationError("states", "one state per star required");
  double total = 0.0;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (states[i].z == 1) {
      const auto mu = predicted_magnitudes(states[i], theta, table);
      total += cluster_log_density(catalog.x_row(i), catalog.sigma_row(i), mu, catalog.present_row(i));
    } else {
      total += field_log_density(catalog.x_row(i), ranges, catalog.present_row(i));
    }
  }
  return total;
}

}  // namespace clusterfit
