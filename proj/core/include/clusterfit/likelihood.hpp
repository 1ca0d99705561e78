#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clusterfit/stellar_model.hpp"

namespace clusterfit {

/// Observed magnitudes and their known standard deviations, N stars x n
/// filters, row-major. A (star, filter) cell may be missing.
struct PhotometryCatalog {
  std::vector<std::string> filters;
  std::vector<std::string> ids;
  /// Prior membership probability per star; NaN when the input left it unset.
  std::vector<double> pmember;
  std::vector<double> mag;
  std::vector<double> sd;
  std::vector<std::uint8_t> present;

  std::size_t size() const noexcept { return ids.size(); }
  std::size_t n_filters() const noexcept { return filters.size(); }

  double x(std::size_t i, std::size_t j) const noexcept { return mag[i * filters.size() + j]; }
  double sigma(std::size_t i, std::size_t j) const noexcept { return sd[i * filters.size() + j]; }
  bool observed(std::size_t i, std::size_t j) const noexcept { return present[i * filters.size() + j] != 0; }

  std::span<const double> x_row(std::size_t i) const noexcept {
    return {mag.data() + i * filters.size(), filters.size()};
  }
  std::span<const double> sigma_row(std::size_t i) const noexcept {
    return {sd.data() + i * filters.size(), filters.size()};
  }
  std::span<const std::uint8_t> present_row(std::size_t i) const noexcept {
    return {present.data() + i * filters.size(), filters.size()};
  }

  /// Appends a star; NaN magnitudes mark missing cells.
  void add_star(std::string id, double pmember, std::span<const double> x, std::span<const double> sigma);

  /// Subset of stars by index, preserving order.
  PhotometryCatalog select(std::span<const std::size_t> rows) const;

  /// Throws ValidationError on duplicate ids, non-positive SDs on observed
  /// cells, stars with no observed filter, or pmember outside [0, 1].
  void validate() const;

  bool operator==(const PhotometryCatalog&) const = default;
};

/// Reorders catalog columns to `filters`. Table filters absent from the
/// catalog become missing for every star; catalog filters unknown to the
/// table raise ValidationError.
PhotometryCatalog align_to_filters(const PhotometryCatalog& catalog, const FilterSet& filters);

PhotometryCatalog parse_catalog_csv(std::istream& in, const std::string& source = "");
PhotometryCatalog read_catalog_csv(const std::string& path);
void write_catalog_csv(std::ostream& out, const PhotometryCatalog& catalog);
void write_catalog_csv(const std::string& path, const PhotometryCatalog& catalog);

/// Support of the uniform field-star density, one magnitude interval per filter.
struct FieldRanges {
  std::vector<double> lo;
  std::vector<double> hi;

  /// Per-filter observed min/max, widened on each side by the filter's
  /// largest measurement SD.
  static FieldRanges from_catalog(const PhotometryCatalog& catalog);
  /// Throws DegenerateRange when any hi <= lo.
  void validate() const;
};

/// Per-star latent state: primary mass, mass ratio, membership indicator.
struct StarState {
  double m1 = 1.0;
  double r = 0.0;
  int z = 1;

  double m2() const noexcept { return r * m1; }
  bool operator==(const StarState&) const = default;
};

/// Magnitude of the unresolved sum of two luminosities; +infinity encodes
/// zero luminosity.
double combine_binary(double g1, double g2) noexcept;
std::vector<double> combine_binary(std::span<const double> g1, std::span<const double> g2);

/// Scratch-buffer form of predicted_magnitudes; returns false when a mass or
/// cluster parameter falls outside the table. `scratch` needs n_filters().
bool try_predict_magnitudes(const IsochroneTable& table, double m1, double r,
                            const ClusterParams& theta, std::span<double> out,
                            std::span<double> scratch) noexcept;

/// Apparent magnitudes of a (possibly binary) system. Secondaries below the
/// table's lowest mass are extrapolated with their luminosity tapered
/// linearly to zero at zero mass. Throws OutOfRange.
std::vector<double> predicted_magnitudes(const StarState& state, const ClusterParams& theta,
                                         const IsochroneTable& table);

/// Gaussian log density of the observed filters. An empty `present` span
/// means every filter is observed.
double cluster_log_density(std::span<const double> x, std::span<const double> sigma,
                           std::span<const double> mu,
                           std::span<const std::uint8_t> present = {}) noexcept;

/// Uniform field-star log density over the observed filters, -infinity
/// outside the ranges. Throws DegenerateRange on an invalid range.
double field_log_density(std::span<const double> x, const FieldRanges& ranges,
                         std::span<const std::uint8_t> present = {});

/// Mixture log likelihood with memberships treated as parameters. The
/// catalog must be aligned to the table's filters. Throws OutOfRange when a
/// member star's prediction leaves the table.
double total_log_likelihood(const PhotometryCatalog& catalog, std::span<const StarState> states,
                            const ClusterParams& theta, const IsochroneTable& table,
                            const FieldRanges& ranges);

}  // namespace clusterfit
