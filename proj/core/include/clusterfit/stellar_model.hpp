#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace clusterfit {

/// Ordered photometric filters and their extinction ratios relative to V.
struct FilterSet {
  std::vector<std::string> names;
  std::vector<double> kappa;

  std::size_t size() const noexcept { return names.size(); }
  /// Index of a filter by name, or size() when absent.
  std::size_t index_of(const std::string& name) const noexcept;
  /// Throws InvalidConfig when names are empty/duplicated or a kappa is not finite and positive.
  void validate() const;

  bool operator==(const FilterSet&) const = default;
};

/// The five cluster-wide parameters.
struct ClusterParams {
  double age = 9.0;  ///< log10 age in log10 years
  double feh = 0.0;  ///< [Fe/H], dex
  double heh = 0.0;  ///< [He/H], dex
  double dm = 0.0;   ///< distance modulus m - M_V, magnitudes
  double av = 0.1;   ///< V-band absorption, magnitudes (> 0)

  bool operator==(const ClusterParams&) const = default;
};

/// One (heh, feh, age) cell of the table: absolute magnitudes along initial mass.
struct Track {
  std::vector<double> mass;        ///< strictly ascending, >= 2 entries
  std::vector<double> magnitudes;  ///< row-major, mass.size() x n_filters
  /// Initial masses strictly above this value are white-dwarf remnants at the
  /// cell's age. +infinity when the track carries no remnant branch.
  double remnant_above = std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return mass.size(); }
  bool operator==(const Track&) const = default;
};

/// Tabulated stellar-evolution model on a (helium, metallicity, log-age)
/// grid with ragged mass tracks. Immutable after construction.
class IsochroneTable {
public:
  IsochroneTable() = default;

  /// Tracks are ordered helium-major, then metallicity, then age. An empty
  /// heh_grid marks a helium-free model. Throws InvalidConfig on any
  /// violated grid or track invariant.
  IsochroneTable(FilterSet filters, std::vector<double> heh_grid, std::vector<double> feh_grid,
                 std::vector<double> age_grid, std::vector<Track> tracks);

  const FilterSet& filters() const noexcept { return filters_; }
  std::size_t n_filters() const noexcept { return filters_.size(); }
  const std::vector<double>& heh_grid() const noexcept { return heh_grid_; }
  const std::vector<double>& feh_grid() const noexcept { return feh_grid_; }
  const std::vector<double>& age_grid() const noexcept { return age_grid_; }
  bool has_helium() const noexcept { return !heh_grid_.empty(); }

  const Track& track(std::size_t iheh, std::size_t ifeh, std::size_t iage) const;
  const std::vector<Track>& tracks() const noexcept { return tracks_; }

  /// Smallest tabulated mass over all tracks.
  double min_mass() const noexcept { return min_mass_; }
  /// Largest mass that every track supports.
  double max_common_mass() const noexcept { return max_common_mass_; }

  /// Non-throwing core of interpolate_magnitudes: writes n_filters()
  /// absolute magnitudes into out and returns false when the query is
  /// outside the table.
  bool try_interpolate(double mass, double age, double feh, double heh,
                       std::span<double> out) const noexcept;

  /// Interpolated remnant threshold mass at (age, feh, heh); +infinity when
  /// the model has no remnant branch there. NaN when off-grid.
  double remnant_threshold(double age, double feh, double heh) const noexcept;

  bool operator==(const IsochroneTable&) const = default;

private:
  struct Bracket {
    std::size_t lo = 0;
    double weight = 0.0;  ///< weight of index lo + 1
  };
  static bool bracket(const std::vector<double>& grid, double x, Bracket& out) noexcept;

  FilterSet filters_;
  std::vector<double> heh_grid_;
  std::vector<double> feh_grid_;
  std::vector<double> age_grid_;
  std::vector<Track> tracks_;
  double min_mass_ = 0.0;
  double max_common_mass_ = 0.0;
};

/// Absolute magnitudes at (mass, age, feh). Piecewise-linear in mass along
/// each bracketing track (extrapolating linearly below a track's lowest
/// node), then multilinear across the grid. Throws OutOfRange.
std::vector<double> interpolate_magnitudes(const IsochroneTable& table, double mass,
                                           double age, double feh, double heh = 0.0);

/// m_j = G_j + dm + kappa_j * av.
std::vector<double> to_apparent(std::span<const double> absolute, double dm, double av,
                                const FilterSet& filters);
void to_apparent_inplace(std::span<double> magnitudes, double dm, double av,
                         const FilterSet& filters) noexcept;

/// Distance in parsecs for a distance modulus.
double dm_to_distance(double dm) noexcept;
double distance_to_dm(double parsecs) noexcept;

/// Constants of the analytic toy model used to build test tables.
struct ToyModelConfig {
  FilterSet filters{{"V", "B"}, {1.0, 1.32}};
  // Main-sequence branch: G_j = a_j - b_j log10 M + c_j [Fe/H].
  std::vector<double> a{5.0, 5.8};
  std::vector<double> b{6.0, 7.5};
  std::vector<double> c{0.2, 0.3};
  // White-dwarf branch: G_j = e_j + f_j log10(max(t_cool, 1)).
  std::vector<double> e{10.0, 10.3};
  std::vector<double> f{1.0, 1.05};
  // log10 t_ms(M) = lifetime_intercept - lifetime_slope log10 M.
  double lifetime_intercept = 10.0;
  double lifetime_slope = 2.5;
  // Initial-final mass relation M_wd = ifmr_intercept + ifmr_slope M.
  double ifmr_intercept = 0.4;
  double ifmr_slope = 0.077;

  std::vector<double> feh_grid;
  std::vector<double> age_grid;
  std::vector<double> mass_grid;

  /// Defaults: [Fe/H] -1.0..0.5 step 0.25, log-age 8.0..9.7 step 0.05 and
  /// 100 log-spaced masses on [0.1, 8].
  static ToyModelConfig defaults();
};

/// Closed-form evaluation of the toy model (no table involved).
class ToyModel {
public:
  explicit ToyModel(ToyModelConfig config);

  const ToyModelConfig& config() const noexcept { return config_; }
  double log10_lifetime(double mass) const noexcept;
  /// Largest initial mass still on the main sequence at log-age `age`.
  double turnoff_mass(double age) const noexcept;
  double remnant_mass(double mass) const noexcept;
  bool is_remnant(double mass, double age) const noexcept;
  std::vector<double> magnitudes(double mass, double age, double feh) const;

private:
  ToyModelConfig config_;
};

/// Samples the toy model on the configured grids. Throws InvalidConfig on
/// non-ascending grids, non-positive masses or mismatched coefficient sizes.
IsochroneTable toy_table(const ToyModelConfig& config);

// Text format ---------------------------------------------------------------

/// Parses the line-oriented isochrone format. `source` names the input in
/// error messages. Throws ParseError (line-numbered) or InvalidConfig.
IsochroneTable parse_table(std::istream& in, const std::string& source = "");
IsochroneTable read_table(const std::string& path);
void write_table(std::ostream& out, const IsochroneTable& table);
void write_table(const std::string& path, const IsochroneTable& table);

}  // namespace clusterfit
