#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "clusterfit/diagnostics.hpp"
#include "clusterfit/priors.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/synthetic.hpp"
#include "clusterfit/tuning.hpp"

namespace clusterfit {

/// Settings of the synthetic generator used by `simulate`.
struct SimulationSettings {
  ClusterParams theta{9.0, 0.0, 0.0, 0.5, 0.1};
  std::size_t n_cluster = 100;
  std::size_t n_field = 20;
  double binary_fraction = 0.5;
  double sigma = 0.03;
  double field_offset_sigma = 5.0;
  double pmember = 0.5;
  bool operator==(const SimulationSettings&) const = default;
};

/// Everything a run needs. Text form: `key = value` lines with `#` comments.
struct RunConfig {
  std::string table;       ///< isochrone file; empty selects the built-in toy table
  std::string photometry;  ///< photometry CSV
  std::string out_dir = "clusterfit_run";
  std::uint64_t seed = 1;
  std::size_t chains = 1;

  std::size_t burn_in = 30000;
  std::size_t tuning_draws = 10000;
  std::size_t thin = 50;  ///< regression thinning during tuning
  std::size_t draws = 50000;
  std::size_t main_thin = 1;
  double zero_threshold = 2.0;
  bool fit_transform = true;
  bool sample_membership = true;
  ExpectedSigns signs;

  ClusterPriorSpec prior;
  ClusterParams init{9.0, 0.0, 0.0, 0.0, 0.1};
  double default_pmember = 0.5;
  bool exclude_wd_binaries = true;

  /// Magnitude cut applied before fitting; empty filter disables it.
  std::string max_mag_filter;
  double max_mag = 0.0;

  std::string cut_filter;
  std::vector<double> cut_thresholds;
  CutSide cut_side = CutSide::kKeepBrighter;

  bool per_star = false;
  SimulationSettings sim;

  /// Value-level checks (positivity, prior validity). Paths are not touched.
  void validate() const;
  /// validate() plus the inputs `fit` needs: a photometry path and existing files.
  void validate_for_fit() const;
  TuningConfig tuning() const;

  bool operator==(const RunConfig&) const = default;
};

/// Parses the key = value form. Unknown keys and malformed values raise
/// ParseError with line and column; invalid values raise ValidationError
/// naming the key.
RunConfig parse_config(std::string_view text, const std::string& source = "");
/// Reads a config file; relative paths inside it resolve against its directory.
RunConfig load_config(const std::string& path);
/// Every key with its value; parse_config(emit_config(c)) == c.
std::string emit_config(const RunConfig& config);

}  // namespace clusterfit
