#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clusterfit/posterior.hpp"
#include "clusterfit/priors.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/transform.hpp"

namespace clusterfit {

/// Expected sign (+1 / -1) per transformation coefficient; unset means no gating.
struct ExpectedSigns {
  std::optional<int> beta_r, beta_age, beta_feh, beta_dm, gamma_feh, gamma_dm;
  bool operator==(const ExpectedSigns&) const = default;
};

struct TuningConfig {
  std::size_t burn_in_draws = 30000;
  std::size_t initial_run_draws = 10000;
  std::size_t regression_thin = 50;
  double zero_threshold = 2.0;  ///< in standard errors
  ExpectedSigns signs;
  /// When false every coefficient stays zero; all runs still execute.
  bool fit_transform = true;
  /// Sample memberships during the second pass.
  bool sample_membership = true;

  void validate() const;
  bool operator==(const TuningConfig&) const = default;
};

struct SlopeEstimate {
  double slope = 0.0;
  double se = 0.0;
};

/// OLS slope of y on the mean-centered predictor x, with its standard error.
/// Needs >= 3 pairs; throws ConstantPredictor when x has no variance.
SlopeEstimate recentered_slope(std::span<const double> y, std::span<const double> x);

/// 0 when |slope| < threshold * se or the slope's sign disagrees with the
/// expected one; the slope otherwise.
double zero_rule(double slope, double se, std::optional<int> expected_sign, double threshold = 2.0) noexcept;

/// One fitted coefficient, recorded for the tuning report.
struct RegressionRecord {
  int pass = 0;
  int run = 0;
  std::string coefficient;  ///< e.g. "beta_dm[17]" or "gamma_feh"
  double slope = 0.0;
  double se = 0.0;
  double adopted = 0.0;
};

struct TuningResult {
  TransformSpec transform;
  PseudoPriorSpec pseudo_prior;
  StepSizes steps;
  ChainState state;
  std::vector<RegressionRecord> regressions;
  /// Number of draws every regression used (initial_run_draws / regression_thin).
  std::size_t regression_points = 0;
};

/// Optional hook to observe each run's retained draws (pass, run, draws).
using TuningObserver = std::function<void(int, int, const SampleSet&)>;

/// Runs both passes of the seven-run schedule (burn-in; beta_r; beta_age with
/// the other cluster parameters fixed at their run-1 means; beta_dm and
/// gamma_dm; beta_feh and gamma_feh; field-star pseudo-prior; step
/// fine-tuning). Memberships stay fixed in the first pass. Installs the
/// fitted pseudo-prior on `posterior`. Throws DegeneratePosterior with the
/// failing run when a log posterior stops being finite.
TuningResult run_tuning_schedule(Posterior& posterior, const NaturalState& start, std::uint64_t seed,
                                 const TuningConfig& config, const TuningObserver& observer = {});

// Persistence of tuned artifacts ----------------------------------------------

void write_tuning(std::ostream& out, const TransformSpec& transform, const PseudoPriorSpec& pseudo,
                  const StepSizes& steps);
struct TuningArtifact {
  TransformSpec transform;
  PseudoPriorSpec pseudo_prior;
  StepSizes steps;
};
TuningArtifact parse_tuning(std::istream& in, std::size_t n_stars, const MassPriorSpec& support = {},
                            const std::string& source = "");

}  // namespace clusterfit
