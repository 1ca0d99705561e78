#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/sampler.hpp"

namespace clusterfit {

inline constexpr std::array<double, 5> kSummaryQuantiles{0.025, 0.16, 0.5, 0.84, 0.975};
inline constexpr std::size_t kMaxLag = 50;

double sample_mean(std::span<const double> x) noexcept;
/// Unbiased (n - 1) standard deviation; NaN for fewer than 2 values.
double sample_sd(std::span<const double> x) noexcept;
/// Linear-interpolation quantile (R type 7) of an ascending sample.
double sorted_quantile(std::span<const double> sorted, double p) noexcept;

/// Autocorrelations at lags 0..max_lag (capped at n - 1). NaN for a constant
/// series.
std::vector<double> autocorrelations(std::span<const double> x, std::size_t max_lag = kMaxLag);

/// n / (1 + 2 sum of autocorrelations), the sum truncated at the first
/// non-positive pair of consecutive lags. Clamped to n; NaN for a constant series.
double effective_sample_size(std::span<const double> x);

/// Monte-Carlo standard error of the mean from `batches` equal batches.
double batch_means_se(std::span<const double> x, std::size_t batches = 100);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  std::array<double, 5> quantiles{};
  double ess = 0.0;
  std::vector<double> acf;  ///< lags 0..kMaxLag

  double lag1() const noexcept;
};

ParameterSummary summarize_series(std::string name, std::span<const double> x);

struct StarSummary {
  std::string id;
  double p_member = 0.0;
  std::size_t member_draws = 0;
  /// Moments of m1 and r over the draws with Z = 1; NaN when there are none.
  double m1_mean = 0.0, m1_sd = 0.0, r_mean = 0.0, r_sd = 0.0;
};

struct AcceptanceRate {
  std::string proposal;
  double rate = 0.0;
};

struct ChainSummary {
  std::size_t draws = 0;
  std::vector<ParameterSummary> parameters;
  std::vector<StarSummary> stars;
  std::vector<AcceptanceRate> acceptance;
  /// One entry per star without member draws.
  std::vector<std::string> warnings;

  const ParameterSummary& parameter(const std::string& name) const;
};

/// Conditional moments of one star's masses given membership. Throws
/// EmptyConditional when Z_i is never 1.
StarSummary member_mass_summary(const SampleSet& samples, std::size_t star);

/// Requires >= 2 draws. Stars lacking member draws are listed in warnings.
ChainSummary summarize(const SampleSet& samples, const StepSizes* steps = nullptr);

/// Pools several chains' draws before summarizing (chain order preserved).
SampleSet pool_chains(std::span<const SampleSet> chains);

void write_summary_csv(std::ostream& out, const ChainSummary& summary);
void write_membership_csv(std::ostream& out, const ChainSummary& summary);
void write_summary_text(std::ostream& out, const ChainSummary& summary);

/// Rows of the machine-readable summary.
struct SummaryRow {
  std::string parameter;
  double mean, sd;
  std::array<double, 5> quantiles;
  double ess, lag1;
};
std::vector<SummaryRow> parse_summary_csv(std::istream& in, const std::string& source = "");
std::vector<StarSummary> parse_membership_csv(std::istream& in, const std::string& source = "");

// Magnitude cuts ------------------------------------------------------------------

enum class CutSide { kKeepBrighter, kKeepFainter };

/// Rows kept by a magnitude cut: observed values no fainter (or, with
/// kKeepFainter, no brighter) than `threshold`. Stars unobserved in the
/// filter are kept.
std::vector<std::size_t> magnitude_cut_rows(const PhotometryCatalog& catalog, const std::string& filter,
                                            double threshold, CutSide side = CutSide::kKeepBrighter);

}  // namespace clusterfit
