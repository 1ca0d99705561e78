#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/posterior.hpp"
#include "clusterfit/priors.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/stellar_model.hpp"

namespace clusterfit {

struct SyntheticConfig {
  ClusterParams theta;
  std::size_t n_cluster = 100;
  std::size_t n_field = 20;
  double binary_fraction = 0.5;
  /// Photometric noise SD per filter; a single value applies to every filter.
  std::vector<double> sigma{0.03};
  /// Support of the field-star magnitudes. Empty: the cluster stars' noiseless
  /// magnitude span padded by `range_padding` on each side.
  FieldRanges ranges;
  double range_padding = 0.5;
  /// Field stars closer than this many sigma to any single or binary cluster
  /// locus point are redrawn. 0 disables the check.
  double field_min_offset_sigma = 0.0;
  /// Prior membership probability written to the catalog (NaN leaves it unset).
  double pmember = 0.5;
  MassPriorSpec mass_prior;
  std::uint64_t seed = 1;

  void validate(std::size_t n_filters) const;
};

struct TruthStar {
  std::string id;
  int z = 1;
  double m1 = 0.0;  ///< NaN for field stars
  double r = 0.0;   ///< NaN for field stars
  std::vector<double> mag;  ///< noiseless magnitudes
};

struct TruthRecord {
  ClusterParams theta;
  std::vector<std::string> filters;
  std::vector<TruthStar> stars;
  /// Mass draws rejected because they fell outside the model's domain.
  std::size_t mass_redraws = 0;
  /// Field draws rejected for lying too close to the cluster locus.
  std::size_t field_redraws = 0;
};

struct SyntheticCatalog {
  PhotometryCatalog catalog;
  TruthRecord truth;
  FieldRanges ranges;
};

/// Draws a cluster with known truth. Cluster masses follow the IMF; each star
/// is a binary with probability binary_fraction, its ratio then uniform on
/// [0, 1]. Field magnitudes are uniform over the ranges. Deterministic in seed.
SyntheticCatalog generate_cluster(const IsochroneTable& table, const SyntheticConfig& config);

void write_truth_csv(std::ostream& out, const TruthRecord& truth);
TruthRecord parse_truth_csv(std::istream& in, const std::string& source = "");

// Brute-force oracle ----------------------------------------------------------

/// Finite grids for exact enumeration. The (m1, r) cell index is
/// k = i_m1 * r.size() + i_r.
struct OracleGrid {
  std::vector<double> age, feh, heh, dm, av, m1, r;

  std::size_t theta_cells() const noexcept;
  std::size_t mass_cells() const noexcept { return m1.size() * r.size(); }
  /// Cluster parameters of Θ-cell c (age varies slowest, av fastest).
  ClusterParams theta_at(std::size_t c) const;
  ProposalGrids proposal_grids() const;
  void validate() const;
};

/// Per-star field-mass probability mass functions over the (m1, r) cells.
using FieldMassPmf = std::vector<std::vector<double>>;

struct BruteForceResult {
  std::size_t n_stars = 0;
  std::size_t n_theta = 0;
  std::size_t n_mass = 0;
  /// p(Θ-cell, Z); entry c * 2^N + mask, bit i of mask is Z_i.
  std::vector<double> theta_z;
  std::vector<double> theta;     ///< p(Θ-cell)
  std::vector<double> z_config;  ///< p(Z = mask)
  std::vector<double> p_member;  ///< p(Z_i = 1)
  /// p((m1, r) cell | Z_i = 1); NaN when p(Z_i = 1) is zero.
  std::vector<std::vector<double>> member_mass;
  /// p((m1, r) cell, Z_i = 0): depends on the field-mass prior.
  std::vector<std::vector<double>> field_mass;
};

inline constexpr std::size_t kOracleCellBudget = 10'000'000;

/// Exact posterior of the discretized model: every Θ cell, every Z and every
/// per-star (m1, r) cell, weighted by the unnormalized posterior density.
/// Field-branch mass weights come from `field_pmf` when given, otherwise from
/// the posterior's own field prior. Requires N <= 4; throws TooLarge when the
/// enumerated joint exceeds `budget` cells.
BruteForceResult brute_force_posterior(const Posterior& posterior, const OracleGrid& grid,
                                       const FieldMassPmf* field_pmf = nullptr,
                                       std::size_t budget = kOracleCellBudget);

/// Field-mass pmf proportional to `prior` on the grid, per star.
FieldMassPmf field_pmf_from_prior(const OracleGrid& grid, const PseudoPriorSpec& prior);
FieldMassPmf uniform_field_pmf(const OracleGrid& grid, std::size_t n_stars);

struct InvarianceReport {
  double theta_z = 0.0;      ///< max |p_A(Θ, Z) - p_B(Θ, Z)|
  double member_mass = 0.0;  ///< max discrepancy of p(m1, r | Z_i = 1)
  double field_mass = 0.0;   ///< max discrepancy of p(m1, r, Z_i = 0): expected > 0
  bool passes(double tolerance = 1e-10) const noexcept {
    return theta_z <= tolerance && member_mass <= tolerance && field_mass > 0.0;
  }
};

InvarianceReport pseudo_prior_invariance_check(const Posterior& posterior, const OracleGrid& grid,
                                               const FieldMassPmf& a, const FieldMassPmf& b);

/// Grid-restricted MCMC frequencies against the oracle, each with a
/// batch-means Monte-Carlo standard error.
struct ExactnessReport {
  std::size_t draws = 0;
  std::vector<double> oracle_theta, chain_theta, se_theta;
  std::vector<double> oracle_member, chain_member, se_member;
  /// Largest |chain - oracle| / se, each se floored at the binomial SE of
  /// `draws` independent draws from the oracle probability.
  double max_z_score() const noexcept;
  bool passes(double z = 3.0) const noexcept { return max_z_score() <= z; }
};

struct OracleInstance;
ExactnessReport sampler_exactness_check(const OracleInstance& instance, std::size_t draws = 100000,
                                        std::size_t burn_in = 5000, std::uint64_t seed = 1);

/// A small discretized problem on the toy table.
struct OracleInstance {
  std::shared_ptr<const IsochroneTable> table;
  PhotometryCatalog catalog;
  FieldRanges ranges;
  ClusterPriorSpec cluster_prior;
  OracleGrid grid;
  ClusterParams truth;

  Posterior posterior() const;
};

/// Three stars (a single, a binary and an off-sequence star) with a
/// uniform and a sharply peaked field-mass pmf.
OracleInstance invariance_fixture();
FieldMassPmf invariance_fixture_peaked_pmf(const OracleInstance& instance);
/// Two stars on a grid small enough for long grid-restricted chains.
OracleInstance exactness_fixture();

}  // namespace clusterfit
