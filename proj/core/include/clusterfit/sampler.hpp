#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "clusterfit/posterior.hpp"
#include "clusterfit/transform.hpp"

namespace clusterfit {

/// Index of each cluster-level scalar in StepSizes::cluster and SweepOptions::frozen.
enum ClusterSlot : std::size_t { kSlotAge = 0, kSlotFeh, kSlotHeh, kSlotDm, kSlotV, kClusterSlots };
inline constexpr std::array<const char*, kClusterSlots> kClusterSlotNames{"theta_age", "theta_feh", "theta_heh",
                                                                          "theta_dm", "v"};

/// Full sampler state: coordinates, cached log-posterior pieces, RNG.
struct ChainState {
  TransformedState params;
  std::vector<double> star_terms;
  double cluster_term = 0.0;
  double log_post = 0.0;
  std::mt19937_64 rng;
};

/// Proposal half-width of one scalar with its acceptance bookkeeping.
struct StepControl {
  double width = 0.1;
  std::uint32_t window_accepted = 0;
  std::uint32_t window_proposed = 0;
  std::uint64_t total_accepted = 0;
  std::uint64_t total_proposed = 0;

  void record(bool accepted) noexcept;
  double acceptance_rate() const noexcept;
  bool operator==(const StepControl&) const = default;
};

struct StepSizes {
  static constexpr std::uint32_t kWindow = 200;
  static constexpr double kLowRate = 0.20;
  static constexpr double kHighRate = 0.30;
  static constexpr double kShrink = 0.8;
  static constexpr double kGrow = 1.25;

  std::vector<StepControl> u;
  std::vector<StepControl> r;
  std::array<StepControl, kClusterSlots> cluster{};
  /// Acceptance bookkeeping for membership flips (never adapted).
  StepControl z;

  /// Starting widths for n stars.
  static StepSizes initial(std::size_t n_stars);
  void reset_totals() noexcept;
  bool operator==(const StepSizes&) const = default;
};

/// Once 200 proposals have accumulated: shrink the width by 0.8 when fewer
/// than 20% were accepted, grow it by 1.25 (up to max_width) above 30%, and
/// restart the window.
void adapt_step(StepControl& step, double max_width = std::numeric_limits<double>::infinity()) noexcept;

/// Folds value into [lo, hi] by repeated mirror reflection.
double reflect(double value, double lo, double hi) noexcept;

/// Index analogue of reflect for a grid of n points: mirrors about -1/2 and
/// n - 1/2 so that index random walks stay symmetric.
std::ptrdiff_t reflect_index(std::ptrdiff_t index, std::ptrdiff_t n) noexcept;

/// Metropolis rule for symmetric proposals.
bool metropolis_accept(double log_target_new, double log_target_old, double uniform_draw) noexcept;

/// Uniform on [0, 1) from 53 random bits.
double uniform01(std::mt19937_64& rng) noexcept;

/// Optional finite grids that restrict every proposal to grid points (used to
/// compare the sampler with exact enumeration). Requires an identity
/// transform. A grid with a single point freezes its parameter.
struct ProposalGrids {
  std::vector<double> m1, r, age, feh, heh, dm, av;
};

struct SweepOptions {
  bool sample_membership = true;
  bool adapt = false;
  std::array<bool, kClusterSlots> frozen{};
  const ProposalGrids* grids = nullptr;
};

/// Recomputes every cached term and the total log posterior.
void refresh(ChainState& state, const Posterior& posterior, const TransformSpec& spec);

/// Builds a chain state at a natural-coordinate point. Throws
/// DegeneratePosterior when the log posterior there is not finite.
ChainState make_chain_state(const NaturalState& natural, const Posterior& posterior, const TransformSpec& spec,
                            std::uint64_t seed);

/// Replaces the transform while keeping the natural-coordinate state fixed.
void retransform(ChainState& state, const Posterior& posterior, const TransformSpec& old_spec,
                 const TransformSpec& new_spec);

/// Deterministic starting point: each primary mass is the tabulated mass whose
/// single-star prediction in the star's brightest observed filter is nearest
/// the observation; ratios start at 0; membership starts at pmember >= 0.5.
NaturalState initial_natural_state(const Posterior& posterior, const ClusterParams& theta0);

/// Starting point that screens out apparent field stars. Age and distance
/// modulus are searched (other parameters stay at theta0) for the point
/// maximizing the cluster prior plus, per star, the larger of its field term
/// and its best member term over a mass and ratio grid. Each star starts at
/// its best member masses there; stars whose field term wins, or whose
/// pmember is below 0.5, start as field stars.
NaturalState screened_initial_state(const Posterior& posterior, const ClusterParams& theta0);

/// One scan: (U_i, R_i) for each star, then age, [Fe/H], [He/H], distance
/// modulus and V, then each Z_i when membership sampling is enabled.
void gibbs_sweep(ChainState& state, const Posterior& posterior, const TransformSpec& spec, StepSizes& steps,
                 const SweepOptions& options);

/// Proposes flipping Z_i with (M1_i, R_i) held fixed.
bool update_membership(ChainState& state, const Posterior& posterior, const TransformSpec& spec, std::size_t i,
                       StepControl* stats = nullptr);

/// Retained draws in natural coordinates, column-major per quantity.
struct SampleSet {
  std::vector<std::string> star_ids;
  bool per_star = true;
  std::vector<std::int64_t> iter;
  std::vector<double> log_post;
  std::vector<ClusterParams> theta;
  std::vector<std::uint8_t> z;  ///< draws x stars
  std::vector<double> m1;       ///< draws x stars
  std::vector<double> r;        ///< draws x stars

  std::size_t size() const noexcept { return iter.size(); }
  std::size_t n_stars() const noexcept { return star_ids.size(); }
  void append(std::int64_t iteration, double lp, const NaturalState& natural);
  /// Series of one cluster parameter across draws (theta_age ... theta_av).
  std::vector<double> cluster_series(std::size_t index) const;
  bool operator==(const SampleSet&) const = default;
};

inline constexpr std::array<const char*, 5> kClusterParamNames{"theta_age", "theta_feh", "theta_heh", "theta_dm",
                                                               "theta_av"};
double cluster_value(const ClusterParams& theta, std::size_t index) noexcept;

struct ChainRunConfig {
  std::size_t burn_in = 30000;
  std::size_t draws = 10000;
  std::size_t thin = 1;
  SweepOptions sweep;
};

/// Runs burn_in sweeps, then `draws` sweeps keeping every thin-th state
/// (draws / thin rows). Deterministic given the state's RNG. Throws
/// DegeneratePosterior if the starting log posterior is not finite.
SampleSet run_chain(ChainState& state, const Posterior& posterior, const TransformSpec& spec, StepSizes& steps,
                    const ChainRunConfig& config);

}  // namespace clusterfit
