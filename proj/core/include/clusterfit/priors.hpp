#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/stellar_model.hpp"

namespace clusterfit {

struct GaussianPrior {
  double mean = 0.0;
  double sd = 1.0;
  double log_density(double x) const noexcept;
  bool operator==(const GaussianPrior&) const = default;
};

/// Priors on the cluster parameters: Gaussians on [Fe/H], [He/H], the
/// distance modulus and log(A_V); log-age uniform on [age_min, age_max].
struct ClusterPriorSpec {
  GaussianPrior feh{0.0, 0.3};
  GaussianPrior heh{0.0, 0.1};
  GaussianPrior dm{0.0, 1.0};
  GaussianPrior log_av{-2.3, 1.0};
  double age_min = 8.0;
  double age_max = 9.7;

  void validate() const;
  bool operator==(const ClusterPriorSpec&) const = default;
};

/// Log-normal initial mass function on log10 mass, truncated to [lo, hi].
struct MassPriorSpec {
  double log10_mean = -1.02;
  double log10_sd = 0.677;
  double lo = 0.1;
  double hi = 8.0;
  bool operator==(const MassPriorSpec&) const = default;
};

/// Normalized log density over primary mass (with the 1/(m ln 10) factor of
/// the log10 change of variable); -infinity outside [lo, hi].
double log_mass_prior(double m1, const MassPriorSpec& spec = {}) noexcept;

/// Uniform on [0, 1].
double log_ratio_prior(double r) noexcept;

double log_cluster_prior(const ClusterParams& theta, const ClusterPriorSpec& spec) noexcept;

/// z log p + (1 - z) log(1 - p).
double log_membership_prior(int z, double p) noexcept;

/// Student-t with 6 degrees of freedom truncated to [lo, hi] and normalized.
class TruncatedT6 {
public:
  static constexpr double kDof = 6.0;

  TruncatedT6() = default;
  /// Throws DegenerateSample when scale <= 0 or the support holds no mass.
  TruncatedT6(double location, double scale, double lo, double hi);

  double location() const noexcept { return location_; }
  double scale() const noexcept { return scale_; }
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  /// log of the untruncated probability of [lo, hi].
  double log_normalizer() const noexcept { return log_norm_; }
  double log_density(double x) const noexcept;

  bool operator==(const TruncatedT6&) const = default;

private:
  double location_ = 0.0;
  double scale_ = 1.0;
  double lo_ = 0.0;
  double hi_ = 1.0;
  double log_norm_ = 0.0;
};

/// Field-star mass density for one star: independent truncated t6 on the
/// primary mass and on the mass ratio.
struct FieldMassPrior {
  TruncatedT6 m1;
  TruncatedT6 r;
  double log_density(double mass, double ratio) const noexcept {
    return m1.log_density(mass) + r.log_density(ratio);
  }
  bool operator==(const FieldMassPrior&) const = default;
};

struct PseudoPriorSpec {
  std::vector<FieldMassPrior> stars;
  bool operator==(const PseudoPriorSpec&) const = default;
};

/// Per-star draws of (m1, r) used to build the pseudo-prior.
struct MassDraws {
  std::vector<double> m1;
  std::vector<double> r;
};

/// Moment-matched truncated t6 per star: location = sample mean and scale =
/// sample SD * sqrt(2/3), so the untruncated variance equals the sample
/// variance. Needs >= 10 draws per star; throws DegenerateSample on zero variance.
PseudoPriorSpec fit_pseudo_prior(std::span<const MassDraws> draws, const MassPriorSpec& support = {});

/// Prior of one star's (m1, r) given its membership. Members use the IMF and
/// the uniform ratio prior and may not pair a white-dwarf primary with a
/// secondary of 0.1 solar masses or more; field stars use `field` when
/// given, otherwise the member densities without the remnant rule.
double log_state_prior(const StarState& state, const MassPriorSpec& mass_prior,
                       const FieldMassPrior* field, const ClusterParams& theta,
                       const IsochroneTable& table, bool exclude_remnant_binaries = true) noexcept;

/// True when the primary is a white dwarf at the cluster age and the
/// secondary is at least `min_secondary` solar masses.
bool is_excluded_remnant_binary(const StarState& state, const ClusterParams& theta,
                                const IsochroneTable& table, double min_secondary = 0.1) noexcept;

}  // namespace clusterfit
