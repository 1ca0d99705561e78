#pragma once

#include <cstddef>
#include <vector>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/stellar_model.hpp"

namespace clusterfit {

/// Coefficients of the correlation-reducing linear reparameterization
///
///   M1_i = U_i + b_r,i (R_i - R^_i) + b_age,i (age - age^) + b_feh,i (feh - feh^) + b_dm,i (dm - dm^)
///   A_V  = V + g_feh (feh - feh^) + g_dm (dm - dm^)
///
/// where the hatted anchors are approximate posterior means.
struct TransformSpec {
  std::vector<double> beta_r;
  std::vector<double> beta_age;
  std::vector<double> beta_feh;
  std::vector<double> beta_dm;
  std::vector<double> r_hat;
  double age_hat = 0.0;
  double feh_hat = 0.0;
  double dm_hat = 0.0;
  double gamma_feh = 0.0;
  double gamma_dm = 0.0;

  /// Identity transform for n stars.
  static TransformSpec zero(std::size_t n_stars);

  std::size_t size() const noexcept { return beta_r.size(); }
  bool is_identity() const noexcept;
  /// Throws ValidationError on size mismatch or non-finite entries.
  void validate(std::size_t n_stars) const;

  /// M1_i - U_i for star i at (r, theta).
  double mass_offset(std::size_t i, double r, const ClusterParams& theta) const noexcept;
  /// A_V - V at theta.
  double av_offset(const ClusterParams& theta) const noexcept;

  bool operator==(const TransformSpec&) const = default;
};

/// Cluster and per-star parameters in their physical coordinates.
struct NaturalState {
  std::vector<StarState> stars;
  ClusterParams theta;
  bool operator==(const NaturalState&) const = default;
};

/// Sampler coordinates: (U_i, R_i, Z_i) per star plus age, [Fe/H], [He/H],
/// distance modulus and V.
struct TransformedState {
  std::vector<double> u;
  std::vector<double> r;
  std::vector<int> z;
  double age = 0.0;
  double feh = 0.0;
  double heh = 0.0;
  double dm = 0.0;
  double v = 0.0;

  bool operator==(const TransformedState&) const = default;
};

NaturalState to_natural(const TransformedState& state, const TransformSpec& spec);
TransformedState from_natural(const NaturalState& state, const TransformSpec& spec);

}  // namespace clusterfit
