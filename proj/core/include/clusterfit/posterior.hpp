#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/priors.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/transform.hpp"

namespace clusterfit {

struct ModelOptions {
  /// Forbid member binaries with a white-dwarf primary and a secondary of
  /// at least 0.1 solar masses.
  bool exclude_remnant_binaries = true;
  bool operator==(const ModelOptions&) const = default;
};

/// Everything the unnormalized log posterior depends on: table, photometry,
/// field-star support, priors and (once fitted) the field-star pseudo-prior.
/// Immutable after setup; evaluation is thread-safe.
class Posterior {
public:
  static constexpr std::size_t kMaxFilters = 32;

  /// `catalog` is aligned to the table's filters on construction. Absent
  /// pmember values are replaced by `default_pmember`.
  Posterior(std::shared_ptr<const IsochroneTable> table, const PhotometryCatalog& catalog, FieldRanges ranges,
            ClusterPriorSpec cluster_prior, MassPriorSpec mass_prior = {}, double default_pmember = 0.5,
            ModelOptions options = {});

  std::size_t size() const noexcept { return catalog_.size(); }
  const IsochroneTable& table() const noexcept { return *table_; }
  std::shared_ptr<const IsochroneTable> table_ptr() const noexcept { return table_; }
  const PhotometryCatalog& catalog() const noexcept { return catalog_; }
  const FieldRanges& ranges() const noexcept { return ranges_; }
  const ClusterPriorSpec& cluster_prior() const noexcept { return cluster_prior_; }
  const MassPriorSpec& mass_prior() const noexcept { return mass_prior_; }
  const std::vector<double>& pmember() const noexcept { return pmember_; }
  const ModelOptions& options() const noexcept { return options_; }

  const PseudoPriorSpec* pseudo_prior() const noexcept { return pseudo_ ? pseudo_.get() : nullptr; }
  /// Installs (or clears, with nullopt-like empty pointer) the field-star mass density.
  void set_pseudo_prior(std::shared_ptr<const PseudoPriorSpec> pseudo);

  /// Uniform field log density of star i (independent of every parameter).
  double field_term(std::size_t i) const noexcept { return field_terms_[i]; }

  /// Log likelihood of star i plus its mass and membership priors.
  double star_term(std::size_t i, const StarState& state, const ClusterParams& theta) const noexcept;
  /// Log prior of the cluster parameters.
  double cluster_term(const ClusterParams& theta) const noexcept;

  double log_posterior(const NaturalState& state) const noexcept;

private:
  std::shared_ptr<const IsochroneTable> table_;
  PhotometryCatalog catalog_;
  FieldRanges ranges_;
  ClusterPriorSpec cluster_prior_;
  MassPriorSpec mass_prior_;
  std::vector<double> pmember_;
  ModelOptions options_;
  std::shared_ptr<const PseudoPriorSpec> pseudo_;
  std::vector<double> field_terms_;
};

}  // namespace clusterfit
