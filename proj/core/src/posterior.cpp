#include "clusterfit/posterior.hpp"

#include <array>
#include <cmath>
#include <limits>

#include "clusterfit/errors.hpp"

namespace clusterfit {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

Posterior::Posterior(std::shared_ptr<const IsochroneTable> table, const PhotometryCatalog& catalog,
                     FieldRanges ranges, ClusterPriorSpec cluster_prior, MassPriorSpec mass_prior,
                     double default_pmember, ModelOptions options)
    : table_(std::move(table)),
      ranges_(std::move(ranges)),
      cluster_prior_(cluster_prior),
      mass_prior_(mass_prior),
      options_(options) {
  if (!table_) throw ValidationError("table", "no isochrone table");
  if (table_->n_filters() > kMaxFilters) throw ValidationError("table", "too many filters");
  catalog_ = catalog.filters == table_->filters().names ? catalog : align_to_filters(catalog, table_->filters());
  catalog_.validate();
  if (ranges_.lo.size() != catalog_.n_filters()) throw ValidationError("field_ranges", "one range per filter required");
  ranges_.validate();
  cluster_prior_.validate();
  if (!(default_pmember >= 0.0 && default_pmember <= 1.0))
    throw ValidationError("default_pmember", "must lie in [0, 1]");
  pmember_.resize(catalog_.size());
  field_terms_.resize(catalog_.size());
  for (std::size_t i = 0; i < catalog_.size(); ++i) {
    pmember_[i] = std::isnan(catalog_.pmember[i]) ? default_pmember : catalog_.pmember[i];
    field_terms_[i] = field_log_density(catalog_.x_row(i), ranges_, catalog_.present_row(i));
  }
}

void Posterior::set_pseudo_prior(std::shared_ptr<const PseudoPriorSpec> pseudo) {
  if (pseudo && pseudo->stars.size() != catalog_.size())
    throw ValidationError("pseudo_prior", "one field-mass density per star required");
  pseudo_ = std::move(pseudo);
}

double Posterior::star_term(std::size_t i, const StarState& s, const ClusterParams& theta) const noexcept {
  const double lz = log_membership_prior(s.z, pmember_[i]);
  if (!(lz > -kInf)) return -kInf;
  const FieldMassPrior* field = pseudo_ ? &pseudo_->stars[i] : nullptr;
  const double lm = log_state_prior(s, mass_prior_, field, theta, *table_, options_.exclude_remnant_binaries);
  if (!(lm > -kInf)) return -kInf;
  if (s.z == 0) return lz + lm + field_terms_[i];
  std::array<double, kMaxFilters> mu{}, scratch{};
  const std::size_t nf = table_->n_filters();
  if (!try_predict_magnitudes(*table_, s.m1, s.r, theta, std::span(mu.data(), nf), std::span(scratch.data(), nf)))
    return -kInf;
  const double ll = cluster_log_density(catalog_.x_row(i), catalog_.sigma_row(i), std::span(mu.data(), nf),
                                        catalog_.present_row(i));
  return lz + lm + ll;
}

double Posterior::cluster_term(const ClusterParams& theta) const noexcept {
  return log_cluster_prior(theta, cluster_prior_);
}

double Posterior::log_posterior(const NaturalState& state) const noexcept {
  double total = cluster_term(state.theta);
  if (!(total > -kInf)) return -kInf;
  for (std::size_t i = 0; i < state.stars.size(); ++i) {
    const double t = star_term(i, state.stars[i], state.theta);
    if (!(t > -kInf)) return -kInf;
    total += t;
  }
  return total;
}

}  // namespace clusterfit
