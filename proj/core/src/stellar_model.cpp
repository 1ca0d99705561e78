#include "clusterfit/stellar_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "clusterfit/errors.hpp"

namespace clusterfit {

namespace {

bool strictly_ascending(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] > v[i - 1])) return false;
  return true;
}

bool all_finite(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

std::size_t FilterSet::index_of(const std::string& name) const noexcept {
  const auto it = std::find(names.begin(), names.end(), name);
  return static_cast<std::size_t>(it - names.begin());
}

void FilterSet::validate() const {
  if (names.empty()) throw InvalidConfig("filter set is empty");
  if (kappa.size() != names.size())
    throw InvalidConfig("filter set has " + std::to_string(names.size()) + " names but " +
                        std::to_string(kappa.size()) + " extinction ratios");
  std::set<std::string> seen;
  for (const auto& n : names) {
    if (n.empty()) throw InvalidConfig("empty filter name");
    if (!seen.insert(n).second) throw InvalidConfig("duplicate filter name '" + n + "'");
  }
  for (double k : kappa)
    if (!std::isfinite(k) || k <= 0.0) throw InvalidConfig("extinction ratio must be finite and > 0");
}

IsochroneTable::IsochroneTable(FilterSet filters, std::vector<double> heh_grid,
                               std::vector<double> feh_grid, std::vector<double> age_grid,
                               std::vector<Track> tracks)
    : filters_(std::move(filters)),
      heh_grid_(std::move(heh_grid)),
      feh_grid_(std::move(feh_grid)),
      age_grid_(std::move(age_grid)),
      tracks_(std::move(tracks)) {
  filters_.validate();
  if (feh_grid_.empty() || age_grid_.empty()) throw InvalidConfig("metallicity and age grids must be nonempty");
  for (const auto* g : {&heh_grid_, &feh_grid_, &age_grid_}) {
    if (!strictly_ascending(*g)) throw InvalidConfig("table grid is not strictly ascending");
    if (!all_finite(*g)) throw InvalidConfig("table grid has non-finite entries");
  }
  const std::size_t nheh = std::max<std::size_t>(1, heh_grid_.size());
  const std::size_t expected = nheh * feh_grid_.size() * age_grid_.size();
  if (tracks_.size() != expected)
    throw InvalidConfig("table has " + std::to_string(tracks_.size()) + " tracks, expected " +
                        std::to_string(expected));
  const std::size_t nf = filters_.size();
  min_mass_ = std::numeric_limits<double>::infinity();
  max_common_mass_ = std::numeric_limits<double>::infinity();
  for (const auto& t : tracks_) {
    if (t.mass.size() < 2) throw InvalidConfig("track has fewer than 2 mass points");
    if (!strictly_ascending(t.mass)) throw InvalidConfig("track masses not strictly ascending");
    if (t.mass.front() <= 0.0 || !all_finite(t.mass)) throw InvalidConfig("track masses must be finite and > 0");
    if (t.magnitudes.size() != t.mass.size() * nf) throw InvalidConfig("track magnitude count mismatch");
    if (!all_finite(t.magnitudes)) throw InvalidConfig("track has non-finite magnitudes");
    if (std::isnan(t.remnant_above)) throw InvalidConfig("track remnant threshold is NaN");
    min_mass_ = std::min(min_mass_, t.mass.front());
    max_common_mass_ = std::min(max_common_mass_, t.mass.back());
  }
}

const Track& IsochroneTable::track(std::size_t iheh, std::size_t ifeh, std::size_t iage) const {
  return tracks_.at((iheh * feh_grid_.size() + ifeh) * age_grid_.size() + iage);
}

bool IsochroneTable::bracket(const std::vector<double>& grid, double x, Bracket& out) noexcept {
  if (std::isnan(x)) return false;
  const std::size_t n = grid.size();
  if (n == 1) {
    if (x != grid[0]) return false;
    out = {0, 0.0};
    return true;
  }
  if (x < grid.front() || x > grid.back()) return false;
  auto it = std::upper_bound(grid.begin(), grid.end(), x);
  std::size_t lo = static_cast<std::size_t>(it - grid.begin());
  lo = lo == 0 ? 0 : lo - 1;
  lo = std::min(lo, n - 2);
  out = {lo, (x - grid[lo]) / (grid[lo + 1] - grid[lo])};
  return true;
}

namespace {

// Adds weight * G(mass) along one track into out.
bool accumulate_track(const Track& t, double mass, double weight, std::size_t nf,
                      std::span<double> out) noexcept {
  const auto& m = t.mass;
  const std::size_t n = m.size();
  if (!(mass <= m.back())) return false;
  std::size_t k = 0;
  if (mass > m.front()) {
    auto it = std::upper_bound(m.begin(), m.end(), mass);
    k = std::min(static_cast<std::size_t>(it - m.begin()) - 1, n - 2);
  }
  const double s = (mass - m[k]) / (m[k + 1] - m[k]);
  const double* g0 = t.magnitudes.data() + k * nf;
  const double* g1 = g0 + nf;
  for (std::size_t j = 0; j < nf; ++j) out[j] += weight * ((1.0 - s) * g0[j] + s * g1[j]);
  return true;
}

}  // namespace

bool IsochroneTable::try_interpolate(double mass, double age, double feh, double heh,
                                     std::span<double> out) const noexcept {
  const std::size_t nf = filters_.size();
  if (out.size() < nf || !(mass > 0.0) || !std::isfinite(mass)) return false;
  Bracket bh, bf, ba;
  if (has_helium()) {
    if (!bracket(heh_grid_, heh, bh)) return false;
  }
  if (!bracket(feh_grid_, feh, bf) || !bracket(age_grid_, age, ba)) return false;
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(nf), 0.0);
  const std::size_t nheh = has_helium() ? 2 : 1;
  for (std::size_t h = 0; h < nheh; ++h) {
    const double wh = has_helium() ? (h ? bh.weight : 1.0 - bh.weight) : 1.0;
    if (wh == 0.0) continue;
    for (std::size_t f = 0; f < 2; ++f) {
      const double wf = f ? bf.weight : 1.0 - bf.weight;
      if (wf == 0.0) continue;
      for (std::size_t a = 0; a < 2; ++a) {
        const double wa = a ? ba.weight : 1.0 - ba.weight;
        if (wa == 0.0) continue;
        const Track& t = tracks_[((bh.lo + h) * feh_grid_.size() + bf.lo + f) * age_grid_.size() + ba.lo + a];
        if (!accumulate_track(t, mass, wh * wf * wa, nf, out)) return false;
      }
    }
  }
  return true;
}

double IsochroneTable::remnant_threshold(double age, double feh, double heh) const noexcept {
  Bracket bh, bf, ba;
  if (has_helium() && !bracket(heh_grid_, heh, bh)) return std::numeric_limits<double>::quiet_NaN();
  if (!bracket(feh_grid_, feh, bf) || !bracket(age_grid_, age, ba))
    return std::numeric_limits<double>::quiet_NaN();
  double sum = 0.0;
  const std::size_t nheh = has_helium() ? 2 : 1;
  for (std::size_t h = 0; h < nheh; ++h) {
    const double wh = has_helium() ? (h ? bh.weight : 1.0 - bh.weight) : 1.0;
    if (wh == 0.0) continue;
    for (std::size_t f = 0; f < 2; ++f) {
      const double wf = f ? bf.weight : 1.0 - bf.weight;
      if (wf == 0.0) continue;
      for (std::size_t a = 0; a < 2; ++a) {
        const double wa = a ? ba.weight : 1.0 - ba.weight;
        if (wa == 0.0) continue;
        const double th =
            tracks_[((bh.lo + h) * feh_grid_.size() + bf.lo + f) * age_grid_.size() + ba.lo + a].remnant_above;
        if (std::isinf(th)) return th;
        sum += wh * wf * wa * th;
      }
    }
  }
  return sum;
}

std::vector<double> interpolate_magnitudes(const IsochroneTable& table, double mass, double age,
                                           double feh, double heh) {
  std::vector<double> out(table.n_filters());
  if (!table.try_interpolate(mass, age, feh, heh, out)) {
    std::ostringstream msg;
    msg << "query outside table: mass=" << mass << " age=" << age << " feh=" << feh;
    if (table.has_helium()) msg << " heh=" << heh;
    throw OutOfRange(msg.str());
  }
  return out;
}

std::vector<double> to_apparent(std::span<const double> absolute, double dm, double av,
                                const FilterSet& filters) {
  std::vector<double> out(absolute.begin(), absolute.end());
  to_apparent_inplace(out, dm, av, filters);
  return out;
}

void to_apparent_inplace(std::span<double> magnitudes, double dm, double av,
                         const FilterSet& filters) noexcept {
  for (std::size_t j = 0; j < magnitudes.size(); ++j) magnitudes[j] += dm + filters.kappa[j] * av;
}

double dm_to_distance(double dm) noexcept { return std::pow(10.0, (dm + 5.0) / 5.0); }

double distance_to_dm(double parsecs) noexcept { return 5.0 * std::log10(parsecs) - 5.0; }

// Toy model ------------------------------------------------------------------

ToyModelConfig ToyModelConfig::defaults() {
  ToyModelConfig c;
  for (int i = 0; i <= 6; ++i) c.feh_grid.push_back(-1.0 + 0.25 * i);
  for (int i = 0; i <= 34; ++i) c.age_grid.push_back(8.0 + 0.05 * i);
  c.age_grid.back() = 9.7;
  const int n = 100;
  const double lo = std::log(0.1), hi = std::log(8.0);
  for (int i = 0; i < n; ++i) c.mass_grid.push_back(std::exp(lo + (hi - lo) * i / (n - 1)));
  c.mass_grid.front() = 0.1;
  c.mass_grid.back() = 8.0;
  return c;
}

ToyModel::ToyModel(ToyModelConfig config) : config_(std::move(config)) {
  config_.filters.validate();
  const std::size_t nf = config_.filters.size();
  for (const auto* v : {&config_.a, &config_.b, &config_.c, &config_.e, &config_.f})
    if (v->size() != nf) throw InvalidConfig("toy model coefficient count does not match filters");
}

double ToyModel::log10_lifetime(double mass) const noexcept {
  return config_.lifetime_intercept - config_.lifetime_slope * std::log10(mass);
}

double ToyModel::turnoff_mass(double age) const noexcept {
  return std::pow(10.0, (config_.lifetime_intercept - age) / config_.lifetime_slope);
}

double ToyModel::remnant_mass(double mass) const noexcept {
  return config_.ifmr_intercept + config_.ifmr_slope * mass;
}

bool ToyModel::is_remnant(double mass, double age) const noexcept { return age > log10_lifetime(mass); }

std::vector<double> ToyModel::magnitudes(double mass, double age, double feh) const {
  const std::size_t nf = config_.filters.size();
  std::vector<double> g(nf);
  const double lt = log10_lifetime(mass);
  if (age <= lt) {
    const double lm = std::log10(mass);
    for (std::size_t j = 0; j < nf; ++j) g[j] = config_.a[j] - config_.b[j] * lm + config_.c[j] * feh;
  } else {
    const double t_cool = std::pow(10.0, age) - std::pow(10.0, lt);
    const double lc = std::log10(std::max(t_cool, 1.0));
    for (std::size_t j = 0; j < nf; ++j) g[j] = config_.e[j] + config_.f[j] * lc;
  }
  return g;
}

IsochroneTable toy_table(const ToyModelConfig& config) {
  for (const auto* g : {&config.feh_grid, &config.age_grid, &config.mass_grid}) {
    if (g->empty()) throw InvalidConfig("toy grid is empty");
    if (!strictly_ascending(*g)) throw InvalidConfig("toy grid is not strictly ascending");
  }
  if (config.mass_grid.front() <= 0.0) throw InvalidConfig("toy mass grid must be positive");
  if (config.mass_grid.size() < 2) throw InvalidConfig("toy mass grid needs at least 2 masses");
  const ToyModel model(config);
  const std::size_t nf = config.filters.size();
  std::vector<Track> tracks;
  tracks.reserve(config.feh_grid.size() * config.age_grid.size());
  for (double feh : config.feh_grid) {
    for (double age : config.age_grid) {
      Track t;
      t.mass = config.mass_grid;
      t.magnitudes.reserve(t.mass.size() * nf);
      for (double m : t.mass) {
        const auto g = model.magnitudes(m, age, feh);
        t.magnitudes.insert(t.magnitudes.end(), g.begin(), g.end());
      }
      t.remnant_above = model.turnoff_mass(age);
      tracks.push_back(std::move(t));
    }
  }
  return IsochroneTable(config.filters, {}, config.feh_grid, config.age_grid, std::move(tracks));
}

}  // namespace clusterfit
