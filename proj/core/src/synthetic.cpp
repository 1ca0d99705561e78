#include "clusterfit/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <random>

#include "clusterfit/diagnostics.hpp"
#include "clusterfit/errors.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr std::size_t kMaxRedraws = 1'000'000;

std::string star_id(char prefix, std::size_t k) {
  std::string digits = std::to_string(k + 1);
  if (digits.size() < 4) digits.insert(0, 4 - digits.size(), '0');
  return prefix + digits;
}

double imf_draw(const MassPriorSpec& spec, std::mt19937_64& rng, std::normal_distribution<double>& normal) {
  for (std::size_t k = 0; k < kMaxRedraws; ++k) {
    const double m = std::pow(10.0, spec.log10_mean + spec.log10_sd * normal(rng));
    if (m >= spec.lo && m <= spec.hi) return m;
  }
  throw Error("IMF rejection sampler made no progress");
}

// Predicted single and binary magnitudes over a mass x ratio grid.
std::vector<std::vector<double>> cluster_locus(const IsochroneTable& table, const ClusterParams& theta) {
  std::vector<std::vector<double>> locus;
  const std::size_t nf = table.n_filters();
  std::vector<double> mu(nf), scratch(nf);
  const double lo = std::log10(table.min_mass()), hi = std::log10(table.max_common_mass());
  constexpr int kMasses = 400, kRatios = 11;
  for (int a = 0; a < kMasses; ++a) {
    const double m = std::pow(10.0, lo + (hi - lo) * a / (kMasses - 1));
    for (int b = 0; b < kRatios; ++b) {
      if (try_predict_magnitudes(table, m, static_cast<double>(b) / (kRatios - 1), theta, mu, scratch))
        locus.push_back(mu);
    }
  }
  return locus;
}

}  // namespace

void SyntheticConfig::validate(std::size_t n_filters) const {
  if (!(binary_fraction >= 0.0 && binary_fraction <= 1.0))
    throw ValidationError("binary_fraction", "must lie in [0, 1]");
  if (sigma.size() != 1 && sigma.size() != n_filters)
    throw ValidationError("sigma", "give one value or one per filter");
  for (double s : sigma)
    if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("sigma", "must be positive and finite");
  if (!(std::isnan(pmember) || (pmember >= 0.0 && pmember <= 1.0)))
    throw ValidationError("pmember", "must lie in [0, 1]");
  if (!(field_min_offset_sigma >= 0.0)) throw ValidationError("field_min_offset_sigma", "must be >= 0");
  if (!(range_padding >= 0.0)) throw ValidationError("range_padding", "must be >= 0");
  if (!ranges.lo.empty()) {
    if (ranges.lo.size() != n_filters) throw ValidationError("ranges", "one range per filter required");
    ranges.validate();
  } else if (n_cluster == 0 && n_field > 0) {
    throw ValidationError("ranges", "needed when there are no cluster stars");
  }
}

SyntheticCatalog generate_cluster(const IsochroneTable& table, const SyntheticConfig& config) {
  const std::size_t nf = table.n_filters();
  config.validate(nf);
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> sigma(nf);
  for (std::size_t j = 0; j < nf; ++j) sigma[j] = config.sigma.size() == 1 ? config.sigma[0] : config.sigma[j];

  SyntheticCatalog out;
  out.catalog.filters = table.filters().names;
  out.truth.theta = config.theta;
  out.truth.filters = table.filters().names;

  std::vector<double> mu(nf), scratch(nf), x(nf);
  for (std::size_t k = 0; k < config.n_cluster; ++k) {
    StarState s;
    for (;;) {
      s.m1 = imf_draw(config.mass_prior, rng, normal);
      s.r = unit(rng) < config.binary_fraction ? unit(rng) : 0.0;
      if (try_predict_magnitudes(table, s.m1, s.r, config.theta, mu, scratch) &&
          !is_excluded_remnant_binary(s, config.theta, table))
        break;
      if (++out.truth.mass_redraws > kMaxRedraws) throw Error("no cluster mass inside the model domain");
    }
    out.truth.stars.push_back({star_id('C', k), 1, s.m1, s.r, mu});
  }

  out.ranges = config.ranges;
  if (out.ranges.lo.empty()) {
    out.ranges.lo.assign(nf, kInf);
    out.ranges.hi.assign(nf, -kInf);
    for (const auto& t : out.truth.stars) {
      for (std::size_t j = 0; j < nf; ++j) {
        out.ranges.lo[j] = std::min(out.ranges.lo[j], t.mag[j] - config.range_padding);
        out.ranges.hi[j] = std::max(out.ranges.hi[j], t.mag[j] + config.range_padding);
      }
    }
    if (config.n_cluster == 0) {
      out.ranges.lo.assign(nf, 0.0);
      out.ranges.hi.assign(nf, 1.0);
    }
    out.ranges.validate();
  }

  std::vector<std::vector<double>> locus;
  if (config.field_min_offset_sigma > 0.0 && config.n_field > 0) locus = cluster_locus(table, config.theta);
  const double min_d2 = config.field_min_offset_sigma * config.field_min_offset_sigma;
  for (std::size_t k = 0; k < config.n_field; ++k) {
    for (;;) {
      for (std::size_t j = 0; j < nf; ++j)
        x[j] = out.ranges.lo[j] + (out.ranges.hi[j] - out.ranges.lo[j]) * unit(rng);
      bool far = true;
      for (const auto& p : locus) {
        double d2 = 0.0;
        for (std::size_t j = 0; j < nf; ++j) d2 += (x[j] - p[j]) * (x[j] - p[j]) / (sigma[j] * sigma[j]);
        if (d2 < min_d2) {
          far = false;
          break;
        }
      }
      if (far) break;
      if (++out.truth.field_redraws > kMaxRedraws) throw Error("field ranges leave no room off the cluster locus");
    }
    out.truth.stars.push_back({star_id('F', k), 0, kNaN, kNaN, x});
  }

  // Noise is drawn after all truth values so that it never shifts them.
  for (const auto& t : out.truth.stars) {
    for (std::size_t j = 0; j < nf; ++j) x[j] = t.z ? t.mag[j] + sigma[j] * normal(rng) : t.mag[j];
    out.catalog.add_star(t.id, config.pmember, x, sigma);
  }
  return out;
}

void write_truth_csv(std::ostream& out, const TruthRecord& truth) {
  using text::format_double;
  out << "id,z,m1,r,theta_age,theta_feh,theta_heh,theta_dm,theta_av";
  for (const auto& f : truth.filters) out << ',' << f << "_true";
  out << '\n';
  const auto& t = truth.theta;
  for (const auto& s : truth.stars) {
    out << s.id << ',' << s.z << ',' << (s.z ? format_double(s.m1) : "NA") << ','
        << (s.z ? format_double(s.r) : "NA") << ',' << format_double(t.age) << ',' << format_double(t.feh) << ','
        << format_double(t.heh) << ',' << format_double(t.dm) << ',' << format_double(t.av);
    for (double m : s.mag) out << ',' << format_double(m);
    out << '\n';
  }
}

TruthRecord parse_truth_csv(std::istream& in, const std::string& source) {
  TruthRecord truth;
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(source, 1, 0, "empty truth file");
  ++lineno;
  const auto header = text::split(text::trim(line), ',');
  constexpr std::size_t kFixed = 9;
  if (header.size() < kFixed || header[0] != "id" || header[1] != "z")
    throw ParseError(source, 1, 1, "unexpected truth header");
  for (std::size_t k = kFixed; k < header.size(); ++k) {
    std::string name(header[k]);
    if (name.size() < 6 || name.substr(name.size() - 5) != "_true")
      throw ParseError(source, 1, k + 1, "expected <filter>_true column");
    truth.filters.push_back(name.substr(0, name.size() - 5));
  }
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto cells = text::split(body, ',');
    if (cells.size() != header.size()) throw ParseError(source, lineno, 0, "wrong number of columns");
    auto num = [&](std::size_t c) {
      if (cells[c] == "NA") return kNaN;
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(source, lineno, c + 1, "invalid number");
      return *v;
    };
    TruthStar s;
    s.id = std::string(cells[0]);
    s.z = num(1) != 0.0 ? 1 : 0;
    s.m1 = num(2);
    s.r = num(3);
    truth.theta = {num(4), num(5), num(6), num(7), num(8)};
    for (std::size_t k = kFixed; k < cells.size(); ++k) s.mag.push_back(num(k));
    truth.stars.push_back(std::move(s));
  }
  return truth;
}

// Oracle ------------------------------------------------------------------------

std::size_t OracleGrid::theta_cells() const noexcept {
  return age.size() * feh.size() * heh.size() * dm.size() * av.size();
}

ClusterParams OracleGrid::theta_at(std::size_t c) const {
  if (c >= theta_cells()) throw OutOfRange("theta cell index out of range");
  ClusterParams t;
  t.av = av[c % av.size()];
  c /= av.size();
  t.dm = dm[c % dm.size()];
  c /= dm.size();
  t.heh = heh[c % heh.size()];
  c /= heh.size();
  t.feh = feh[c % feh.size()];
  c /= feh.size();
  t.age = age[c];
  return t;
}

ProposalGrids OracleGrid::proposal_grids() const { return {m1, r, age, feh, heh, dm, av}; }

void OracleGrid::validate() const {
  const std::pair<const char*, const std::vector<double>*> axes[] = {
      {"age", &age}, {"feh", &feh}, {"heh", &heh}, {"dm", &dm}, {"av", &av}, {"m1", &m1}, {"r", &r}};
  for (const auto& [name, v] : axes) {
    if (v->empty()) throw ValidationError(std::string("grid.") + name, "needs at least one point");
    for (std::size_t k = 0; k < v->size(); ++k) {
      if (!std::isfinite((*v)[k])) throw ValidationError(std::string("grid.") + name, "non-finite point");
      if (k > 0 && !((*v)[k] > (*v)[k - 1])) throw ValidationError(std::string("grid.") + name, "must ascend");
    }
  }
}

namespace {

double log_sum_exp(std::span<const double> v) {
  double m = -kInf;
  for (double x : v) m = std::max(m, x);
  if (!(m > -kInf)) return -kInf;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

void validate_pmf(const FieldMassPmf& pmf, std::size_t n_stars, std::size_t cells) {
  if (pmf.size() != n_stars) throw ValidationError("field_pmf", "one pmf per star required");
  for (const auto& p : pmf) {
    if (p.size() != cells) throw ValidationError("field_pmf", "one probability per mass cell required");
    double s = 0.0;
    for (double v : p) {
      if (!(v >= 0.0)) throw ValidationError("field_pmf", "probabilities must be >= 0");
      s += v;
    }
    if (std::fabs(s - 1.0) > 1e-12) throw ValidationError("field_pmf", "must sum to 1");
  }
}

// Per-star log weights of every (m1, r) cell in each membership branch at one Θ.
void star_weights(const Posterior& post, const OracleGrid& g, const FieldMassPmf* pmf, std::size_t i,
                  const ClusterParams& theta, std::vector<double>& w1, std::vector<double>& w0) {
  const std::size_t nr = g.r.size();
  const double lz0 = log_membership_prior(0, post.pmember()[i]);
  for (std::size_t a = 0; a < g.m1.size(); ++a) {
    for (std::size_t b = 0; b < nr; ++b) {
      const std::size_t k = a * nr + b;
      w1[k] = post.star_term(i, {g.m1[a], g.r[b], 1}, theta);
      if (pmf) {
        const double p = (*pmf)[i][k];
        w0[k] = p > 0.0 ? lz0 + std::log(p) + post.field_term(i) : -kInf;
      } else {
        w0[k] = post.star_term(i, {g.m1[a], g.r[b], 0}, theta);
      }
    }
  }
}

}  // namespace

BruteForceResult brute_force_posterior(const Posterior& post, const OracleGrid& grid, const FieldMassPmf* field_pmf,
                                       std::size_t budget) {
  grid.validate();
  const std::size_t n = post.size();
  if (n == 0 || n > 4) throw ValidationError("stars", "the oracle handles 1 to 4 stars");
  const std::size_t nt = grid.theta_cells(), nk = grid.mass_cells(), nz = std::size_t{1} << n;
  if (field_pmf) validate_pmf(*field_pmf, n, nk);
  double joint_cells = static_cast<double>(nt);
  for (std::size_t i = 0; i < n; ++i) joint_cells *= 2.0 * static_cast<double>(nk);
  if (joint_cells > static_cast<double>(budget))
    throw TooLarge("oracle would enumerate " + text::format_double(joint_cells) + " cells (budget " +
                   std::to_string(budget) + ")");

  BruteForceResult res;
  res.n_stars = n;
  res.n_theta = nt;
  res.n_mass = nk;

  // Pass 1: per Θ cell and star, log of the mass-summed weight in each branch.
  std::vector<double> log_s(nt * n * 2);
  std::vector<double> w1(nk), w0(nk);
  std::vector<double> cterm(nt);
  for (std::size_t c = 0; c < nt; ++c) {
    const ClusterParams theta = grid.theta_at(c);
    cterm[c] = post.cluster_term(theta);
    for (std::size_t i = 0; i < n; ++i) {
      if (cterm[c] > -kInf) star_weights(post, grid, field_pmf, i, theta, w1, w0);
      log_s[(c * n + i) * 2 + 0] = cterm[c] > -kInf ? log_sum_exp(w0) : -kInf;
      log_s[(c * n + i) * 2 + 1] = cterm[c] > -kInf ? log_sum_exp(w1) : -kInf;
    }
  }

  std::vector<double> lj(nt * nz);
  double shift = -kInf;
  for (std::size_t c = 0; c < nt; ++c) {
    for (std::size_t mask = 0; mask < nz; ++mask) {
      double v = cterm[c];
      for (std::size_t i = 0; i < n && v > -kInf; ++i) v += log_s[(c * n + i) * 2 + ((mask >> i) & 1u)];
      lj[c * nz + mask] = v;
      shift = std::max(shift, v);
    }
  }
  if (!(shift > -kInf)) throw DegeneratePosterior("every oracle cell has zero posterior mass");

  res.theta_z.resize(nt * nz);
  double total = 0.0;
  for (std::size_t k = 0; k < lj.size(); ++k) {
    res.theta_z[k] = std::exp(lj[k] - shift);
    total += res.theta_z[k];
  }
  for (double& v : res.theta_z) v /= total;

  res.theta.assign(nt, 0.0);
  res.z_config.assign(nz, 0.0);
  res.p_member.assign(n, 0.0);
  for (std::size_t c = 0; c < nt; ++c) {
    for (std::size_t mask = 0; mask < nz; ++mask) {
      const double p = res.theta_z[c * nz + mask];
      res.theta[c] += p;
      res.z_config[mask] += p;
      for (std::size_t i = 0; i < n; ++i)
        if ((mask >> i) & 1u) res.p_member[i] += p;
    }
  }

  // Pass 2: mass marginals. Given (Θ, Z), star i's cell has probability
  // exp(w_k - log_s) within its branch.
  res.member_mass.assign(n, std::vector<double>(nk, 0.0));
  res.field_mass.assign(n, std::vector<double>(nk, 0.0));
  for (std::size_t c = 0; c < nt; ++c) {
    if (!(cterm[c] > -kInf)) continue;
    const ClusterParams theta = grid.theta_at(c);
    for (std::size_t i = 0; i < n; ++i) {
      double p1 = 0.0;
      for (std::size_t mask = 0; mask < nz; ++mask)
        if ((mask >> i) & 1u) p1 += res.theta_z[c * nz + mask];
      double p0 = 0.0;
      for (std::size_t mask = 0; mask < nz; ++mask)
        if (!((mask >> i) & 1u)) p0 += res.theta_z[c * nz + mask];
      if (p1 == 0.0 && p0 == 0.0) continue;
      star_weights(post, grid, field_pmf, i, theta, w1, w0);
      const double ls0 = log_s[(c * n + i) * 2 + 0], ls1 = log_s[(c * n + i) * 2 + 1];
      for (std::size_t k = 0; k < nk; ++k) {
        if (p1 > 0.0) res.member_mass[i][k] += p1 * std::exp(w1[k] - ls1);
        if (p0 > 0.0) res.field_mass[i][k] += p0 * std::exp(w0[k] - ls0);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (double& v : res.member_mass[i]) v = res.p_member[i] > 0.0 ? v / res.p_member[i] : kNaN;
  }
  return res;
}

FieldMassPmf field_pmf_from_prior(const OracleGrid& grid, const PseudoPriorSpec& prior) {
  FieldMassPmf pmf;
  const std::size_t nr = grid.r.size();
  for (const auto& star : prior.stars) {
    std::vector<double> lw(grid.mass_cells());
    for (std::size_t a = 0; a < grid.m1.size(); ++a)
      for (std::size_t b = 0; b < nr; ++b) lw[a * nr + b] = star.log_density(grid.m1[a], grid.r[b]);
    const double lz = log_sum_exp(lw);
    if (!(lz > -kInf)) throw ValidationError("field_pmf", "prior puts no mass on the grid");
    std::vector<double> p(lw.size());
    double s = 0.0;
    for (std::size_t k = 0; k < lw.size(); ++k) s += p[k] = std::exp(lw[k] - lz);
    for (double& v : p) v /= s;
    pmf.push_back(std::move(p));
  }
  return pmf;
}

FieldMassPmf uniform_field_pmf(const OracleGrid& grid, std::size_t n_stars) {
  const std::size_t nk = grid.mass_cells();
  return FieldMassPmf(n_stars, std::vector<double>(nk, 1.0 / static_cast<double>(nk)));
}

InvarianceReport pseudo_prior_invariance_check(const Posterior& posterior, const OracleGrid& grid,
                                               const FieldMassPmf& a, const FieldMassPmf& b) {
  const BruteForceResult ra = brute_force_posterior(posterior, grid, &a);
  const BruteForceResult rb = brute_force_posterior(posterior, grid, &b);
  InvarianceReport rep;
  for (std::size_t k = 0; k < ra.theta_z.size(); ++k)
    rep.theta_z = std::max(rep.theta_z, std::fabs(ra.theta_z[k] - rb.theta_z[k]));
  for (std::size_t i = 0; i < ra.n_stars; ++i) {
    for (std::size_t k = 0; k < ra.n_mass; ++k) {
      const double ma = ra.member_mass[i][k], mb = rb.member_mass[i][k];
      if (!(std::isnan(ma) && std::isnan(mb))) rep.member_mass = std::max(rep.member_mass, std::fabs(ma - mb));
      rep.field_mass = std::max(rep.field_mass, std::fabs(ra.field_mass[i][k] - rb.field_mass[i][k]));
    }
  }
  return rep;
}

// Fixtures ----------------------------------------------------------------------

Posterior OracleInstance::posterior() const { return Posterior(table, catalog, ranges, cluster_prior); }

namespace {

std::shared_ptr<const IsochroneTable> shared_toy_table() {
  static const auto table = std::make_shared<const IsochroneTable>(toy_table(ToyModelConfig::defaults()));
  return table;
}

void add_fixture_star(OracleInstance& inst, const std::string& id, double m1, double r,
                      std::span<const double> offsets, double sd) {
  const auto mu = predicted_magnitudes({m1, r, 1}, inst.truth, *inst.table);
  std::vector<double> x(mu.size()), s(mu.size(), sd);
  for (std::size_t j = 0; j < mu.size(); ++j) x[j] = mu[j] + offsets[j];
  inst.catalog.add_star(id, 0.5, x, s);
}

}  // namespace

OracleInstance invariance_fixture() {
  OracleInstance inst;
  inst.table = shared_toy_table();
  inst.truth = {9.0, 0.0, 0.0, 0.5, 0.1};
  inst.catalog.filters = inst.table->filters().names;
  inst.ranges = {{0.0, 0.0}, {20.0, 21.0}};
  const double off_a[] = {0.02, -0.01}, off_b[] = {-0.03, 0.04};
  add_fixture_star(inst, "A", 0.9, 0.0, off_a, 0.05);
  add_fixture_star(inst, "B", 1.1, 0.5, off_b, 0.05);
  const double far[] = {8.0, 7.0}, sd[] = {0.05, 0.05};
  inst.catalog.add_star("C", 0.5, far, sd);
  inst.grid.age = {8.9, 9.0, 9.1};
  inst.grid.feh = {-0.25, 0.0};
  inst.grid.heh = {0.0};
  inst.grid.dm = {0.4, 0.5};
  inst.grid.av = {0.05, 0.1};
  inst.grid.m1 = {0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  inst.grid.r = {0.0, 0.5, 1.0};
  return inst;
}

FieldMassPmf invariance_fixture_peaked_pmf(const OracleInstance& instance) {
  const std::size_t nk = instance.grid.mass_cells();
  FieldMassPmf pmf;
  for (std::size_t i = 0; i < instance.catalog.size(); ++i) {
    std::vector<double> p(nk);
    double s = 0.0;
    for (std::size_t k = 0; k < nk; ++k) {
      const double d = static_cast<double>(k) - static_cast<double>((3 * i + 5) % nk);
      s += p[k] = std::exp(-0.5 * d * d / 0.25);
    }
    for (double& v : p) v /= s;
    pmf.push_back(std::move(p));
  }
  return pmf;
}

OracleInstance exactness_fixture() {
  OracleInstance inst;
  inst.table = shared_toy_table();
  inst.truth = {9.0, 0.0, 0.0, 0.5, 0.1};
  inst.catalog.filters = inst.table->filters().names;
  inst.ranges = {{0.0, 0.0}, {20.0, 21.0}};
  // Noise is large enough that neither star's membership is certain.
  const double off_a[] = {0.05, -0.04}, off_b[] = {0.3, -0.3};
  add_fixture_star(inst, "A", 0.9, 0.0, off_a, 0.1);
  add_fixture_star(inst, "B", 1.2, 0.5, off_b, 0.1);
  inst.grid.age = {8.95, 9.0, 9.05};
  inst.grid.feh = {0.0};
  inst.grid.heh = {0.0};
  inst.grid.dm = {0.4, 0.5, 0.6};
  inst.grid.av = {0.1};
  inst.grid.m1 = {0.8, 0.9, 1.0, 1.1, 1.2, 1.3};
  inst.grid.r = {0.0, 0.5, 1.0};
  return inst;
}

double ExactnessReport::max_z_score() const noexcept {
  double worst = 0.0;
  auto scan = [&](const std::vector<double>& o, const std::vector<double>& c, const std::vector<double>& se) {
    for (std::size_t k = 0; k < o.size(); ++k) {
      const double d = std::fabs(c[k] - o[k]);
      if (d == 0.0) continue;
      // A frequency stuck at 0 or 1 has zero batch-means SE; fall back to the
      // binomial SE of independent draws.
      const double floor = draws > 0 ? std::sqrt(o[k] * (1.0 - o[k]) / static_cast<double>(draws)) : 0.0;
      const double s = std::max(se[k], floor);
      worst = std::max(worst, s > 0.0 ? d / s : kInf);
    }
  };
  scan(oracle_theta, chain_theta, se_theta);
  scan(oracle_member, chain_member, se_member);
  return worst;
}

ExactnessReport sampler_exactness_check(const OracleInstance& instance, std::size_t draws, std::size_t burn_in,
                                        std::uint64_t seed) {
  const Posterior post = instance.posterior();
  const OracleGrid& g = instance.grid;
  const BruteForceResult exact = brute_force_posterior(post, g);
  const std::size_t n = post.size(), nt = g.theta_cells();

  // Start at the most probable Θ cell with each star at its best member cell.
  const std::size_t c0 = static_cast<std::size_t>(
      std::max_element(exact.theta.begin(), exact.theta.end()) - exact.theta.begin());
  NaturalState start;
  start.theta = g.theta_at(c0);
  for (std::size_t i = 0; i < n; ++i) {
    StarState best{g.m1[0], g.r[0], 1};
    double best_term = -kInf;
    for (double m : g.m1)
      for (double r : g.r) {
        const double t = post.star_term(i, {m, r, 1}, start.theta);
        if (t > best_term) {
          best_term = t;
          best = {m, r, 1};
        }
      }
    start.stars.push_back(best);
  }

  const TransformSpec identity = TransformSpec::zero(n);
  ChainState state = make_chain_state(start, post, identity, seed);
  StepSizes steps = StepSizes::initial(n);
  const ProposalGrids grids = g.proposal_grids();
  ChainRunConfig rc;
  rc.burn_in = burn_in;
  rc.draws = draws;
  rc.thin = 1;
  rc.sweep.grids = &grids;
  rc.sweep.sample_membership = true;
  const SampleSet s = run_chain(state, post, identity, steps, rc);

  ExactnessReport rep;
  rep.draws = s.size();
  std::vector<double> indicator(s.size());
  auto cell_of = [&](const ClusterParams& t) {
    auto idx = [](const std::vector<double>& axis, double v) {
      return static_cast<std::size_t>(std::lower_bound(axis.begin(), axis.end(), v) - axis.begin());
    };
    return (((idx(g.age, t.age) * g.feh.size() + idx(g.feh, t.feh)) * g.heh.size() + idx(g.heh, t.heh)) *
                g.dm.size() +
            idx(g.dm, t.dm)) *
               g.av.size() +
           idx(g.av, t.av);
  };
  std::vector<std::size_t> cells(s.size());
  for (std::size_t k = 0; k < s.size(); ++k) cells[k] = cell_of(s.theta[k]);
  for (std::size_t c = 0; c < nt; ++c) {
    for (std::size_t k = 0; k < s.size(); ++k) indicator[k] = cells[k] == c ? 1.0 : 0.0;
    rep.oracle_theta.push_back(exact.theta[c]);
    rep.chain_theta.push_back(sample_mean(indicator));
    rep.se_theta.push_back(batch_means_se(indicator));
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < s.size(); ++k) indicator[k] = s.z[k * n + i];
    rep.oracle_member.push_back(exact.p_member[i]);
    rep.chain_member.push_back(sample_mean(indicator));
    rep.se_member.push_back(batch_means_se(indicator));
  }
  return rep;
}

}  // namespace clusterfit
