#include "clusterfit/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>

#include "clusterfit/errors.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double sample_mean(std::span<const double> x) noexcept {
  if (x.empty()) return kNaN;
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

double sample_sd(std::span<const double> x) noexcept {
  if (x.size() < 2) return kNaN;
  const double m = sample_mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size() - 1));
}

double sorted_quantile(std::span<const double> sorted, double p) noexcept {
  if (sorted.empty()) return kNaN;
  const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double w = h - static_cast<double>(lo);
  return w == 0.0 ? sorted[lo] : sorted[lo] + w * (sorted[lo + 1] - sorted[lo]);
}

namespace {

struct Centered {
  std::vector<double> d;
  double c0 = 0.0;
  explicit Centered(std::span<const double> x) : d(x.begin(), x.end()) {
    const double m = sample_mean(x);
    for (double& v : d) {
      v -= m;
      c0 += v * v;
    }
  }
  double rho(std::size_t k) const noexcept {
    double s = 0.0;
    for (std::size_t t = 0; t + k < d.size(); ++t) s += d[t] * d[t + k];
    return s / c0;
  }
};

}  // namespace

std::vector<double> autocorrelations(std::span<const double> x, std::size_t max_lag) {
  if (x.size() < 2) return {};
  const Centered c(x);
  const std::size_t lags = std::min(max_lag, x.size() - 1);
  std::vector<double> out(lags + 1, kNaN);
  if (!(c.c0 > 0.0)) return out;
  for (std::size_t k = 0; k <= lags; ++k) out[k] = c.rho(k);
  return out;
}

double effective_sample_size(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < 2) return kNaN;
  const Centered c(x);
  if (!(c.c0 > 0.0)) return kNaN;
  // Geyer's initial positive sequence over pairs (rho_2k + rho_2k+1).
  double sum = 0.0;
  for (std::size_t k = 0; 2 * k + 1 < n; ++k) {
    const double pair = (k == 0 ? 1.0 : c.rho(2 * k)) + c.rho(2 * k + 1);
    if (!(pair > 0.0)) break;
    sum += pair;
  }
  const double tau = std::max(2.0 * sum - 1.0, 1e-300);
  return std::min(static_cast<double>(n), static_cast<double>(n) / tau);
}

double batch_means_se(std::span<const double> x, std::size_t batches) {
  if (batches < 2 || x.size() < 2 * batches) throw ValidationError("batches", "need at least 2 draws per batch");
  const std::size_t size = x.size() / batches;
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) means[b] = sample_mean(x.subspan(b * size, size));
  return sample_sd(means) / std::sqrt(static_cast<double>(batches));
}

double ParameterSummary::lag1() const noexcept { return acf.size() > 1 ? acf[1] : kNaN; }

ParameterSummary summarize_series(std::string name, std::span<const double> x) {
  ParameterSummary s;
  s.name = std::move(name);
  s.mean = sample_mean(x);
  s.sd = sample_sd(x);
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t q = 0; q < kSummaryQuantiles.size(); ++q) s.quantiles[q] = sorted_quantile(sorted, kSummaryQuantiles[q]);
  s.acf = autocorrelations(x, kMaxLag);
  s.ess = effective_sample_size(x);
  return s;
}

const ParameterSummary& ChainSummary::parameter(const std::string& name) const {
  for (const auto& p : parameters)
    if (p.name == name) return p;
  throw OutOfRange("no summary for parameter '" + name + "'");
}

StarSummary member_mass_summary(const SampleSet& samples, std::size_t star) {
  const std::size_t n = samples.size(), N = samples.n_stars();
  if (star >= N) throw OutOfRange("star index out of range");
  StarSummary s;
  s.id = samples.star_ids[star];
  std::vector<double> m1, r;
  std::size_t members = 0;
  for (std::size_t k = 0; k < n; ++k) {
    if (!samples.z[k * N + star]) continue;
    ++members;
    if (samples.per_star) {
      m1.push_back(samples.m1[k * N + star]);
      r.push_back(samples.r[k * N + star]);
    }
  }
  s.member_draws = members;
  s.p_member = n ? static_cast<double>(members) / static_cast<double>(n) : kNaN;
  if (members == 0) throw EmptyConditional("star " + s.id + " has no member draws");
  s.m1_mean = sample_mean(m1);
  s.m1_sd = sample_sd(m1);
  s.r_mean = sample_mean(r);
  s.r_sd = sample_sd(r);
  return s;
}

ChainSummary summarize(const SampleSet& samples, const StepSizes* steps) {
  if (samples.size() < 2) throw ValidationError("draws", "at least 2 retained draws required");
  ChainSummary out;
  out.draws = samples.size();
  for (std::size_t p = 0; p < kClusterParamNames.size(); ++p)
    out.parameters.push_back(summarize_series(kClusterParamNames[p], samples.cluster_series(p)));
  out.parameters.push_back(summarize_series("logpost", samples.log_post));
  for (std::size_t i = 0; i < samples.n_stars(); ++i) {
    try {
      out.stars.push_back(member_mass_summary(samples, i));
    } catch (const EmptyConditional& e) {
      StarSummary s;
      s.id = samples.star_ids[i];
      s.m1_mean = s.m1_sd = s.r_mean = s.r_sd = kNaN;
      out.stars.push_back(s);
      out.warnings.emplace_back(e.what());
    }
  }
  if (steps) {
    auto mean_rate = [](const std::vector<StepControl>& v) {
      std::uint64_t a = 0, p = 0;
      for (const auto& c : v) {
        a += c.total_accepted;
        p += c.total_proposed;
      }
      return p ? static_cast<double>(a) / static_cast<double>(p) : kNaN;
    };
    out.acceptance.push_back({"u", mean_rate(steps->u)});
    out.acceptance.push_back({"r", mean_rate(steps->r)});
    for (std::size_t k = 0; k < kClusterSlots; ++k)
      out.acceptance.push_back({kClusterSlotNames[k], steps->cluster[k].acceptance_rate()});
    out.acceptance.push_back({"z", steps->z.acceptance_rate()});
  }
  return out;
}

SampleSet pool_chains(std::span<const SampleSet> chains) {
  if (chains.empty()) throw ValidationError("chains", "nothing to pool");
  SampleSet out = chains.front();
  for (std::size_t c = 1; c < chains.size(); ++c) {
    const SampleSet& s = chains[c];
    if (s.star_ids != out.star_ids) throw ValidationError("chains", "chains cover different stars");
    out.iter.insert(out.iter.end(), s.iter.begin(), s.iter.end());
    out.log_post.insert(out.log_post.end(), s.log_post.begin(), s.log_post.end());
    out.theta.insert(out.theta.end(), s.theta.begin(), s.theta.end());
    out.z.insert(out.z.end(), s.z.begin(), s.z.end());
    out.m1.insert(out.m1.end(), s.m1.begin(), s.m1.end());
    out.r.insert(out.r.end(), s.r.begin(), s.r.end());
    out.per_star = out.per_star && s.per_star;
  }
  return out;
}

void write_summary_csv(std::ostream& out, const ChainSummary& summary) {
  using text::format_double;
  out << "parameter,mean,sd,q2.5,q16,q50,q84,q97.5,ess,lag1\n";
  for (const auto& p : summary.parameters) {
    out << p.name << ',' << format_double(p.mean) << ',' << format_double(p.sd);
    for (double q : p.quantiles) out << ',' << format_double(q);
    out << ',' << format_double(p.ess) << ',' << format_double(p.lag1()) << '\n';
  }
}

void write_membership_csv(std::ostream& out, const ChainSummary& summary) {
  using text::format_double;
  out << "id,p_member_posterior,m1_mean,m1_sd,r_mean,r_sd\n";
  for (const auto& s : summary.stars) {
    out << s.id << ',' << format_double(s.p_member) << ',' << format_double(s.m1_mean) << ','
        << format_double(s.m1_sd) << ',' << format_double(s.r_mean) << ',' << format_double(s.r_sd) << '\n';
  }
}

void write_summary_text(std::ostream& out, const ChainSummary& summary) {
  auto pad = [](std::string s, std::size_t w) {
    if (s.size() < w) s.append(w - s.size(), ' ');
    return s;
  };
  auto num = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.5g", v);
    return std::string(buf);
  };
  out << "draws: " << summary.draws << '\n';
  out << pad("parameter", 12) << pad("mean", 12) << pad("sd", 12) << pad("q16", 12) << pad("q84", 12)
      << pad("ess", 10) << "lag1\n";
  for (const auto& p : summary.parameters) {
    out << pad(p.name, 12) << pad(num(p.mean), 12) << pad(num(p.sd), 12) << pad(num(p.quantiles[1]), 12)
        << pad(num(p.quantiles[3]), 12) << pad(num(p.ess), 10) << num(p.lag1()) << '\n';
  }
  if (!summary.acceptance.empty()) {
    out << "acceptance:";
    for (const auto& a : summary.acceptance) out << ' ' << a.proposal << '=' << num(a.rate);
    out << '\n';
  }
  for (const auto& w : summary.warnings) out << "warning: " << w << '\n';
}

namespace {

std::vector<std::vector<std::string_view>> read_csv_rows(std::istream& in, const std::string& source,
                                                         std::string_view header, std::vector<std::string>& lines) {
  std::string line;
  if (!std::getline(in, line) || text::trim(line) != header)
    throw ParseError(source, 1, 1, "expected header '" + std::string(header) + "'");
  while (std::getline(in, line)) lines.push_back(line);
  std::vector<std::vector<std::string_view>> rows;
  const std::size_t cols = text::split(header, ',').size();
  for (std::size_t k = 0; k < lines.size(); ++k) {
    const auto body = text::trim(lines[k]);
    if (body.empty()) continue;
    rows.push_back(text::split(body, ','));
    if (rows.back().size() != cols) throw ParseError(source, k + 2, 0, "wrong number of columns");
  }
  return rows;
}

double cell(std::string_view v, const std::string& source, std::size_t row, std::size_t col) {
  const auto d = text::parse_double(v);
  if (!d) throw ParseError(source, row, col, "invalid number '" + std::string(v) + "'");
  return *d;
}

}  // namespace

std::vector<SummaryRow> parse_summary_csv(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  const auto rows = read_csv_rows(in, source, "parameter,mean,sd,q2.5,q16,q50,q84,q97.5,ess,lag1", lines);
  std::vector<SummaryRow> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& c = rows[k];
    SummaryRow r{};
    r.parameter = std::string(c[0]);
    r.mean = cell(c[1], source, k + 2, 2);
    r.sd = cell(c[2], source, k + 2, 3);
    for (std::size_t q = 0; q < 5; ++q) r.quantiles[q] = cell(c[3 + q], source, k + 2, 4 + q);
    r.ess = cell(c[8], source, k + 2, 9);
    r.lag1 = cell(c[9], source, k + 2, 10);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<StarSummary> parse_membership_csv(std::istream& in, const std::string& source) {
  std::vector<std::string> lines;
  const auto rows = read_csv_rows(in, source, "id,p_member_posterior,m1_mean,m1_sd,r_mean,r_sd", lines);
  std::vector<StarSummary> out;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& c = rows[k];
    StarSummary s;
    s.id = std::string(c[0]);
    s.p_member = cell(c[1], source, k + 2, 2);
    s.m1_mean = cell(c[2], source, k + 2, 3);
    s.m1_sd = cell(c[3], source, k + 2, 4);
    s.r_mean = cell(c[4], source, k + 2, 5);
    s.r_sd = cell(c[5], source, k + 2, 6);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::size_t> magnitude_cut_rows(const PhotometryCatalog& catalog, const std::string& filter,
                                            double threshold, CutSide side) {
  const auto it = std::find(catalog.filters.begin(), catalog.filters.end(), filter);
  if (it == catalog.filters.end()) throw ValidationError("cut_filter", "unknown filter '" + filter + "'");
  const auto j = static_cast<std::size_t>(it - catalog.filters.begin());
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    if (!catalog.observed(i, j)) {
      rows.push_back(i);
      continue;
    }
    const double x = catalog.x(i, j);
    if (side == CutSide::kKeepBrighter ? x <= threshold : x >= threshold) rows.push_back(i);
  }
  return rows;
}

}  // namespace clusterfit
