#include <cmath>
#include <fstream>
#include <limits>
#include <set>

#include "clusterfit/errors.hpp"
#include "clusterfit/likelihood.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

void PhotometryCatalog::add_star(std::string id, double pm, std::span<const double> x,
                                 std::span<const double> sigma) {
  const std::size_t nf = filters.size();
  if (x.size() != nf || sigma.size() != nf) throw ValidationError("catalog", "row width does not match filters");
  ids.push_back(std::move(id));
  pmember.push_back(pm);
  for (std::size_t j = 0; j < nf; ++j) {
    const bool ok = std::isfinite(x[j]) && std::isfinite(sigma[j]);
    mag.push_back(ok ? x[j] : kNaN);
    sd.push_back(ok ? sigma[j] : kNaN);
    present.push_back(ok ? 1 : 0);
  }
}

PhotometryCatalog PhotometryCatalog::select(std::span<const std::size_t> rows) const {
  PhotometryCatalog out;
  out.filters = filters;
  for (std::size_t i : rows) out.add_star(ids.at(i), pmember[i], x_row(i), sigma_row(i));
  return out;
}

void PhotometryCatalog::validate() const {
  const std::size_t nf = filters.size();
  if (nf == 0) throw ValidationError("catalog", "no filters");
  if (pmember.size() != ids.size() || mag.size() != ids.size() * nf || sd.size() != mag.size() ||
      present.size() != mag.size())
    throw ValidationError("catalog", "inconsistent array sizes");
  std::set<std::string> seen;
  for (std::size_t i = 0; i < size(); ++i) {
    if (!seen.insert(ids[i]).second) throw ValidationError("id", "duplicate star id '" + ids[i] + "'");
    if (!std::isnan(pmember[i]) && !(pmember[i] >= 0.0 && pmember[i] <= 1.0))
      throw ValidationError("pmember", "star '" + ids[i] + "' has pmember outside [0, 1]");
    bool any = false;
    for (std::size_t j = 0; j < nf; ++j) {
      if (!observed(i, j)) continue;
      any = true;
      if (!(sigma(i, j) > 0.0)) throw ValidationError(filters[j] + "_sd", "star '" + ids[i] + "' has non-positive SD");
    }
    if (!any) throw ValidationError("catalog", "star '" + ids[i] + "' has no observed filter");
  }
}

PhotometryCatalog align_to_filters(const PhotometryCatalog& catalog, const FilterSet& filters) {
  std::vector<std::size_t> src(filters.size(), catalog.filters.size());
  for (std::size_t j = 0; j < catalog.filters.size(); ++j) {
    const auto k = filters.index_of(catalog.filters[j]);
    if (k == filters.size())
      throw ValidationError("catalog", "filter '" + catalog.filters[j] + "' is not in the table");
    src[k] = j;
  }
  PhotometryCatalog out;
  out.filters = filters.names;
  std::vector<double> x(filters.size()), s(filters.size());
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    for (std::size_t k = 0; k < filters.size(); ++k) {
      const auto j = src[k];
      const bool ok = j < catalog.filters.size() && catalog.observed(i, j);
      x[k] = ok ? catalog.x(i, j) : kNaN;
      s[k] = ok ? catalog.sigma(i, j) : kNaN;
    }
    out.add_star(catalog.ids[i], catalog.pmember[i], x, s);
  }
  return out;
}

PhotometryCatalog parse_catalog_csv(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t lineno = 0;
  PhotometryCatalog cat;

  // Header.
  while (std::getline(in, line)) {
    ++lineno;
    if (!text::trim(line).empty()) break;
  }
  if (text::trim(line).empty()) throw ParseError(source, lineno, 0, "empty photometry file");
  const auto head = text::split(text::trim(line), ',');
  if (head.size() < 4 || (head.size() - 2) % 2 != 0)
    throw ParseError(source, lineno, 0, "header must be id,pmember,<filter>_mag,<filter>_sd,...");
  if (text::trim(head[0]) != "id") throw ParseError(source, lineno, 1, "first column must be 'id'");
  if (text::trim(head[1]) != "pmember") throw ParseError(source, lineno, 2, "second column must be 'pmember'");
  for (std::size_t c = 2; c < head.size(); c += 2) {
    const auto m = text::trim(head[c]);
    const auto s = text::trim(head[c + 1]);
    if (m.size() <= 4 || m.substr(m.size() - 4) != "_mag")
      throw ParseError(source, lineno, c + 1, "expected <filter>_mag, got '" + std::string(m) + "'");
    const auto name = m.substr(0, m.size() - 4);
    if (s != std::string(name) + "_sd")
      throw ParseError(source, lineno, c + 2, "expected " + std::string(name) + "_sd");
    cat.filters.emplace_back(name);
  }
  const std::size_t nf = cat.filters.size();

  std::vector<double> x(nf), sd(nf);
  auto cell = [&](std::string_view tok, std::size_t col, bool& missing) {
    tok = text::trim(tok);
    missing = tok == "NA";
    if (missing) return kNaN;
    const auto v = text::parse_double(tok);
    if (!v || !std::isfinite(*v))
      throw ParseError(source, lineno, col, "invalid number '" + std::string(tok) + "'");
    return *v;
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto f = text::split(body, ',');
    if (f.size() != head.size())
      throw ParseError(source, lineno, 0,
                       "expected " + std::to_string(head.size()) + " fields, found " + std::to_string(f.size()));
    const auto id = text::trim(f[0]);
    if (id.empty()) throw ParseError(source, lineno, 1, "empty id");
    bool missing = false;
    const double pm = cell(f[1], 2, missing);
    if (!missing && !(pm >= 0.0 && pm <= 1.0)) throw ParseError(source, lineno, 2, "pmember outside [0, 1]");
    bool any = false;
    for (std::size_t j = 0; j < nf; ++j) {
      bool mm = false, ms = false;
      x[j] = cell(f[2 + 2 * j], 3 + 2 * j, mm);
      sd[j] = cell(f[3 + 2 * j], 4 + 2 * j, ms);
      if (!mm && ms) throw ParseError(source, lineno, 4 + 2 * j, "magnitude present but SD is NA");
      if (mm) x[j] = sd[j] = kNaN;
      else if (!(sd[j] > 0.0)) throw ParseError(source, lineno, 4 + 2 * j, "SD must be positive");
      any = any || !mm;
    }
    if (!any) throw ParseError(source, lineno, 0, "star has no observed magnitudes");
    cat.add_star(std::string(id), pm, x, sd);
  }
  try {
    cat.validate();
  } catch (const ValidationError& e) {
    throw ParseError(source, 0, 0, e.what());
  }
  return cat;
}

PhotometryCatalog read_catalog_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open photometry file " + path);
  return parse_catalog_csv(in, path);
}

void write_catalog_csv(std::ostream& out, const PhotometryCatalog& catalog) {
  out << "id,pmember";
  for (const auto& f : catalog.filters) out << ',' << f << "_mag," << f << "_sd";
  out << '\n';
  auto num = [](double v) { return std::isnan(v) ? std::string("NA") : text::format_double(v); };
  for (std::size_t i = 0; i < catalog.size(); ++i) {
    out << catalog.ids[i] << ',' << num(catalog.pmember[i]);
    for (std::size_t j = 0; j < catalog.n_filters(); ++j) {
      if (catalog.observed(i, j)) out << ',' << num(catalog.x(i, j)) << ',' << num(catalog.sigma(i, j));
      else out << ",NA,NA";
    }
    out << '\n';
  }
}

void write_catalog_csv(const std::string& path, const PhotometryCatalog& catalog) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  write_catalog_csv(out, catalog);
}

}  // namespace clusterfit
