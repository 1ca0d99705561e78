#include "clusterfit/chain_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "clusterfit/errors.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {
constexpr std::string_view kFixedHeader = "iter,logpost,theta_age,theta_feh,theta_heh,theta_dm,theta_av";
constexpr std::size_t kFixedColumns = 7;
}  // namespace

void write_chain_csv(std::ostream& out, const SampleSet& s, bool per_star) {
  using text::format_double;
  const std::size_t N = s.n_stars();
  out << kFixedHeader;
  if (per_star)
    for (const auto& id : s.star_ids) out << ",Z_" << id << ",M1_" << id << ",R_" << id;
  out << '\n';
  for (std::size_t k = 0; k < s.size(); ++k) {
    const auto& t = s.theta[k];
    out << s.iter[k] << ',' << format_double(s.log_post[k]) << ',' << format_double(t.age) << ','
        << format_double(t.feh) << ',' << format_double(t.heh) << ',' << format_double(t.dm) << ','
        << format_double(t.av);
    if (per_star) {
      for (std::size_t i = 0; i < N; ++i)
        out << ',' << int(s.z[k * N + i]) << ',' << format_double(s.m1[k * N + i]) << ','
            << format_double(s.r[k * N + i]);
    }
    out << '\n';
  }
}

void write_chain_csv(const std::string& path, const SampleSet& samples, bool per_star) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_chain_csv(out, samples, per_star);
  if (!out) throw Error("write failed: " + path);
}

SampleSet parse_chain_csv(std::istream& in, const std::string& source) {
  SampleSet s;
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source, 1, 0, "empty chain file");
  const auto header = text::split(text::trim(line), ',');
  const auto fixed = text::split(kFixedHeader, ',');
  if (header.size() < kFixedColumns || (header.size() - kFixedColumns) % 3 != 0)
    throw ParseError(source, 1, 0, "unexpected chain header");
  for (std::size_t c = 0; c < kFixedColumns; ++c)
    if (header[c] != fixed[c]) throw ParseError(source, 1, c + 1, "expected column '" + std::string(fixed[c]) + "'");
  for (std::size_t c = kFixedColumns; c < header.size(); c += 3) {
    const auto z = header[c], m = header[c + 1], r = header[c + 2];
    if (z.substr(0, 2) != "Z_" || m.substr(0, 3) != "M1_" || r.substr(0, 2) != "R_" || z.substr(2) != m.substr(3) ||
        z.substr(2) != r.substr(2))
      throw ParseError(source, 1, c + 1, "per-star columns must come as Z_<id>,M1_<id>,R_<id>");
    s.star_ids.emplace_back(z.substr(2));
  }
  s.per_star = !s.star_ids.empty();
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty()) continue;
    const auto cells = text::split(body, ',');
    if (cells.size() != header.size()) throw ParseError(source, lineno, 0, "wrong number of columns");
    auto num = [&](std::size_t c) {
      const auto v = text::parse_double(cells[c]);
      if (!v) throw ParseError(source, lineno, c + 1, "invalid number '" + std::string(cells[c]) + "'");
      return *v;
    };
    const auto it = text::parse_int(cells[0]);
    if (!it) throw ParseError(source, lineno, 1, "invalid iteration");
    s.iter.push_back(*it);
    s.log_post.push_back(num(1));
    s.theta.push_back({num(2), num(3), num(4), num(5), num(6)});
    for (std::size_t c = kFixedColumns; c < cells.size(); c += 3) {
      const auto z = text::parse_int(cells[c]);
      if (!z || (*z != 0 && *z != 1)) throw ParseError(source, lineno, c + 1, "membership must be 0 or 1");
      s.z.push_back(static_cast<std::uint8_t>(*z));
      s.m1.push_back(num(c + 1));
      s.r.push_back(num(c + 2));
    }
  }
  return s;
}

SampleSet read_chain_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return parse_chain_csv(in, path);
}

}  // namespace clusterfit
