// Reader and writer for the line-oriented isochrone table format:
//
//   filters V B
//   kappa 1.0 1.32
//   feh 0.0
//   age 9.0
//   remnant_above 2.51      (optional)
//   mass 0.1 11.0 12.3
//   ...
//   <blank line ends the block>
//
// Tables with a helium dimension add a `heh <value>` line to every block.
// Blocks are ordered helium-major, then metallicity, then age.

#include <array>
#include <cmath>
#include <fstream>
#include <optional>
#include <string>

#include "clusterfit/errors.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {

struct Block {
  std::optional<double> heh, feh, age;
  std::size_t line = 0;
  Track track;
};

}  // namespace

IsochroneTable parse_table(std::istream& in, const std::string& source) {
  FilterSet filters;
  bool have_kappa = false;
  std::vector<Block> blocks;
  std::optional<Block> cur;
  std::size_t lineno = 0;
  std::string line;

  auto fail = [&](const std::string& what, std::size_t at = 0) -> ParseError {
    return ParseError(source, at ? at : lineno, 0, what);
  };
  auto finish_block = [&]() {
    if (!cur) return;
    if (!cur->feh || !cur->age) throw fail("block is missing its feh or age line", cur->line);
    if (cur->track.mass.size() < 2) throw fail("block has fewer than 2 mass rows", cur->line);
    blocks.push_back(std::move(*cur));
    cur.reset();
  };
  auto number = [&](std::string_view tok, const char* what) {
    auto v = text::parse_double(tok);
    if (!v || !std::isfinite(*v)) throw fail(std::string("invalid ") + what + " '" + std::string(tok) + "'");
    return *v;
  };

  while (std::getline(in, line)) {
    ++lineno;
    const auto body = text::trim(line);
    if (body.empty()) {
      finish_block();
      continue;
    }
    if (body.front() == '#') continue;
    const auto tok = text::split_whitespace(body);
    const auto key = tok[0];
    if (key == "filters") {
      if (!blocks.empty() || cur) throw fail("'filters' must precede all blocks");
      for (std::size_t i = 1; i < tok.size(); ++i) filters.names.emplace_back(tok[i]);
      if (filters.names.empty()) throw fail("'filters' lists no filters");
      continue;
    }
    if (key == "kappa") {
      if (filters.names.empty()) throw fail("'kappa' before 'filters'");
      if (tok.size() - 1 != filters.names.size()) throw fail("'kappa' count does not match 'filters'");
      filters.kappa.clear();
      for (std::size_t i = 1; i < tok.size(); ++i) filters.kappa.push_back(number(tok[i], "kappa"));
      have_kappa = true;
      continue;
    }
    if (filters.names.empty()) throw fail("expected 'filters' header");
    if (key == "heh" || key == "feh" || key == "age" || key == "remnant_above") {
      if (tok.size() != 2) throw fail("'" + std::string(key) + "' takes one value");
      if (cur && !cur->track.mass.empty()) throw fail("'" + std::string(key) + "' after mass rows; missing blank line?");
      if (!cur) {
        cur.emplace();
        cur->line = lineno;
      }
      const std::string name(key);
      double v = 0.0;
      if (name == "remnant_above") {
        const auto parsed = text::parse_double(tok[1]);
        if (!parsed) throw fail("invalid remnant_above '" + std::string(tok[1]) + "'");
        v = *parsed;
      } else {
        v = number(tok[1], name.c_str());
      }
      if (key == "heh") cur->heh = v;
      else if (key == "feh") cur->feh = v;
      else if (key == "age") cur->age = v;
      else {
        if (std::isnan(v) || v <= 0.0) throw fail("invalid remnant_above");
        cur->track.remnant_above = v;
      }
      continue;
    }
    if (key == "mass") {
      if (!cur || !cur->feh || !cur->age) throw fail("mass row outside a feh/age block");
      if (tok.size() != filters.names.size() + 2)
        throw fail("mass row needs 1 mass and " + std::to_string(filters.names.size()) + " magnitudes");
      const double m = number(tok[1], "mass");
      if (m <= 0.0) throw fail("mass must be positive");
      if (!cur->track.mass.empty() && !(m > cur->track.mass.back()))
        throw fail("non-ascending mass grid");
      cur->track.mass.push_back(m);
      for (std::size_t i = 2; i < tok.size(); ++i) cur->track.magnitudes.push_back(number(tok[i], "magnitude"));
      continue;
    }
    throw fail("unknown keyword '" + std::string(key) + "'");
  }
  finish_block();

  if (filters.names.empty()) throw ParseError(source, 0, 0, "missing 'filters' header");
  if (!have_kappa) filters.kappa.assign(filters.names.size(), 1.0);
  if (blocks.empty()) throw ParseError(source, 0, 0, "table has no blocks");

  const bool helium = blocks.front().heh.has_value();
  for (const auto& b : blocks)
    if (b.heh.has_value() != helium) throw ParseError(source, b.line, 0, "heh line must appear in every block or none");

  auto key_of = [&](const Block& b) { return std::array<double, 3>{helium ? *b.heh : 0.0, *b.feh, *b.age}; };
  for (std::size_t i = 1; i < blocks.size(); ++i) {
    if (!(key_of(blocks[i - 1]) < key_of(blocks[i])))
      throw ParseError(source, blocks[i].line, 0, "non-ascending grid: blocks must be ordered by heh, feh, age");
  }

  std::vector<double> heh_grid, feh_grid, age_grid;
  for (const auto& b : blocks) {
    if (helium && (heh_grid.empty() || heh_grid.back() != *b.heh)) heh_grid.push_back(*b.heh);
  }
  for (const auto& b : blocks) {
    if (helium && *b.heh != heh_grid.front()) break;
    if (feh_grid.empty() || feh_grid.back() != *b.feh) feh_grid.push_back(*b.feh);
  }
  for (const auto& b : blocks) {
    if (*b.feh != feh_grid.front()) break;
    age_grid.push_back(*b.age);
  }
  const std::size_t nheh = helium ? heh_grid.size() : 1;
  std::vector<Track> tracks;
  tracks.reserve(blocks.size());
  std::size_t idx = 0;
  for (std::size_t h = 0; h < nheh; ++h)
    for (double feh : feh_grid)
      for (double age : age_grid) {
        if (idx >= blocks.size()) throw ParseError(source, lineno, 0, "grid is not a full product: blocks missing");
        const auto& b = blocks[idx];
        if ((helium && *b.heh != heh_grid[h]) || *b.feh != feh || *b.age != age)
          throw ParseError(source, b.line, 0, "grid is not a full product of heh x feh x age");
        tracks.push_back(b.track);
        ++idx;
      }
  if (idx != blocks.size()) throw ParseError(source, blocks[idx].line, 0, "grid is not a full product: extra block");

  try {
    return IsochroneTable(std::move(filters), std::move(heh_grid), std::move(feh_grid), std::move(age_grid),
                          std::move(tracks));
  } catch (const InvalidConfig& e) {
    throw ParseError(source, 0, 0, e.what());
  }
}

IsochroneTable read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open table " + path);
  return parse_table(in, path);
}

void write_table(std::ostream& out, const IsochroneTable& table) {
  const auto& f = table.filters();
  out << "filters";
  for (const auto& n : f.names) out << ' ' << n;
  out << "\nkappa";
  for (double k : f.kappa) out << ' ' << text::format_double(k);
  out << "\n\n";
  const std::size_t nheh = table.has_helium() ? table.heh_grid().size() : 1;
  const std::size_t nf = table.n_filters();
  for (std::size_t h = 0; h < nheh; ++h)
    for (std::size_t i = 0; i < table.feh_grid().size(); ++i)
      for (std::size_t a = 0; a < table.age_grid().size(); ++a) {
        const Track& t = table.track(h, i, a);
        if (table.has_helium()) out << "heh " << text::format_double(table.heh_grid()[h]) << '\n';
        out << "feh " << text::format_double(table.feh_grid()[i]) << '\n';
        out << "age " << text::format_double(table.age_grid()[a]) << '\n';
        if (std::isfinite(t.remnant_above)) out << "remnant_above " << text::format_double(t.remnant_above) << '\n';
        for (std::size_t k = 0; k < t.size(); ++k) {
          out << "mass " << text::format_double(t.mass[k]);
          for (std::size_t j = 0; j < nf; ++j) out << ' ' << text::format_double(t.magnitudes[k * nf + j]);
          out << '\n';
        }
        out << '\n';
      }
}

void write_table(const std::string& path, const IsochroneTable& table) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write table " + path);
  write_table(out, table);
}

}  // namespace clusterfit
