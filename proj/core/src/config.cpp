#include "clusterfit/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>

#include "clusterfit/errors.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit {

namespace {

// Raised by value parsers; the caller attaches line and column.
struct BadValue {
  std::string what;
};

using Setter = std::function<void(RunConfig&, std::string_view, const std::string& key)>;
using Getter = std::function<std::string(const RunConfig&)>;

struct Key {
  std::string name;
  Setter set;
  Getter get;
};

double parse_real(std::string_view v) {
  const auto d = text::parse_double(v);
  if (!d) throw BadValue{"expected a number"};
  return *d;
}

std::size_t parse_count(std::string_view v, const std::string& key) {
  const auto n = text::parse_int(v);
  if (!n) throw BadValue{"expected an integer"};
  if (*n < 0) throw ValidationError(key, "must be positive");
  return static_cast<std::size_t>(*n);
}

bool parse_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw BadValue{"expected true or false"};
}

std::optional<int> parse_sign(std::string_view v) {
  if (v == "none" || v.empty()) return std::nullopt;
  if (v == "+1" || v == "1" || v == "+") return 1;
  if (v == "-1" || v == "-") return -1;
  throw BadValue{"expected +1, -1 or none"};
}

std::string emit_sign(const std::optional<int>& s) { return !s ? "none" : (*s > 0 ? "+1" : "-1"); }

Key real(std::string name, double RunConfig::*member) {
  return {name, [member](RunConfig& c, std::string_view v, const std::string&) { c.*member = parse_real(v); },
          [member](const RunConfig& c) { return text::format_double(c.*member); }};
}

template <class Get>
Key real_at(std::string name, Get get) {
  return {name, [get](RunConfig& c, std::string_view v, const std::string&) { get(c) = parse_real(v); },
          [get](const RunConfig& c) { return text::format_double(get(const_cast<RunConfig&>(c))); }};
}

Key count(std::string name, std::size_t RunConfig::*member) {
  return {name, [member](RunConfig& c, std::string_view v, const std::string& k) { c.*member = parse_count(v, k); },
          [member](const RunConfig& c) { return std::to_string(c.*member); }};
}

Key flag(std::string name, bool RunConfig::*member) {
  return {name, [member](RunConfig& c, std::string_view v, const std::string&) { c.*member = parse_bool(v); },
          [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); }};
}

Key str(std::string name, std::string RunConfig::*member) {
  return {name, [member](RunConfig& c, std::string_view v, const std::string&) { c.*member = std::string(v); },
          [member](const RunConfig& c) { return c.*member; }};
}

Key sign(std::string name, std::optional<int> ExpectedSigns::*member) {
  return {name, [member](RunConfig& c, std::string_view v, const std::string&) { c.signs.*member = parse_sign(v); },
          [member](const RunConfig& c) { return emit_sign(c.signs.*member); }};
}

const std::vector<Key>& keys() {
  static const std::vector<Key> k = [] {
    std::vector<Key> v;
    v.push_back(str("table", &RunConfig::table));
    v.push_back(str("photometry", &RunConfig::photometry));
    v.push_back(str("out_dir", &RunConfig::out_dir));
    v.push_back({"seed",
                 [](RunConfig& c, std::string_view s, const std::string& key) {
                   unsigned long long x = 0;
                   const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
                   if (!s.empty() && s.front() == '-') throw ValidationError(key, "must be >= 0");
                   if (ec != std::errc() || p != s.data() + s.size()) throw BadValue{"expected an unsigned integer"};
                   c.seed = x;
                 },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    v.push_back(count("chains", &RunConfig::chains));
    v.push_back(count("burn_in", &RunConfig::burn_in));
    v.push_back(count("tuning_draws", &RunConfig::tuning_draws));
    v.push_back(count("thin", &RunConfig::thin));
    v.push_back(count("draws", &RunConfig::draws));
    v.push_back(count("main_thin", &RunConfig::main_thin));
    v.push_back(real("zero_threshold", &RunConfig::zero_threshold));
    v.push_back(flag("fit_transform", &RunConfig::fit_transform));
    v.push_back(flag("sample_membership", &RunConfig::sample_membership));
    v.push_back(sign("sign.beta_r", &ExpectedSigns::beta_r));
    v.push_back(sign("sign.beta_age", &ExpectedSigns::beta_age));
    v.push_back(sign("sign.beta_feh", &ExpectedSigns::beta_feh));
    v.push_back(sign("sign.beta_dm", &ExpectedSigns::beta_dm));
    v.push_back(sign("sign.gamma_feh", &ExpectedSigns::gamma_feh));
    v.push_back(sign("sign.gamma_dm", &ExpectedSigns::gamma_dm));
    v.push_back(real_at("prior.feh.mean", [](RunConfig& c) -> double& { return c.prior.feh.mean; }));
    v.push_back(real_at("prior.feh.sd", [](RunConfig& c) -> double& { return c.prior.feh.sd; }));
    v.push_back(real_at("prior.heh.mean", [](RunConfig& c) -> double& { return c.prior.heh.mean; }));
    v.push_back(real_at("prior.heh.sd", [](RunConfig& c) -> double& { return c.prior.heh.sd; }));
    v.push_back(real_at("prior.dm.mean", [](RunConfig& c) -> double& { return c.prior.dm.mean; }));
    v.push_back(real_at("prior.dm.sd", [](RunConfig& c) -> double& { return c.prior.dm.sd; }));
    v.push_back(real_at("prior.log_av.mean", [](RunConfig& c) -> double& { return c.prior.log_av.mean; }));
    v.push_back(real_at("prior.log_av.sd", [](RunConfig& c) -> double& { return c.prior.log_av.sd; }));
    v.push_back(real_at("age_min", [](RunConfig& c) -> double& { return c.prior.age_min; }));
    v.push_back(real_at("age_max", [](RunConfig& c) -> double& { return c.prior.age_max; }));
    v.push_back(real_at("init.age", [](RunConfig& c) -> double& { return c.init.age; }));
    v.push_back(real_at("init.feh", [](RunConfig& c) -> double& { return c.init.feh; }));
    v.push_back(real_at("init.heh", [](RunConfig& c) -> double& { return c.init.heh; }));
    v.push_back(real_at("init.dm", [](RunConfig& c) -> double& { return c.init.dm; }));
    v.push_back(real_at("init.av", [](RunConfig& c) -> double& { return c.init.av; }));
    v.push_back(real("default_pmember", &RunConfig::default_pmember));
    v.push_back(flag("exclude_wd_binaries", &RunConfig::exclude_wd_binaries));
    v.push_back(str("max_mag_filter", &RunConfig::max_mag_filter));
    v.push_back(real("max_mag", &RunConfig::max_mag));
    v.push_back(str("cut_filter", &RunConfig::cut_filter));
    v.push_back({"cut_thresholds",
                 [](RunConfig& c, std::string_view s, const std::string&) {
                   c.cut_thresholds.clear();
                   if (s.empty()) return;
                   for (auto tok : text::split(s, ',')) c.cut_thresholds.push_back(parse_real(text::trim(tok)));
                 },
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t k = 0; k < c.cut_thresholds.size(); ++k)
                     out += (k ? "," : "") + text::format_double(c.cut_thresholds[k]);
                   return out;
                 }});
    v.push_back({"cut_side",
                 [](RunConfig& c, std::string_view s, const std::string&) {
                   if (s == "brighter") c.cut_side = CutSide::kKeepBrighter;
                   else if (s == "fainter") c.cut_side = CutSide::kKeepFainter;
                   else throw BadValue{"expected brighter or fainter"};
                 },
                 [](const RunConfig& c) {
                   return std::string(c.cut_side == CutSide::kKeepBrighter ? "brighter" : "fainter");
                 }});
    v.push_back(flag("per_star", &RunConfig::per_star));
    v.push_back(real_at("sim.age", [](RunConfig& c) -> double& { return c.sim.theta.age; }));
    v.push_back(real_at("sim.feh", [](RunConfig& c) -> double& { return c.sim.theta.feh; }));
    v.push_back(real_at("sim.heh", [](RunConfig& c) -> double& { return c.sim.theta.heh; }));
    v.push_back(real_at("sim.dm", [](RunConfig& c) -> double& { return c.sim.theta.dm; }));
    v.push_back(real_at("sim.av", [](RunConfig& c) -> double& { return c.sim.theta.av; }));
    v.push_back({"sim.n_cluster",
                 [](RunConfig& c, std::string_view s, const std::string& k) { c.sim.n_cluster = parse_count(s, k); },
                 [](const RunConfig& c) { return std::to_string(c.sim.n_cluster); }});
    v.push_back({"sim.n_field",
                 [](RunConfig& c, std::string_view s, const std::string& k) { c.sim.n_field = parse_count(s, k); },
                 [](const RunConfig& c) { return std::to_string(c.sim.n_field); }});
    v.push_back(real_at("sim.binary_fraction", [](RunConfig& c) -> double& { return c.sim.binary_fraction; }));
    v.push_back(real_at("sim.sigma", [](RunConfig& c) -> double& { return c.sim.sigma; }));
    v.push_back(real_at("sim.field_offset_sigma", [](RunConfig& c) -> double& { return c.sim.field_offset_sigma; }));
    v.push_back(real_at("sim.pmember", [](RunConfig& c) -> double& { return c.sim.pmember; }));
    return v;
  }();
  return k;
}

}  // namespace

void RunConfig::validate() const {
  if (chains == 0) throw ValidationError("chains", "must be positive");
  if (burn_in == 0) throw ValidationError("burn_in", "must be positive");
  if (tuning_draws == 0) throw ValidationError("tuning_draws", "must be positive");
  if (thin == 0) throw ValidationError("thin", "must be positive");
  if (draws == 0) throw ValidationError("draws", "must be positive");
  if (main_thin == 0) throw ValidationError("main_thin", "must be positive");
  if (draws / main_thin < 2) throw ValidationError("main_thin", "must leave at least 2 retained draws");
  tuning().validate();
  prior.validate();
  if (!(default_pmember >= 0.0 && default_pmember <= 1.0))
    throw ValidationError("default_pmember", "must lie in [0, 1]");
  const std::pair<const char*, double> inits[] = {
      {"init.age", init.age}, {"init.feh", init.feh}, {"init.heh", init.heh}, {"init.dm", init.dm}};
  for (const auto& [name, value] : inits)
    if (!std::isfinite(value)) throw ValidationError(name, "must be finite");
  if (!(init.av > 0.0) || !std::isfinite(init.av)) throw ValidationError("init.av", "must be positive");
  if (init.age < prior.age_min || init.age > prior.age_max)
    throw ValidationError("init.age", "must lie inside [age_min, age_max]");
  if (!max_mag_filter.empty() && !std::isfinite(max_mag)) throw ValidationError("max_mag", "must be finite");
  for (double t : cut_thresholds)
    if (!std::isfinite(t)) throw ValidationError("cut_thresholds", "must be finite");
  if (!cut_thresholds.empty() && cut_filter.empty())
    throw ValidationError("cut_filter", "required when cut_thresholds is set");
  if (!(sim.binary_fraction >= 0.0 && sim.binary_fraction <= 1.0))
    throw ValidationError("sim.binary_fraction", "must lie in [0, 1]");
  if (!(sim.sigma > 0.0)) throw ValidationError("sim.sigma", "must be positive");
  if (!(sim.field_offset_sigma >= 0.0)) throw ValidationError("sim.field_offset_sigma", "must be >= 0");
  if (!(std::isnan(sim.pmember) || (sim.pmember >= 0.0 && sim.pmember <= 1.0)))
    throw ValidationError("sim.pmember", "must lie in [0, 1]");
  if (out_dir.empty()) throw ValidationError("out_dir", "must not be empty");
}

void RunConfig::validate_for_fit() const {
  validate();
  if (photometry.empty()) throw ValidationError("photometry", "required");
  if (!std::filesystem::is_regular_file(photometry))
    throw ValidationError("photometry", "file not found: " + photometry);
  if (!table.empty() && !std::filesystem::is_regular_file(table))
    throw ValidationError("table", "file not found: " + table);
}

TuningConfig RunConfig::tuning() const {
  TuningConfig t;
  t.burn_in_draws = burn_in;
  t.initial_run_draws = tuning_draws;
  t.regression_thin = thin;
  t.zero_threshold = zero_threshold;
  t.signs = signs;
  t.fit_transform = fit_transform;
  t.sample_membership = sample_membership;
  return t;
}

RunConfig parse_config(std::string_view text, const std::string& source) {
  RunConfig config;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t end = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    if (text::trim(line).empty()) {
      if (end == text.size()) break;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ParseError(source, lineno, 1, "expected 'key = value'");
    const auto key = text::trim(line.substr(0, eq));
    const auto value = text::trim(line.substr(eq + 1));
    const std::size_t value_col = static_cast<std::size_t>(value.data() - line.data()) + 1;
    const Key* entry = nullptr;
    for (const auto& k : keys())
      if (k.name == key) entry = &k;
    if (!entry)
      throw ParseError(source, lineno, static_cast<std::size_t>(key.data() - line.data()) + 1,
                       "unknown key '" + std::string(key) + "'");
    try {
      entry->set(config, value, entry->name);
    } catch (const BadValue& e) {
      throw ParseError(source, lineno, value_col, entry->name + ": " + e.what);
    }
    if (end == text.size()) break;
  }
  config.validate();
  return config;
}

RunConfig load_config(const std::string& path) {
  RunConfig config = parse_config(text::read_file(path), path);
  const auto base = std::filesystem::path(path).parent_path();
  auto resolve = [&](std::string& p) {
    if (!p.empty() && std::filesystem::path(p).is_relative()) p = (base / p).lexically_normal().string();
  };
  resolve(config.table);
  resolve(config.photometry);
  resolve(config.out_dir);
  return config;
}

std::string emit_config(const RunConfig& config) {
  std::ostringstream out;
  for (const auto& k : keys()) out << k.name << " = " << k.get(config) << '\n';
  return out.str();
}

}  // namespace clusterfit
