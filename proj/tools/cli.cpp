#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <utility>

#include "clusterfit/chain_io.hpp"
#include "clusterfit/config.hpp"
#include "clusterfit/diagnostics.hpp"
#include "clusterfit/errors.hpp"
#include "clusterfit/pipeline.hpp"
#include "clusterfit/synthetic.hpp"
#include "clusterfit/text.hpp"

namespace clusterfit::cli {

namespace {

constexpr const char* kOutEnv = "CLUSTERFIT_OUT";

struct CommonFlags {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  std::optional<std::pair<std::string, double>> max_mag;
  std::optional<std::size_t> chains;
  bool per_star = false;
};

void add_common(CLI::App* app, CommonFlags& f) {
  app->add_option("--seed", f.seed, "Base random seed");
  app->add_option("--config", f.config, "Run configuration (key = value)")->check(CLI::ExistingFile);
  app->add_option("--out", f.out, "Output directory (overrides $CLUSTERFIT_OUT and the config)");
  app->add_option("--max-mag", f.max_mag, "Drop stars fainter than VALUE in FILTER")->type_name("FILTER VALUE");
  app->add_option("--chains", f.chains, "Number of independent chains");
  app->add_flag("--per-star", f.per_star, "Write per-star Z, M1, R columns to chain files");
}

// Flag > environment > config file > default.
RunConfig resolve_config(const CommonFlags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : load_config(f.config);
  if (const char* env = std::getenv(kOutEnv); env && *env) c.out_dir = env;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.chains) c.chains = *f.chains;
  if (f.per_star) c.per_star = true;
  if (f.max_mag) {
    c.max_mag_filter = f.max_mag->first;
    c.max_mag = f.max_mag->second;
  }
  c.validate();
  return c;
}

FitLog stderr_log(std::ostream& err) {
  return [&err](std::size_t chain, const std::string& msg) { err << "[chain " << chain << "] " << msg << '\n'; };
}

int cmd_fit(const CommonFlags& flags, const std::string& photometry, const std::string& table, std::ostream& out,
            std::ostream& err) {
  RunConfig config = resolve_config(flags);
  if (!photometry.empty()) config.photometry = photometry;
  if (!table.empty()) config.table = table;
  config.validate_for_fit();
  FitInputs inputs = load_inputs(config);
  const PhotometryCatalog catalog = apply_max_mag(config, inputs.catalog);
  const FitResult result = run_fit(config, inputs.table, catalog, stderr_log(err));
  write_fit_outputs(config.out_dir, config, inputs, result);
  write_summary_text(out, result.summary);
  out << "outputs written to " << config.out_dir << '\n';
  return kOk;
}

int cmd_simulate(const CommonFlags& flags, std::string output, std::ostream& out) {
  const RunConfig config = resolve_config(flags);
  const auto table = load_table(config);
  SyntheticConfig sc;
  sc.theta = config.sim.theta;
  sc.n_cluster = config.sim.n_cluster;
  sc.n_field = config.sim.n_field;
  sc.binary_fraction = config.sim.binary_fraction;
  sc.sigma = {config.sim.sigma};
  sc.field_min_offset_sigma = config.sim.field_offset_sigma;
  sc.pmember = config.sim.pmember;
  sc.seed = config.seed;
  const SyntheticCatalog synth = generate_cluster(*table, sc);

  if (output.empty()) output = (std::filesystem::path(config.out_dir) / "synthetic.csv").string();
  const auto parent = std::filesystem::path(output).parent_path();
  if (!parent.empty()) ensure_directory(parent.string());
  write_catalog_csv(output, synth.catalog);
  const std::string truth_path = std::filesystem::path(output).replace_extension(".truth").string();
  std::ofstream truth(truth_path, std::ios::binary);
  if (!truth) throw Error("cannot write " + truth_path);
  write_truth_csv(truth, synth.truth);
  out << "catalog: " << output << " (" << synth.catalog.size() << " stars)\n";
  out << "truth: " << truth_path << '\n';
  out << "mass redraws: " << synth.truth.mass_redraws << ", field redraws: " << synth.truth.field_redraws << '\n';
  if (config.table.empty()) {
    const auto table_path = (std::filesystem::path(output).parent_path() / "toy_table.txt").string();
    write_table(table_path, *table);
    out << "table: " << table_path << '\n';
  }
  return kOk;
}

int cmd_summarize(const CommonFlags& flags, const std::vector<std::string>& files, std::ostream& out) {
  std::vector<SampleSet> chains;
  for (const auto& f : files) chains.push_back(read_chain_csv(f));
  const ChainSummary summary = summarize(pool_chains(chains));
  write_summary_text(out, summary);
  std::string dir = flags.out;
  if (dir.empty())
    if (const char* env = std::getenv(kOutEnv); env && *env) dir = env;
  if (!dir.empty()) {
    ensure_directory(dir);
    std::ostringstream csv, membership;
    write_summary_csv(csv, summary);
    write_output_file(dir, "summary.csv", csv.str());
    if (!summary.stars.empty()) {
      write_membership_csv(membership, summary);
      write_output_file(dir, "membership.csv", membership.str());
    }
    out << "outputs written to " << dir << '\n';
  }
  return kOk;
}

int cmd_oracle(bool invariance, bool exactness, std::size_t draws, const CommonFlags& flags, std::ostream& out) {
  if (!invariance && !exactness) throw ValidationError("oracle", "choose --invariance and/or --exactness");
  bool ok = true;
  if (invariance) {
    const OracleInstance inst = invariance_fixture();
    const Posterior post = inst.posterior();
    const FieldMassPmf a = uniform_field_pmf(inst.grid, inst.catalog.size());
    const FieldMassPmf b = invariance_fixture_peaked_pmf(inst);
    const InvarianceReport rep = pseudo_prior_invariance_check(post, inst.grid, a, b);
    out << "invariance: max |p_A(theta,Z) - p_B(theta,Z)| = " << text::format_double(rep.theta_z) << '\n';
    out << "invariance: max member-mass discrepancy = " << text::format_double(rep.member_mass) << '\n';
    out << "invariance: max field-mass discrepancy = " << text::format_double(rep.field_mass) << '\n';
    out << "invariance: " << (rep.passes() ? "PASS" : "FAIL") << " (tolerance 1e-10)\n";
    ok = ok && rep.passes();
  }
  if (exactness) {
    const ExactnessReport rep = sampler_exactness_check(exactness_fixture(), draws, 5000, flags.seed.value_or(1));
    for (std::size_t c = 0; c < rep.oracle_theta.size(); ++c)
      out << "exactness: theta cell " << c << " oracle " << text::format_double(rep.oracle_theta[c]) << " chain "
          << text::format_double(rep.chain_theta[c]) << " se " << text::format_double(rep.se_theta[c]) << '\n';
    for (std::size_t i = 0; i < rep.oracle_member.size(); ++i)
      out << "exactness: P(Z_" << i << "=1) oracle " << text::format_double(rep.oracle_member[i]) << " chain "
          << text::format_double(rep.chain_member[i]) << " se " << text::format_double(rep.se_member[i]) << '\n';
    out << "exactness: max z-score " << text::format_double(rep.max_z_score()) << ' '
        << (rep.passes() ? "PASS" : "FAIL") << " (" << rep.draws << " draws)\n";
    ok = ok && rep.passes();
  }
  return ok ? kOk : kValidation;
}

int cmd_check_table(const std::string& path, std::ostream& out) {
  const IsochroneTable t = read_table(path);
  out << path << ": ok\n";
  out << "filters:";
  for (const auto& f : t.filters().names) out << ' ' << f;
  out << "\nheh nodes: " << t.heh_grid().size() << "\nfeh nodes: " << t.feh_grid().size()
      << "\nage nodes: " << t.age_grid().size() << "\nmass range: " << text::format_double(t.min_mass()) << " - "
      << text::format_double(t.max_common_mass()) << '\n';
  return kOk;
}

int cmd_sweep(const CommonFlags& flags, const std::string& photometry, const std::string& table, std::string filter,
              std::vector<double> cuts, const std::string& side, std::ostream& out, std::ostream& err) {
  RunConfig config = resolve_config(flags);
  if (!photometry.empty()) config.photometry = photometry;
  if (!table.empty()) config.table = table;
  if (filter.empty()) filter = config.cut_filter;
  if (cuts.empty()) cuts = config.cut_thresholds;
  CutSide cut_side = config.cut_side;
  if (side == "brighter") cut_side = CutSide::kKeepBrighter;
  else if (side == "fainter") cut_side = CutSide::kKeepFainter;
  else if (!side.empty()) throw ValidationError("side", "expected brighter or fainter");
  if (filter.empty()) throw ValidationError("cut_filter", "required");
  if (cuts.empty()) throw ValidationError("cut_thresholds", "required");
  config.validate_for_fit();
  FitInputs inputs = load_inputs(config);
  const PhotometryCatalog catalog = apply_max_mag(config, inputs.catalog);
  const auto entries = magnitude_cut_sweep(config, inputs.table, catalog, filter, cuts, cut_side, stderr_log(err));
  ensure_directory(config.out_dir);
  std::vector<std::pair<std::string, std::string>> outputs;
  std::vector<std::uint64_t> seeds;
  for (std::size_t k = 0; k < entries.size(); ++k) {
    RunConfig entry = config;
    entry.seed = config.seed + k;
    const auto dir = (std::filesystem::path(config.out_dir) / ("cut_" + std::to_string(k))).string();
    write_fit_outputs(dir, entry, inputs, entries[k].fit);
    seeds.push_back(entry.seed);
  }
  std::ostringstream csv;
  write_sweep_csv(csv, entries);
  outputs.emplace_back("sweep.csv", write_output_file(config.out_dir, "sweep.csv", csv.str()));
  std::ostringstream manifest;
  write_manifest(manifest, "sweep", config, inputs, seeds, outputs);
  write_output_file(config.out_dir, "manifest.txt", manifest.str());
  out << csv.str();
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian star-cluster fitting by Metropolis-within-Gibbs over an isochrone table"};
  app.name("clusterfit");
  app.require_subcommand(1);
  app.set_version_flag("--version", CLUSTERFIT_VERSION);

  CommonFlags flags;
  std::string photometry, table, sim_output, sweep_filter, sweep_side;
  std::vector<std::string> chain_files;
  std::vector<double> sweep_cuts;
  std::string table_path;
  bool invariance = false, exactness = false;
  std::size_t oracle_draws = 100000;

  auto* fit = app.add_subcommand("fit", "Tune, sample and summarize a cluster fit");
  add_common(fit, flags);
  fit->add_option("--photometry", photometry, "Photometry CSV (overrides the config)");
  fit->add_option("--table", table, "Isochrone table (overrides the config)");

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic catalog with a truth sidecar");
  add_common(simulate, flags);
  simulate->add_option("--output", sim_output, "Catalog path (default <out>/synthetic.csv)");

  auto* summ = app.add_subcommand("summarize", "Summarize stored chain CSVs");
  add_common(summ, flags);
  summ->add_option("files", chain_files, "Chain CSV files")->required()->check(CLI::ExistingFile);

  auto* oracle = app.add_subcommand("oracle", "Brute-force posterior checks");
  add_common(oracle, flags);
  oracle->add_flag("--invariance", invariance, "Field-mass prior invariance on the bundled 3-star fixture");
  oracle->add_flag("--exactness", exactness, "Grid-restricted sampler against exact enumeration (2 stars)");
  oracle->add_option("--draws", oracle_draws, "Post-burn-in draws for --exactness")->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("check-table", "Validate an isochrone table file");
  check->add_option("table", table_path, "Table file")->required();

  auto* sweep = app.add_subcommand("sweep", "Refit under a series of magnitude cuts");
  add_common(sweep, flags);
  sweep->add_option("--filter", sweep_filter, "Cut filter (default: config cut_filter)");
  sweep->add_option("--cuts", sweep_cuts, "Thresholds (default: config cut_thresholds)")->delimiter(',');
  sweep->add_option("--side", sweep_side, "Keep stars brighter (default) or fainter than each cut");
  sweep->add_option("--photometry", photometry, "Photometry CSV (overrides the config)");
  sweep->add_option("--table", table, "Isochrone table (overrides the config)");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << CLUSTERFIT_VERSION << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kValidation;
  }

  try {
    if (*fit) return cmd_fit(flags, photometry, table, out, err);
    if (*simulate) return cmd_simulate(flags, sim_output, out);
    if (*summ) return cmd_summarize(flags, chain_files, out);
    if (*oracle) return cmd_oracle(invariance, exactness, oracle_draws, flags, out);
    if (*check) return cmd_check_table(table_path, out);
    if (*sweep) return cmd_sweep(flags, photometry, table, sweep_filter, sweep_cuts, sweep_side, out, err);
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kValidation;
  } catch (const InvalidConfig& e) {
    err << "invalid input: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kValidation;
}

}  // namespace clusterfit::cli
