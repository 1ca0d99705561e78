#include "clusterfit/pipeline.hpp"

#include <exception>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "clusterfit/chain_io.hpp"
#include "clusterfit/errors.hpp"
#include "clusterfit/posterior.hpp"
#include "clusterfit/text.hpp"

#ifndef CLUSTERFIT_VERSION
#define CLUSTERFIT_VERSION "unknown"
#endif

namespace clusterfit {

namespace {

std::string checksum(std::string_view bytes) { return "fnv1a64:" + text::hex64(text::fnv1a(bytes)); }

ChainResult run_one_chain(const RunConfig& config, std::shared_ptr<const IsochroneTable> table,
                          const PhotometryCatalog& catalog, const FieldRanges& ranges, std::uint64_t seed,
                          std::size_t index, const FitLog& log) {
  Posterior posterior(std::move(table), catalog, ranges, config.prior, MassPriorSpec{}, config.default_pmember,
                      ModelOptions{config.exclude_wd_binaries});
  const NaturalState start = screened_initial_state(posterior, config.init);
  ChainResult out;
  out.seed = seed;
  TuningObserver observer;
  if (log) {
    observer = [&](int pass, int run, const SampleSet&) {
      log(index, "tuning pass " + std::to_string(pass) + " run " + std::to_string(run) + " done");
    };
  }
  out.tuning = run_tuning_schedule(posterior, start, seed, config.tuning(), observer);
  out.main_steps = out.tuning.steps;
  out.main_steps.reset_totals();
  ChainState state = out.tuning.state;
  ChainRunConfig rc;
  rc.burn_in = 0;
  rc.draws = config.draws;
  rc.thin = config.main_thin;
  rc.sweep.sample_membership = config.sample_membership;
  rc.sweep.adapt = false;
  out.samples = run_chain(state, posterior, out.tuning.transform, out.main_steps, rc);
  if (log) log(index, "main run done");
  return out;
}

}  // namespace

std::shared_ptr<const IsochroneTable> load_table(const RunConfig& config) {
  if (config.table.empty()) return std::make_shared<const IsochroneTable>(toy_table(ToyModelConfig::defaults()));
  return std::make_shared<const IsochroneTable>(read_table(config.table));
}

FitInputs load_inputs(const RunConfig& config) {
  FitInputs in;
  in.table = load_table(config);
  in.table_checksum = config.table.empty() ? "toy" : checksum(text::read_file(config.table));
  const std::string raw = text::read_file(config.photometry);
  in.photometry_checksum = checksum(raw);
  std::istringstream stream(raw);
  in.catalog = parse_catalog_csv(stream, config.photometry);
  return in;
}

PhotometryCatalog apply_max_mag(const RunConfig& config, const PhotometryCatalog& catalog) {
  if (config.max_mag_filter.empty()) return catalog;
  const auto rows = magnitude_cut_rows(catalog, config.max_mag_filter, config.max_mag, CutSide::kKeepBrighter);
  return catalog.select(rows);
}

FitResult run_fit(const RunConfig& config, std::shared_ptr<const IsochroneTable> table,
                  const PhotometryCatalog& catalog, const FitLog& log) {
  config.validate();
  if (catalog.size() < 2) throw InsufficientStars("at least 2 stars are needed, got " + std::to_string(catalog.size()));
  FitResult res;
  res.catalog = catalog.filters == table->filters().names ? catalog : align_to_filters(catalog, table->filters());
  res.ranges = FieldRanges::from_catalog(res.catalog);
  res.chains.resize(config.chains);

  std::vector<std::exception_ptr> errors(config.chains);
  auto work = [&](std::size_t k) {
    try {
      res.chains[k] = run_one_chain(config, table, res.catalog, res.ranges, config.seed + k, k, log);
    } catch (...) {
      errors[k] = std::current_exception();
    }
  };
  if (config.chains == 1) {
    work(0);
  } else {
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < config.chains; ++k) threads.emplace_back(work, k);
    for (auto& t : threads) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);

  std::vector<SampleSet> sets;
  for (const auto& c : res.chains) sets.push_back(c.samples);
  StepSizes pooled = res.chains.front().main_steps;
  for (std::size_t k = 1; k < res.chains.size(); ++k) {
    const StepSizes& s = res.chains[k].main_steps;
    auto add = [](StepControl& a, const StepControl& b) {
      a.total_accepted += b.total_accepted;
      a.total_proposed += b.total_proposed;
    };
    for (std::size_t i = 0; i < pooled.u.size(); ++i) {
      add(pooled.u[i], s.u[i]);
      add(pooled.r[i], s.r[i]);
    }
    for (std::size_t c = 0; c < kClusterSlots; ++c) add(pooled.cluster[c], s.cluster[c]);
    add(pooled.z, s.z);
  }
  res.summary = summarize(pool_chains(sets), &pooled);
  return res;
}

std::string ensure_directory(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());
  return dir;
}

std::string write_output_file(const std::string& dir, const std::string& name, const std::string& contents) {
  const auto path = (std::filesystem::path(dir) / name).string();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << contents;
  if (!out) throw Error("write failed: " + path);
  return checksum(contents);
}

void write_manifest(std::ostream& out, const std::string& command, const RunConfig& config,
                    const FitInputs& inputs, const std::vector<std::uint64_t>& chain_seeds,
                    const std::vector<std::pair<std::string, std::string>>& outputs) {
  out << "command = " << command << '\n';
  out << "version = " << CLUSTERFIT_VERSION << '\n';
#if defined(__VERSION__)
  out << "compiler = " << __VERSION__ << '\n';
#endif
  out << "seed = " << config.seed << '\n';
  out << "chain_seeds = ";
  for (std::size_t k = 0; k < chain_seeds.size(); ++k) out << (k ? "," : "") << chain_seeds[k];
  out << '\n';
  out << "input.table = " << inputs.table_checksum << '\n';
  out << "input.photometry = " << inputs.photometry_checksum << '\n';
  std::istringstream cfg(emit_config(config));
  std::string line;
  while (std::getline(cfg, line)) {
    if (line.rfind("out_dir ", 0) == 0 || line.rfind("table ", 0) == 0 || line.rfind("photometry ", 0) == 0)
      continue;
    out << "config." << line << '\n';
  }
  for (const auto& [name, sum] : outputs) out << "output." << name << " = " << sum << '\n';
}

void write_fit_outputs(const std::string& dir, const RunConfig& config, const FitInputs& inputs,
                       const FitResult& result) {
  ensure_directory(dir);
  std::vector<std::pair<std::string, std::string>> outputs;
  std::vector<std::uint64_t> seeds;
  auto emit = [&](const std::string& name, const std::string& contents) {
    outputs.emplace_back(name, write_output_file(dir, name, contents));
  };
  for (std::size_t k = 0; k < result.chains.size(); ++k) {
    const ChainResult& c = result.chains[k];
    seeds.push_back(c.seed);
    std::ostringstream chain, tuning, reg;
    write_chain_csv(chain, c.samples, config.per_star);
    emit("chain_" + std::to_string(k) + ".csv", chain.str());
    write_tuning(tuning, c.tuning.transform, c.tuning.pseudo_prior, c.tuning.steps);
    emit("tuning_" + std::to_string(k) + ".txt", tuning.str());
    reg << "pass,run,coefficient,slope,se,adopted\n";
    for (const auto& r : c.tuning.regressions)
      reg << r.pass << ',' << r.run << ',' << r.coefficient << ',' << text::format_double(r.slope) << ','
          << text::format_double(r.se) << ',' << text::format_double(r.adopted) << '\n';
    emit("regressions_" + std::to_string(k) + ".csv", reg.str());
  }
  std::ostringstream per_chain;
  per_chain << "chain,seed,parameter,mean,sd,ess,lag1\n";
  for (std::size_t k = 0; k < result.chains.size(); ++k) {
    const ChainSummary s = summarize(result.chains[k].samples);
    for (const auto& p : s.parameters)
      per_chain << k << ',' << result.chains[k].seed << ',' << p.name << ',' << text::format_double(p.mean) << ','
                << text::format_double(p.sd) << ',' << text::format_double(p.ess) << ','
                << text::format_double(p.lag1()) << '\n';
  }
  emit("chains.csv", per_chain.str());
  std::ostringstream summary, text_summary, membership;
  write_summary_csv(summary, result.summary);
  emit("summary.csv", summary.str());
  write_summary_text(text_summary, result.summary);
  emit("summary.txt", text_summary.str());
  write_membership_csv(membership, result.summary);
  emit("membership.csv", membership.str());
  // Carries the output directory, so it stays out of the path-free manifest.
  write_output_file(dir, "config.txt", emit_config(config));
  std::ostringstream manifest;
  write_manifest(manifest, "fit", config, inputs, seeds, outputs);
  write_output_file(dir, "manifest.txt", manifest.str());
}

std::vector<SweepEntry> magnitude_cut_sweep(const RunConfig& config, std::shared_ptr<const IsochroneTable> table,
                                            const PhotometryCatalog& catalog, const std::string& filter,
                                            const std::vector<double>& thresholds, CutSide side,
                                            const FitLog& log) {
  if (thresholds.empty()) throw ValidationError("cut_thresholds", "at least one cut required");
  std::vector<SweepEntry> out;
  for (std::size_t k = 0; k < thresholds.size(); ++k) {
    const auto rows = magnitude_cut_rows(catalog, filter, thresholds[k], side);
    if (rows.size() < 2)
      throw InsufficientStars("cut " + text::format_double(thresholds[k]) + " leaves " + std::to_string(rows.size()) +
                              " stars");
    RunConfig entry = config;
    entry.seed = config.seed + k;
    SweepEntry e;
    e.threshold = thresholds[k];
    e.stars = rows.size();
    FitLog entry_log;
    if (log) entry_log = [&](std::size_t chain, const std::string& msg) { log(chain, "cut " + std::to_string(k) + ": " + msg); };
    e.fit = run_fit(entry, table, catalog.select(rows), entry_log);
    out.push_back(std::move(e));
  }
  return out;
}

void write_sweep_csv(std::ostream& out, const std::vector<SweepEntry>& entries) {
  out << "cut,threshold,stars,parameter,mean,sd\n";
  for (std::size_t k = 0; k < entries.size(); ++k) {
    for (const auto& p : entries[k].fit.summary.parameters) {
      out << k << ',' << text::format_double(entries[k].threshold) << ',' << entries[k].stars << ',' << p.name << ','
          << text::format_double(p.mean) << ',' << text::format_double(p.sd) << '\n';
    }
  }
}

}  // namespace clusterfit
