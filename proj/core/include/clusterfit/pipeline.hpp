#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "clusterfit/config.hpp"
#include "clusterfit/diagnostics.hpp"
#include "clusterfit/likelihood.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/tuning.hpp"

namespace clusterfit {

/// Table and catalog named by a config, with checksums of the raw files.
struct FitInputs {
  std::shared_ptr<const IsochroneTable> table;
  PhotometryCatalog catalog;
  std::string table_checksum;  ///< "toy" for the built-in table
  std::string photometry_checksum;
};

/// Loads the table (or builds the toy table) and the photometry.
FitInputs load_inputs(const RunConfig& config);
std::shared_ptr<const IsochroneTable> load_table(const RunConfig& config);

/// Applies the config's max_mag cut, if any.
PhotometryCatalog apply_max_mag(const RunConfig& config, const PhotometryCatalog& catalog);

struct ChainResult {
  std::uint64_t seed = 0;
  TuningResult tuning;
  SampleSet samples;
  StepSizes main_steps;
};

struct FitResult {
  PhotometryCatalog catalog;  ///< after cuts, aligned to the table
  FieldRanges ranges;
  std::vector<ChainResult> chains;
  ChainSummary summary;  ///< pooled over chains
};

/// Progress callback: (chain index, message).
using FitLog = std::function<void(std::size_t, const std::string&)>;

/// Tuning schedule plus main run for each chain (seed + chain index), then a
/// pooled summary. Chains run concurrently. Throws InsufficientStars for
/// fewer than 2 stars.
FitResult run_fit(const RunConfig& config, std::shared_ptr<const IsochroneTable> table,
                  const PhotometryCatalog& catalog, const FitLog& log = {});

/// Writes chain_<k>.csv, tuning_<k>.txt, regressions_<k>.csv, chains.csv
/// (per-chain moments), summary.csv, summary.txt, membership.csv, config.txt
/// and manifest.txt into `dir`.
void write_fit_outputs(const std::string& dir, const RunConfig& config, const FitInputs& inputs,
                       const FitResult& result);

/// key = value manifest. Paths and the output directory are left out so two
/// runs of the same inputs in different places compare equal.
void write_manifest(std::ostream& out, const std::string& command, const RunConfig& config,
                    const FitInputs& inputs, const std::vector<std::uint64_t>& chain_seeds,
                    const std::vector<std::pair<std::string, std::string>>& outputs);

struct SweepEntry {
  double threshold = 0.0;
  std::size_t stars = 0;
  FitResult fit;
};

/// Refits the catalog once per threshold, keeping stars on the chosen side
/// of each cut in `filter`. Entry k uses seed + k. Throws InsufficientStars
/// when a cut leaves fewer than 2 stars.
std::vector<SweepEntry> magnitude_cut_sweep(const RunConfig& config, std::shared_ptr<const IsochroneTable> table,
                                            const PhotometryCatalog& catalog, const std::string& filter,
                                            const std::vector<double>& thresholds, CutSide side,
                                            const FitLog& log = {});

/// cut,threshold,stars,parameter,mean,sd
void write_sweep_csv(std::ostream& out, const std::vector<SweepEntry>& entries);

/// Creates `dir` (and parents); returns it.
std::string ensure_directory(const std::string& dir);
/// Writes `contents` to dir/name and returns its checksum.
std::string write_output_file(const std::string& dir, const std::string& name, const std::string& contents);

}  // namespace clusterfit
