#pragma once

#include <iosfwd>
#include <string>

#include "clusterfit/sampler.hpp"

namespace clusterfit {

/// Chain CSV: iter,logpost,theta_age,theta_feh,theta_heh,theta_dm,theta_av
/// followed, when per_star is set, by Z_<id>,M1_<id>,R_<id> for each star.
void write_chain_csv(std::ostream& out, const SampleSet& samples, bool per_star);
void write_chain_csv(const std::string& path, const SampleSet& samples, bool per_star);

/// Inverse of write_chain_csv. Without per-star columns the result has no stars.
SampleSet parse_chain_csv(std::istream& in, const std::string& source = "");
SampleSet read_chain_csv(const std::string& path);

}  // namespace clusterfit
