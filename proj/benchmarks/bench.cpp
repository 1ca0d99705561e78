#include <benchmark/benchmark.h>

#include <memory>

#include "clusterfit/likelihood.hpp"
#include "clusterfit/posterior.hpp"
#include "clusterfit/sampler.hpp"
#include "clusterfit/stellar_model.hpp"
#include "clusterfit/synthetic.hpp"

using namespace clusterfit;

namespace {

std::shared_ptr<const IsochroneTable> table() {
  static const auto t = std::make_shared<const IsochroneTable>(toy_table(ToyModelConfig::defaults()));
  return t;
}

SyntheticCatalog cluster(std::size_t n) {
  SyntheticConfig sc;
  sc.theta = {9.0, 0.0, 0.0, 0.5, 0.1};
  sc.n_cluster = n;
  sc.n_field = n / 5;
  sc.field_min_offset_sigma = 5.0;
  sc.seed = 1;
  return generate_cluster(*table(), sc);
}

void BM_Interpolate(benchmark::State& state) {
  const auto t = table();
  double m = 0.2;
  for (auto _ : state) {
    benchmark::DoNotOptimize(interpolate_magnitudes(*t, m, 9.02, -0.13));
    m = m > 2.4 ? 0.2 : m + 0.013;
  }
}
BENCHMARK(BM_Interpolate);

void BM_StarTerm(benchmark::State& state) {
  const auto synth = cluster(100);
  const Posterior post(table(), synth.catalog, synth.ranges, ClusterPriorSpec{});
  const ClusterParams theta{9.0, 0.0, 0.0, 0.5, 0.1};
  const StarState star{1.1, state.range(0) ? 0.6 : 0.0, 1};
  for (auto _ : state) benchmark::DoNotOptimize(post.star_term(3, star, theta));
}
BENCHMARK(BM_StarTerm)->Arg(0)->Arg(1);

void BM_Sweep(benchmark::State& state) {
  const auto synth = cluster(static_cast<std::size_t>(state.range(0)));
  const Posterior post(table(), synth.catalog, synth.ranges, ClusterPriorSpec{});
  const auto spec = TransformSpec::zero(synth.catalog.size());
  auto chain = make_chain_state(screened_initial_state(post, synth.truth.theta), post, spec, 1);
  auto steps = StepSizes::initial(synth.catalog.size());
  const SweepOptions opts;
  for (auto _ : state) gibbs_sweep(chain, post, spec, steps, opts);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Sweep)->Arg(25)->Arg(100)->Arg(400);

}  // namespace

BENCHMARK_MAIN();
