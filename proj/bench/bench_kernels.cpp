// Serial reference kernels against their OpenMP counterparts.
//   parg_bench --benchmark_filter=mine

#include <benchmark/benchmark.h>

#include <omp.h>

#include "parg/mining.hpp"
#include "parg/neural/train.hpp"
#include "parg/synthetic.hpp"

using namespace parg;

namespace {

const Corpus& corpus() {
  static const Corpus c = [] {
    SyntheticConfig sc;
    sc.dialogs = 400;
    return synthetic_corpus(sc);
  }();
  return c;
}

struct GradientSetup {
  neural::Model model;
  std::vector<neural::EncodedInstance> batch;
};

const GradientSetup& gradient_setup() {
  static const GradientSetup s = [] {
    const auto instances = build_instances(corpus(), {}, ParaphraseSource::mined, 1, MiningConfig{});
    neural::ModelConfig cfg;
    neural::Model m(cfg, neural::Vocab::build(instances, corpus().ontology));
    std::vector<neural::EncodedInstance> batch;
    for (std::size_t i = 0; i < 32; ++i) batch.push_back(neural::encode_instance(m.vocab(), instances[i], m.config()));
    return GradientSetup{std::move(m), std::move(batch)};
  }();
  return s;
}

void BM_mine_serial(benchmark::State& state) {
  const MiningConfig cfg;
  for (auto _ : state) benchmark::DoNotOptimize(serial::mine_pairs(corpus(), cfg));
}

void BM_mine_parallel(benchmark::State& state) {
  const MiningConfig cfg;
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(parallel::mine_pairs(corpus(), cfg, threads));
}

void BM_gradient_serial(benchmark::State& state) {
  const auto& s = gradient_setup();
  for (auto _ : state) benchmark::DoNotOptimize(neural::serial::batch_gradient(s.model, s.batch));
}

void BM_gradient_parallel(benchmark::State& state) {
  const auto& s = gradient_setup();
  const int threads = static_cast<int>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(neural::parallel::batch_gradient(s.model, s.batch, threads));
}

void thread_counts(benchmark::internal::Benchmark* b) {
  for (int t = 1; t <= omp_get_max_threads(); t *= 2) b->Arg(t);
  if (omp_get_max_threads() & (omp_get_max_threads() - 1)) b->Arg(omp_get_max_threads());
}

}  // namespace

BENCHMARK(BM_mine_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mine_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gradient_serial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_gradient_parallel)->Apply(thread_counts)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
