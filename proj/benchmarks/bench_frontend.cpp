#include <benchmark/benchmark.h>

#include "wss/dataset.hpp"
#include "wss/somp.hpp"

namespace {

wss::SampleGenerator paper_generator() {
  wss::SpectrumConfig spec;
  wss::Rng rng(7);
  auto pattern = wss::draw_coset_pattern(spec.num_subbands, 16, rng);
  return wss::SampleGenerator(spec, wss::build_measurement_matrix(pattern, spec.nyquist_interval_s()), 64);
}

void BM_SampleGeneration(benchmark::State& state) {
  const auto gen = paper_generator();
  std::size_t i = 0;
  for (auto _ : state) {
    auto s = gen.make(1, wss::StreamId::kTrain, i++, 8.0, 12);
    benchmark::DoNotOptimize(s.features.data().data());
  }
}
BENCHMARK(BM_SampleGeneration)->Unit(benchmark::kMicrosecond);

void BM_Somp(benchmark::State& state) {
  const auto gen = paper_generator();
  const auto s = gen.make(1, wss::StreamId::kTest, 0, 6.0, 12);
  const auto Y = wss::branch_spectra(s.branches, gen.matrix().pattern());
  for (auto _ : state) {
    auto r = wss::somp_detect(Y, gen.matrix(), 12);
    benchmark::DoNotOptimize(r.support.data());
  }
}
BENCHMARK(BM_Somp)->Unit(benchmark::kMicrosecond);

}  // namespace
