#include <benchmark/benchmark.h>

#include <vector>

#include "wss/network.hpp"
#include "wss/trainer.hpp"

namespace {

std::vector<wss::ChannelStack> random_inputs(const wss::Architecture& arch, std::size_t count) {
  std::vector<wss::ChannelStack> in;
  for (std::size_t i = 0; i < count; ++i)
    in.push_back(wss::ChannelStack::Random(static_cast<Eigen::Index>(arch.L),
                                           static_cast<Eigen::Index>(2 * arch.N)));
  return in;
}

wss::Architecture arch_for(int variant) {
  wss::Architecture a;
  a.variant = variant == 0 ? wss::Variant::kCaWssNet : wss::Variant::kMlpWssNet;
  return a;
}

void BM_ForwardBatch(benchmark::State& state) {
  const auto arch = arch_for(static_cast<int>(state.range(0)));
  wss::Rng rng(1);
  const auto model = wss::init_model(arch, rng);
  const auto inputs = random_inputs(arch, 64);
  for (auto _ : state) {
    auto p = wss::forward_batch(model, inputs);
    benchmark::DoNotOptimize(p.data());
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_ForwardBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto arch = arch_for(static_cast<int>(state.range(0)));
  wss::Rng rng(2);
  auto model = wss::init_model(arch, rng);
  const auto inputs = random_inputs(arch, 64);
  Eigen::MatrixXd labels = (Eigen::MatrixXd::Random(64, static_cast<Eigen::Index>(arch.L)).array() > 0.4).cast<double>();
  wss::AdamOptimizer opt(model, 3e-5);
  wss::Gradients g;
  for (auto _ : state) {
    const double loss = wss::loss_and_gradients(model, inputs, labels, g);
    opt.step(model, g, wss::LayerSet::all());
    benchmark::DoNotOptimize(loss);
  }
  state.SetItemsProcessed(state.iterations() * 64);
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace
