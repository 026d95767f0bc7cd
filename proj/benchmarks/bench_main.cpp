#include <cstddef>
#include <memory>
#include <vector>

#include <benchmark/benchmark.h>

#include "fedstale/aggregation.hpp"
#include "fedstale/engine.hpp"
#include "fedstale/local_solver.hpp"
#include "fedstale/participation.hpp"
#include "fedstale/softmax.hpp"
#include "fedstale/synthetic_data.hpp"

namespace {

using namespace fedstale;

std::shared_ptr<const SoftmaxObjective> softmax_objective(std::size_t clients) {
  LabelSwapOptions o;
  o.n_clients = clients;
  o.swap_fraction = 0.5;
  return std::make_shared<const SoftmaxObjective>(build_label_swap_dataset(o));
}

void BM_Aggregate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto d = static_cast<std::size_t>(state.range(1));
  MemoryBank bank(n, d);
  std::vector<ClientUpdate> updates;
  for (std::size_t i = 0; i < n; i += 2) {
    updates.push_back({i, 1, ParamVector::Random(static_cast<Eigen::Index>(d)), 0.0});
  }
  bank.refresh(updates, 1);
  const std::vector<double> weights(n, 2.0);
  AggregatorConfig cfg;
  cfg.beta = 0.5;
  for (auto _ : state) {
    benchmark::DoNotOptimize(aggregate(cfg, updates, bank, weights, n));
  }
}
BENCHMARK(BM_Aggregate)->Args({24, 110})->Args({100, 1000})->Args({100, 100000});

void BM_LocalTrainSoftmax(benchmark::State& state) {
  const auto obj = softmax_objective(24);
  LocalConfig cfg;
  cfg.local_steps = static_cast<std::size_t>(state.range(0));
  cfg.client_lr = 0.1;
  const ParamVector w = ParamVector::Zero(static_cast<Eigen::Index>(obj->dimension()));
  std::uint64_t round = 0;
  for (auto _ : state) {
    CounterRng rng(0, {++round});
    benchmark::DoNotOptimize(local_train(*obj, 0, w, cfg, rng));
  }
}
BENCHMARK(BM_LocalTrainSoftmax)->Arg(5)->Arg(20);

void BM_EngineRounds(benchmark::State& state) {
  const auto obj = softmax_objective(24);
  TrainConfig cfg;
  cfg.rounds = 20;
  cfg.local.local_steps = 5;
  cfg.local.client_lr = 0.1;
  cfg.profile = make_two_group_profile(24, 0.2, 12, 0);
  cfg.record_metrics = state.range(0) != 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(run(cfg, *obj));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(cfg.rounds));
}
BENCHMARK(BM_EngineRounds)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
