#include <benchmark/benchmark.h>

#include "fedgbdt/federation.hpp"
#include "fedgbdt/gbdt.hpp"
#include "fixtures.hpp"

namespace {

void BM_train_ensemble(benchmark::State& state) {
  auto data = fixtures::synthetic_pima(static_cast<std::size_t>(state.range(0)), 1);
  fedgbdt::BoostParams params;
  params.n_trees = 20;
  params.max_depth = static_cast<int>(state.range(1));
  for (auto _ : state) {
    auto ens = fedgbdt::train_ensemble(data, params);
    benchmark::DoNotOptimize(ens);
  }
}
BENCHMARK(BM_train_ensemble)->Args({512, 4})->Args({2048, 6});

void BM_histogram_protocol(benchmark::State& state) {
  auto data = fixtures::synthetic_pima(1024, 2);
  auto clients = fedgbdt::dirichlet_partition(data, 3, 0.5, 5);
  fedgbdt::FedConfig cfg;
  cfg.protocol = fedgbdt::Protocol::histogram;
  cfg.n_clients = 3;
  cfg.rounds = 10;
  cfg.boost.max_depth = static_cast<int>(state.range(0));
  cfg.seed = 11;
  for (auto _ : state) {
    auto result = fedgbdt::run_histogram(clients, cfg);
    benchmark::DoNotOptimize(result);
  }
}
BENCHMARK(BM_histogram_protocol)->Arg(4)->Arg(6);

}  // namespace
