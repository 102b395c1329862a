#include <benchmark/benchmark.h>

#include "fedgbdt/assign_opt.hpp"
#include "fedgbdt/rng.hpp"

namespace {

fedgbdt::AssignmentProblem random_instance(std::size_t n, std::size_t m, std::uint64_t seed) {
  fedgbdt::Rng rng(seed);
  fedgbdt::AssignmentProblem p;
  for (std::size_t j = 0; j < m; ++j) p.leaves.push_back({rng.normal() * 3.0, rng.uniform() * 8.0});
  for (std::size_t i = 0; i < n; ++i) {
    fedgbdt::AssignmentProblem::Sample s;
    s.g = rng.normal();
    s.h = rng.uniform() * 0.25;
    for (std::size_t j = 0; j < m; ++j)
      if (rng.uniform() < 0.5) s.reachable.push_back(static_cast<int>(j));
    if (s.reachable.empty()) s.reachable.push_back(static_cast<int>(rng.below(m)));
    p.samples.push_back(std::move(s));
  }
  return p;
}

void BM_solve_anytime(benchmark::State& state) {
  auto p = random_instance(static_cast<std::size_t>(state.range(0)),
                           static_cast<std::size_t>(state.range(1)), 3);
  for (auto _ : state) {
    auto a = fedgbdt::solve(p, 0.5);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_solve_anytime)->Args({128, 16})->Args({1024, 32})->Args({4096, 64});

void BM_solve_brute_force(benchmark::State& state) {
  auto p = random_instance(8, 4, 7);
  for (auto _ : state) {
    auto a = fedgbdt::solve_brute_force(p);
    benchmark::DoNotOptimize(a);
  }
}
BENCHMARK(BM_solve_brute_force);

}  // namespace

BENCHMARK_MAIN();
