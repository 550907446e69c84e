// OpenMP kernels against their serial references, at training-loop shapes
// (a 64-window batch of 18 points).

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "wip/kernels.hpp"

namespace k = wip::kernels;

namespace {

std::vector<float> random_values(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> g(0.f, 1.f);
  std::vector<float> v(n);
  for (auto& x : v) x = g(rng);
  return v;
}

template <bool Parallel>
void BM_Gemm(benchmark::State& state) {
  const auto m = static_cast<std::size_t>(state.range(0));
  const auto n = static_cast<std::size_t>(state.range(1));
  const auto kk = static_cast<std::size_t>(state.range(2));
  const auto a = random_values(m * kk, 1), b = random_values(kk * n, 2);
  std::vector<float> c(m * n);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::gemm(k::Trans::No, k::Trans::No, m, n, kk, 1.f, a.data(), kk, b.data(), n, 0.f, c.data(), n);
    } else {
      k::serial::gemm(k::Trans::No, k::Trans::No, m, n, kk, 1.f, a.data(), kk, b.data(), n, 0.f,
                      c.data(), n);
    }
    benchmark::DoNotOptimize(c.data());
  }
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * m * n * kk));
  state.counters["threads"] = Parallel ? k::max_threads() : 1;
}

template <bool Parallel>
void BM_Knn(benchmark::State& state) {
  const std::size_t groups = 64, points = 18, neighbours = 4;  // ModelConfig::knn_k
  const auto dim = static_cast<std::size_t>(state.range(0));
  const auto f = random_values(groups * points * dim, 3);
  std::vector<std::int32_t> out(groups * points * neighbours);
  for (auto _ : state) {
    if constexpr (Parallel) {
      k::knn_groups(f.data(), groups, points, dim, neighbours, std::span(out));
    } else {
      k::serial::knn_groups(f.data(), groups, points, dim, neighbours, std::span(out));
    }
    benchmark::DoNotOptimize(out.data());
  }
  state.counters["threads"] = Parallel ? k::max_threads() : 1;
}

void gemm_shapes(benchmark::internal::Benchmark* b) {
  b->Args({1152, 64, 12})->Args({1152, 128, 128})->Args({1152, 256, 512})->Args({64, 128, 256});
}

}  // namespace

BENCHMARK(BM_Gemm<true>)->Name("gemm/omp")->Apply(gemm_shapes);
BENCHMARK(BM_Gemm<false>)->Name("gemm/serial")->Apply(gemm_shapes);
BENCHMARK(BM_Knn<true>)->Name("knn/omp")->Arg(12)->Arg(64);
BENCHMARK(BM_Knn<false>)->Name("knn/serial")->Arg(12)->Arg(64);

BENCHMARK_MAIN();
