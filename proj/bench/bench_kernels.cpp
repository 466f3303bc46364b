// Serial reference vs OpenMP matmul kernels at the shapes the training loop
// produces: (episodes * agents) rows against 64-wide encoder / GRU weights.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "hpf/autodiff/kernels.hpp"

namespace {

using Kernel = void (*)(const float*, const float*, float*, int, int, int);

std::vector<float> random_vec(std::size_t n, std::mt19937& rng) {
  std::uniform_real_distribution<float> d(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (float& x : v) x = d(rng);
  return v;
}

template <Kernel K>
void BM_gemm(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  std::mt19937 rng(1);
  const auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
  const auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
  std::vector<float> c(static_cast<std::size_t>(m) * n);
  for (auto _ : state) {
    K(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 2L * m * k * n);
}

template <Kernel K>
void BM_gemm_tn(benchmark::State& state) {
  const int m = static_cast<int>(state.range(0));
  const int k = static_cast<int>(state.range(1));
  const int n = static_cast<int>(state.range(2));
  std::mt19937 rng(2);
  const auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
  const auto b = random_vec(static_cast<std::size_t>(m) * n, rng);
  std::vector<float> c(static_cast<std::size_t>(k) * n);
  for (auto _ : state) {
    K(a.data(), b.data(), c.data(), m, k, n);
    benchmark::DoNotOptimize(c.data());
    benchmark::ClobberMemory();
  }
  state.SetItemsProcessed(state.iterations() * 2L * m * k * n);
}

void shapes(benchmark::internal::Benchmark* b) {
  b->Args({128, 85, 64})->Args({128, 64, 192})->Args({4096, 64, 192})->Args({25600, 64, 192});
}

}  // namespace

BENCHMARK(BM_gemm<hpf::ad::kernels::gemm_serial>)->Apply(shapes);
BENCHMARK(BM_gemm<hpf::ad::kernels::gemm_parallel>)->Apply(shapes);
BENCHMARK(BM_gemm_tn<hpf::ad::kernels::gemm_tn_serial>)->Apply(shapes);
BENCHMARK(BM_gemm_tn<hpf::ad::kernels::gemm_tn_parallel>)->Apply(shapes);

BENCHMARK_MAIN();
