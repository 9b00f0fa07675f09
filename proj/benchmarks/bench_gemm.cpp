#include <benchmark/benchmark.h>

#include <vector>

#include "ambiroom/gemm.hpp"
#include "ambiroom/rng.hpp"

using namespace ambiroom;

namespace {

std::vector<float> random_block(std::size_t n, std::uint64_t seed) {
    StreamRng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-1, 1));
    return v;
}

// Shapes taken from the four conv blocks at the default input size.
void ConvShapeGemm(benchmark::State& state) {
    const int m = static_cast<int>(state.range(0));   // C_out
    const int k = static_cast<int>(state.range(1));   // C_in * 9
    const int n = static_cast<int>(state.range(2));   // D * T * B
    const auto a = random_block(static_cast<std::size_t>(m) * k, 1);
    const auto b = random_block(static_cast<std::size_t>(k) * n, 2);
    std::vector<float> c(static_cast<std::size_t>(m) * n);
    for (auto _ : state) {
        engine::gemm_nn(m, n, k, a.data(), b.data(), c.data(), false);
        benchmark::DoNotOptimize(c.data());
    }
    state.SetItemsProcessed(state.iterations() * 2ll * m * n * k);
}

}  // namespace

BENCHMARK(ConvShapeGemm)->Args({32, 9, 68224});     // block 1 expand
BENCHMARK(ConvShapeGemm)->Args({64, 288, 17056});   // block 2 expand
BENCHMARK(ConvShapeGemm)->Args({128, 576, 4160});   // block 3 expand
BENCHMARK(ConvShapeGemm)->Args({256, 1152, 960});   // block 4 expand

BENCHMARK_MAIN();
