// Serial reference kernels against the OpenMP kernels, plus the two protocol
// hot spots built on them. Thread count follows OMP_NUM_THREADS.

#include "okmp/gkm.hpp"
#include "okmp/kernels.hpp"
#include "okmp/ortholin.hpp"

#include <benchmark/benchmark.h>

#include <vector>

namespace {

using namespace okmp;
using kernels::Backend;

std::vector<std::uint64_t> residues(std::size_t count, std::uint64_t seed) {
    SeededRandom rng(seed);
    std::vector<std::uint64_t> out(count);
    for (auto& x : out) {
        x = rng.uniform_below(kernels::kMersenne61);
    }
    return out;
}

Backend backend_of(const benchmark::State& state) { return state.range(1) == 0 ? Backend::Serial : Backend::Parallel; }

void set_label(benchmark::State& state) { state.SetLabel(state.range(1) == 0 ? "serial" : "parallel"); }

void BM_Dot(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto a = residues(m, 1), b = residues(m, 2);
    const kernels::Kernels k{backend_of(state)};
    const kernels::Modulus mod;
    for (auto _ : state) {
        benchmark::DoNotOptimize(k.dot(mod, a, b));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m));
    set_label(state);
}

void BM_Axpy(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const auto x = residues(m, 3);
    auto y = residues(m, 4);
    const kernels::Kernels k{backend_of(state)};
    const kernels::Modulus mod;
    for (auto _ : state) {
        k.axpy(mod, 12345, x, y);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m));
    set_label(state);
}

// Aggregate rebuild: n rows of length m, weighted by the scalars.
void BM_WeightedRowSum(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const std::size_t n = m / 2;
    const auto rows = residues(n * m, 5);
    const auto weights = residues(n, 6);
    std::vector<std::uint64_t> out(m);
    const kernels::Kernels k{backend_of(state)};
    const kernels::Modulus mod;
    for (auto _ : state) {
        k.weighted_row_sum(mod, rows, m, weights, out);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(n * m));
    set_label(state);
}

// The Gram-Schmidt projection step: 16 candidates against k accepted rows.
void BM_CrossDots(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const std::size_t k_rows = 256, block = 16;
    const auto rows = residues(k_rows * m, 7);
    const auto targets = residues(block * m, 8);
    std::vector<std::uint64_t> gram(block * k_rows);
    const kernels::Kernels k{backend_of(state)};
    const kernels::Modulus mod;
    for (auto _ : state) {
        k.cross_dots(mod, rows, targets, m, gram);
        benchmark::ClobberMemory();
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(k_rows * block * m));
    set_label(state);
}

void BM_Orthogonalization(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const PrimeField field(kDefaultPrime, FieldMode::Test);
    GenOptions opts;
    opts.backend = backend_of(state);
    std::uint64_t seed = 0;
    for (auto _ : state) {
        SeededRandom rng(++seed);
        benchmark::DoNotOptimize(gen_orthogonal_system(field, m, m / 4, rng, opts));
    }
    set_label(state);
}

void BM_Rekey(benchmark::State& state) {
    const auto m = static_cast<std::size_t>(state.range(0));
    const PrimeField field(kDefaultPrime, FieldMode::Test);
    SeededRandom rng(9);
    auto group = GroupState::with_system(OrthogonalSystem::canonical(field, m, m / 2), rng);
    const Fe s = field.rand_nonzero(rng);
    for (auto _ : state) {
        benchmark::DoNotOptimize(group.build_rekey(s));
    }
    set_label(state);
}

void vector_sizes(benchmark::internal::Benchmark* b) {
    for (std::int64_t m : {1 << 10, 1 << 14, 1 << 18}) {
        b->Args({m, 0})->Args({m, 1});
    }
}

void matrix_sizes(benchmark::internal::Benchmark* b) {
    for (std::int64_t m : {256, 1024, 2048}) {
        b->Args({m, 0})->Args({m, 1});
    }
}

} // namespace

BENCHMARK(BM_Dot)->Apply(vector_sizes);
BENCHMARK(BM_Axpy)->Apply(vector_sizes);
BENCHMARK(BM_WeightedRowSum)->Apply(matrix_sizes);
BENCHMARK(BM_CrossDots)->Apply(matrix_sizes);
BENCHMARK(BM_Orthogonalization)->Args({400, 0})->Args({400, 1})->Args({1200, 0})->Args({1200, 1})->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Rekey)->Args({1000, 1})->Args({2000, 1})->Args({4000, 1});

BENCHMARK_MAIN();
