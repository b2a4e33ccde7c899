#include <benchmark/benchmark.h>

#include <omp.h>

#include <random>

#include "ctalab/kernels.hpp"

using namespace ctalab;

namespace {

struct Fixture {
    features::FeatureMatrix x;
    std::vector<double> y, s, w;
};

// Random sparse rows shaped roughly like hashed n-gram features of short posts.
Fixture make(std::size_t rows, std::uint32_t dim) {
    std::mt19937_64 rng(17);
    std::vector<features::SparseVector> data(rows);
    for (auto& r : data) {
        std::set<std::uint32_t> idx;
        while (idx.size() < 120) idx.insert(static_cast<std::uint32_t>(rng() % dim));
        for (auto i : idx) {
            r.index.push_back(i);
            r.value.push_back(static_cast<double>(1 + rng() % 3));
        }
    }
    Fixture f{features::FeatureMatrix(data, dim), std::vector<double>(rows), std::vector<double>(rows),
              std::vector<double>(dim)};
    std::normal_distribution<double> nd(0, 0.05);
    for (std::size_t i = 0; i < rows; ++i) {
        f.y[i] = static_cast<double>(rng() % 4 == 0);
        f.s[i] = f.y[i] ? 2.0 : 0.67;
    }
    for (auto& v : f.w) v = nd(rng);
    return f;
}

const Fixture& shared() {
    static const Fixture f = make(8000, 1u << 18);
    return f;
}

void BM_GradientSerial(benchmark::State& state) {
    const auto& f = shared();
    kernels::Problem p{f.x, f.y, f.s, 1e-4};
    std::vector<double> g(f.w.size());
    kernels::Gradient grad{g, 0};
    for (auto _ : state) benchmark::DoNotOptimize(kernels::loss_and_gradient_serial(p, f.w, 0.1, grad));
}

void BM_GradientParallel(benchmark::State& state) {
    const auto& f = shared();
    omp_set_num_threads(static_cast<int>(state.range(0)));
    kernels::Problem p{f.x, f.y, f.s, 1e-4};
    std::vector<double> g(f.w.size());
    kernels::Gradient grad{g, 0};
    for (auto _ : state) benchmark::DoNotOptimize(kernels::loss_and_gradient_parallel(p, f.w, 0.1, grad));
    state.counters["threads"] = static_cast<double>(state.range(0));
}

void BM_Margins(benchmark::State& state) {
    const auto& f = shared();
    std::vector<double> out(f.x.rows());
    for (auto _ : state) {
        kernels::margins_parallel(f.x, f.w, 0.1, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_GradientSerial)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_GradientParallel)->Arg(1)->Arg(2)->Arg(4)->Arg(8)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Margins)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
