// Serial vs OpenMP kernels on CIFAR-sized layers.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "evocnn/kernels.hpp"

using namespace evocnn::kernels;

namespace {

std::vector<double> noise(std::size_t n, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> d(0.0, 1.0);
    std::vector<double> v(n);
    for (auto& x : v) x = d(rng);
    return v;
}

ConvGeometry conv_case() { return ConvGeometry::make(50, 16, 32, 32, 32, 3, 3, 1); }

template <auto Kernel>
void BM_ConvForward(benchmark::State& state) {
    const auto g = conv_case();
    const auto x = noise(g.input_size(), 1), w = noise(g.weight_size(), 2), b = noise(g.out_c, 3);
    std::vector<double> out(g.output_size());
    for (auto _ : state) {
        Kernel(g, x, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Kernel>
void BM_ConvBackwardInput(benchmark::State& state) {
    const auto g = conv_case();
    const auto gy = noise(g.output_size(), 1), w = noise(g.weight_size(), 2);
    std::vector<double> gx(g.input_size());
    for (auto _ : state) {
        Kernel(g, gy, w, gx);
        benchmark::DoNotOptimize(gx.data());
    }
}

template <auto Kernel>
void BM_ConvBackwardParams(benchmark::State& state) {
    const auto g = conv_case();
    const auto gy = noise(g.output_size(), 1), x = noise(g.input_size(), 2);
    std::vector<double> gw(g.weight_size()), gb(g.out_c);
    for (auto _ : state) {
        Kernel(g, gy, x, gw, gb);
        benchmark::DoNotOptimize(gw.data());
    }
}

template <auto Kernel>
void BM_MaxPool(benchmark::State& state) {
    const auto g = PoolGeometry::make(50, 32, 32, 32, 2, 2);
    const auto x = noise(g.batch * g.channels * g.in_h * g.in_w, 1);
    std::vector<double> out(g.batch * g.channels * g.out_h * g.out_w);
    std::vector<std::size_t> arg(out.size());
    for (auto _ : state) {
        Kernel(g, x, out, arg);
        benchmark::DoNotOptimize(out.data());
    }
}

template <auto Kernel>
void BM_Dense(benchmark::State& state) {
    const DenseGeometry g{50, 4096, 10};
    const auto x = noise(g.batch * g.in_features, 1), w = noise(g.units * g.in_features, 2), b = noise(g.units, 3);
    std::vector<double> out(g.batch * g.units);
    for (auto _ : state) {
        Kernel(g, x, w, b, out);
        benchmark::DoNotOptimize(out.data());
    }
}

}  // namespace

BENCHMARK(BM_ConvForward<serial::conv_forward>)->Name("conv_forward/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvForward<parallel::conv_forward>)->Name("conv_forward/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInput<serial::conv_backward_input>)->Name("conv_backward_input/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardInput<parallel::conv_backward_input>)->Name("conv_backward_input/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParams<serial::conv_backward_params>)->Name("conv_backward_params/serial")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ConvBackwardParams<parallel::conv_backward_params>)->Name("conv_backward_params/parallel")->Unit(benchmark::kMillisecond);
BENCHMARK(BM_MaxPool<serial::maxpool_forward>)->Name("maxpool_forward/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_MaxPool<parallel::maxpool_forward>)->Name("maxpool_forward/parallel")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Dense<serial::dense_forward>)->Name("dense_forward/serial")->Unit(benchmark::kMicrosecond);
BENCHMARK(BM_Dense<parallel::dense_forward>)->Name("dense_forward/parallel")->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
