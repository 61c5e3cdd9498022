// Compares the OpenMP im2col convolution kernels against the serial
// nested-loop reference on training-scale shapes.

#include <benchmark/benchmark.h>

#include "focusnet/ops.hpp"
#include "focusnet/reference.hpp"
#include "focusnet/rng.hpp"

using namespace focusnet;

namespace {

TensorF random_tensor(Shape shape, RngState& rng) {
    TensorF t(std::move(shape));
    for (auto& v : t.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
    return t;
}

void bench_conv_parallel(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int c = static_cast<int>(state.range(1));
    const int s = static_cast<int>(state.range(2));
    RngState rng(1);
    const TensorF x = random_tensor({n, c, s, s}, rng);
    const TensorF w = random_tensor({c, c, 3, 3}, rng);
    const ConvGeometry g = conv_geometry(s, s, 3, 1, Padding::kSame);
    for (auto _ : state) {
        TensorF y = conv_forward(x, w, g);
        benchmark::DoNotOptimize(y.data.data());
    }
}

void bench_conv_serial(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    const int c = static_cast<int>(state.range(1));
    const int s = static_cast<int>(state.range(2));
    RngState rng(1);
    const TensorF x = random_tensor({n, c, s, s}, rng);
    const TensorF w = random_tensor({c, c, 3, 3}, rng);
    const TensorF b = TensorF::zeros({c});
    for (auto _ : state) {
        TensorF y = reference::conv2d_naive(x, w, b, 1, Padding::kSame);
        benchmark::DoNotOptimize(y.data.data());
    }
}

}  // namespace

BENCHMARK(bench_conv_parallel)->Args({8, 32, 64})->Args({8, 64, 32})->Args({1, 32, 256});
BENCHMARK(bench_conv_serial)->Args({8, 32, 64})->Args({8, 64, 32})->Args({1, 32, 256});

BENCHMARK_MAIN();
