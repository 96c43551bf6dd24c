// Micro-benchmarks for the numeric kernels that dominate training time:
// the assignment solver, the pyramid loss and its gradient, a generator
// forward pass, and the Fréchet distance.

#include <benchmark/benchmark.h>

#include "cola/assignment.hpp"
#include "cola/metrics.hpp"
#include "cola/nn/models.hpp"
#include "cola/pyramid.hpp"
#include "cola/rng.hpp"

using namespace cola;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng) {
    Tensor t(shape);
    for (scalar& v : t.vec()) v = rng.uniform(0.0, 1.0);
    return t;
}

void bench_hungarian(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Rng rng(1);
    CostMatrix cost(n);
    for (scalar& v : cost.cost) v = rng.uniform(0.0, 10.0);
    for (auto _ : state) {
        Assignment a = solve_assignment(cost);
        benchmark::DoNotOptimize(a.total_cost);
    }
}

void bench_lap_loss(benchmark::State& state) {
    Rng rng(2);
    Tensor x = random_tensor({3, 32, 32}, rng);
    Tensor y = random_tensor({3, 32, 32}, rng);
    PyramidConfig cfg;
    for (auto _ : state) {
        scalar loss = lap_loss(x, y, cfg);
        benchmark::DoNotOptimize(loss);
    }
}

void bench_lap_loss_grad(benchmark::State& state) {
    Rng rng(3);
    Tensor x = random_tensor({3, 32, 32}, rng);
    Tensor y = random_tensor({3, 32, 32}, rng);
    Tensor grad(x.shape());
    PyramidConfig cfg;
    for (auto _ : state) {
        scalar loss = lap_loss_grad(x, y, cfg, grad);
        benchmark::DoNotOptimize(loss);
        benchmark::DoNotOptimize(grad.vec().data());
    }
}

void bench_generator_forward(benchmark::State& state) {
    const int batch = static_cast<int>(state.range(0));
    Rng rng(4);
    nn::Generator generator("tiny", 3, 32, 20, 4, rng);
    Tensor z({batch, 20});
    for (scalar& v : z.vec()) v = rng.normal(0.0, 1.0);
    for (auto _ : state) {
        Tensor out = generator.forward(z, false);
        benchmark::DoNotOptimize(out.vec().data());
    }
}

void bench_frechet(benchmark::State& state) {
    const int d = static_cast<int>(state.range(0));
    Rng rng(5);
    Tensor fa({256, d}), fb({256, d});
    for (scalar& v : fa.vec()) v = rng.normal(0.0, 1.0);
    for (scalar& v : fb.vec()) v = rng.normal(0.1, 1.1);
    GaussianMoments ma = feature_moments(fa);
    GaussianMoments mb = feature_moments(fb);
    for (auto _ : state) {
        scalar fd = frechet_distance(ma, mb);
        benchmark::DoNotOptimize(fd);
    }
}

}  // namespace

BENCHMARK(bench_hungarian)->Arg(16)->Arg(64)->Arg(128);
BENCHMARK(bench_lap_loss);
BENCHMARK(bench_lap_loss_grad);
BENCHMARK(bench_generator_forward)->Arg(1)->Arg(32);
BENCHMARK(bench_frechet)->Arg(16)->Arg(64);

BENCHMARK_MAIN();
