// Serial reference vs OpenMP batched kernels.
#include <benchmark/benchmark.h>

#include "nbeats/kernels.hpp"
#include "nbeats/metrics.hpp"
#include "nbeats/synthetic.hpp"

namespace {

using namespace nbeats;

Batch make_batch(std::size_t rows, std::size_t w) {
    const auto data = make_synthetic_dataset(SyntheticSpec{});
    Rng rng(1);
    return Batch::from_samples(sample_batch(data, rows, w, 12, rng));
}

void run_loss_and_gradient(benchmark::State& state, Execution exec) {
    ModelConfig cfg;
    cfg.width = static_cast<std::size_t>(state.range(0));
    Rng rng(7);
    const auto params = init_params(cfg, rng);
    const auto batch = make_batch(256, cfg.input_size);
    ModelParams grads(cfg);
    for (auto _ : state) {
        benchmark::DoNotOptimize(loss_and_gradient(params, batch, 0.35, grads, exec));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.rows));
}

void BM_LossGradSerial(benchmark::State& state) { run_loss_and_gradient(state, Execution::Serial); }
void BM_LossGradParallel(benchmark::State& state) { run_loss_and_gradient(state, Execution::Parallel); }

void BM_Bootstrap(benchmark::State& state) {
    const auto exec = state.range(0) == 0 ? Execution::Serial : Execution::Parallel;
    std::vector<double> a(420);
    std::vector<double> b(420);
    Rng rng(3);
    std::normal_distribution<double> n(5.0, 1.0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        a[i] = n(rng);
        b[i] = n(rng);
    }
    for (auto _ : state) {
        Rng r(11);
        benchmark::DoNotOptimize(bootstrap_mape_diff_ci(a, b, r, 100000, 0.99, exec));
    }
}

}  // namespace

BENCHMARK(BM_LossGradSerial)->Arg(64)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_LossGradParallel)->Arg(64)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_Bootstrap)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
