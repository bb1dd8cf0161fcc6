#include <benchmark/benchmark.h>

#include "fedsim/rng.hpp"
#include "fedsim/server.hpp"

// Serial reference vs OpenMP execution of the same round loop. The parallel
// path is bit-identical (covered by tests); this target measures what the
// threading buys per round.

namespace {

using namespace fedsim;

struct Fixture {
    Dataset pool;
    FederatedDataset fed;
    ModelSpec spec;
    LocalConfig local;
    ServerConfig server;

    Fixture() {
        pool = generate_synthetic(10, 32, 400, 3.0, 1);
        fed = partition_dirichlet(pool, 32, 0.3, 2);
        spec = ModelSpec{ModelKind::mlp1, 32, 32, 10, Activation::tanh};
        local.lr = 0.05;
        local.batch_size = 20;
        server.rounds = std::size_t(1) << 40; // loop as long as the benchmark wants
        server.clients_per_round = 16;
        server.seed = 3;
        server.wima = WimaConfig{50, std::nullopt};
    }
};

const Fixture& fixture() {
    static Fixture f;
    return f;
}

void bm_round(benchmark::State& state, ExecMode mode, bool evaluate) {
    const auto& f = fixture();
    auto world = FederatedWorld::create(f.spec, f.fed, f.local, f.server, mode);
    for (auto _ : state) {
        auto rec = world.run_round(evaluate);
        benchmark::DoNotOptimize(rec.mean_local_loss);
    }
}

void bm_accuracy(benchmark::State& state, ExecMode mode) {
    const auto& f = fixture();
    const auto params = init_params(f.spec, 9);
    for (auto _ : state) {
        const double acc =
            accuracy(f.spec, params, f.pool.features, f.pool.labels, mode);
        benchmark::DoNotOptimize(acc);
    }
}

} // namespace

BENCHMARK_CAPTURE(bm_round, train_serial, ExecMode::serial, false)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_round, train_parallel, ExecMode::parallel, false)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_round, train_eval_serial, ExecMode::serial, true)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_round, train_eval_parallel, ExecMode::parallel, true)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_accuracy, serial, ExecMode::serial)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bm_accuracy, parallel, ExecMode::parallel)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
