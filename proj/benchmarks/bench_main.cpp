#include <benchmark/benchmark.h>

#include "qevade/attack.hpp"
#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"
#include "qevade/qlearn.hpp"
#include "qevade/rng.hpp"

using namespace qevade;

namespace {

const LabeledDataset& bench_dataset() {
    static LabeledDataset d = synth_dataset({200, 200, 10, 4, 0.05, 42});
    return d;
}

const DetectorModel& bench_model(Algorithm algorithm) {
    static std::map<Algorithm, DetectorModel> cache;
    auto it = cache.find(algorithm);
    if (it == cache.end()) {
        DetectorSpec spec = DetectorSpec::defaults(algorithm, 7);
        if (algorithm == Algorithm::DNN) spec.hp.epochs = 30;
        it = cache.emplace(algorithm, train_model(spec, bench_dataset())).first;
    }
    return it->second;
}

std::vector<PermissionVector> probe_vectors(std::size_t n) {
    Rng rng(3);
    std::vector<PermissionVector> probes;
    probes.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        probes.push_back(PermissionVector::from_state_index(rng.uniform_below(1024), 10));
    }
    return probes;
}

void BM_predict(benchmark::State& state, Algorithm algorithm) {
    const DetectorModel& model = bench_model(algorithm);
    std::vector<PermissionVector> probes = probe_vectors(256);
    std::size_t i = 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(model.benign_probability(probes[i++ & 255]));
    }
}

void BM_train(benchmark::State& state, Algorithm algorithm) {
    DetectorSpec spec = DetectorSpec::defaults(algorithm, 7);
    if (algorithm == Algorithm::DNN) spec.hp.epochs = 30;
    for (auto _ : state) {
        benchmark::DoNotOptimize(train_model(spec, bench_dataset()));
    }
}

void BM_env_step(benchmark::State& state) {
    const DetectorModel& model = bench_model(Algorithm::DT);
    EnvConfig env;
    PermissionVector zero = PermissionVector::zeros(10);
    std::size_t action = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(env_step(env, model, zero, action, 0));
        action = action % 10 + 1;
    }
}

void BM_train_qtable(benchmark::State& state) {
    const DetectorModel& model = bench_model(Algorithm::DT);
    LabeledDataset pool = bench_dataset().filter_label(1);
    EnvConfig env;
    std::size_t episodes = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            train_qtable(env, model, pool, episodes, EpsilonSchedule{}, 13));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(episodes));
}

void BM_spa_attack(benchmark::State& state) {
    const DetectorModel& model = bench_model(Algorithm::DT);
    LabeledDataset pool = bench_dataset().filter_label(1);
    QTrainResult trained = train_qtable(EnvConfig{}, model, pool, 5000,
                                        EpsilonSchedule{}, 13);
    AttackPolicy policy = extract_policy(trained.table);
    for (auto _ : state) {
        benchmark::DoNotOptimize(spa_attack(policy, model, pool, 5));
    }
    state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations()) *
                            static_cast<std::int64_t>(pool.size()));
}

}  // namespace

BENCHMARK_CAPTURE(BM_predict, lr, Algorithm::LR);
BENCHMARK_CAPTURE(BM_predict, dt, Algorithm::DT);
BENCHMARK_CAPTURE(BM_predict, rf, Algorithm::RF);
BENCHMARK_CAPTURE(BM_predict, gb, Algorithm::GB);
BENCHMARK_CAPTURE(BM_predict, ab, Algorithm::AB);
BENCHMARK_CAPTURE(BM_predict, dnn, Algorithm::DNN);
BENCHMARK_CAPTURE(BM_train, dt, Algorithm::DT);
BENCHMARK_CAPTURE(BM_train, rf, Algorithm::RF);
BENCHMARK(BM_env_step);
BENCHMARK(BM_train_qtable)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_spa_attack)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
