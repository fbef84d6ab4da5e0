// Acceptance suite: runs every release criterion end to end and prints one
// pass/fail line per criterion. Exit code 0 only if all criteria hold.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "qevade/attack.hpp"
#include "qevade/defense.hpp"
#include "qevade/detector.hpp"
#include "qevade/mlp.hpp"
#include "qevade/pipeline.hpp"
#include "qevade/qlearn.hpp"
#include "qevade/rng.hpp"
#include "oracle_support.hpp"
#include "test_support.hpp"

using namespace qevade;
using qevade::test::StubDetector;

namespace {

struct Criterion {
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
    double limit_seconds = 0.0;  // 0 = unlimited
};

constexpr std::uint64_t kBenchmarkSeeds[] = {102, 108, 110, 111, 114};
constexpr std::size_t kEpisodes = 40000;
constexpr std::size_t kMaxBudget = 5;

SynthSpec benchmark_corpus(std::uint64_t seed) {
    return SynthSpec{200, 200, 10, 4, 0.05, seed};
}

struct BenchmarkRun {
    LabeledDataset train;
    LabeledDataset test;
    LabeledDataset train_malware;
    LabeledDataset test_malware;
    std::vector<DetectorModel> models;
    std::vector<AttackPolicy> policies;
};

BenchmarkRun prepare_benchmark(std::uint64_t seed,
                               const std::vector<Algorithm>& algorithms) {
    BenchmarkRun run;
    LabeledDataset full = synth_dataset(benchmark_corpus(seed));
    FoldAssignment folds = split_kfold(full, 5, derive_seed(seed, "split"));
    run.train = full.subset(folds.complement_indices(0));
    run.test = full.subset(folds.fold_indices(0));
    run.train_malware = run.train.filter_label(1);
    run.test_malware = run.test.filter_label(1);

    EnvConfig env;
    for (Algorithm algorithm : algorithms) {
        DetectorSpec spec = DetectorSpec::defaults(
            algorithm, derive_seed(seed, "train:" + algorithm_id(algorithm)));
        run.models.push_back(train_model(spec, run.train));
        QTrainResult trained = train_qtable(
            env, run.models.back(), run.train_malware, kEpisodes, EpsilonSchedule{},
            derive_seed(seed, "qtable:" + algorithm_id(algorithm)));
        run.policies.push_back(extract_policy(trained.table));
    }
    return run;
}

// 1. Greedy values from trained Q-tables match exhaustive enumeration on
//    one- and two-feature toy environments, within 0.05.
Criterion criterion_mdp_oracle() {
    Criterion c{"mdp-oracle-equivalence", true, "", 0.0, 10.0};
    EnvConfig env;
    double worst = 0.0;

    auto check_toy = [&](std::size_t k, const StubDetector& stub,
                         const LabeledDataset& pool, std::size_t episodes) {
        QTrainResult trained =
            train_qtable(env, stub, pool, episodes, EpsilonSchedule{}, 17);
        AttackPolicy policy = extract_policy(trained.table);
        std::vector<std::size_t> actions(policy.action_of.begin(),
                                         policy.action_of.end());
        std::vector<double> optimal =
            qevade::test::enumerate_optimal_values(env, stub, k);
        for (std::uint64_t s = 0; s < (std::uint64_t{1} << k); ++s) {
            double greedy = qevade::test::policy_value(
                env, stub, actions, PermissionVector::from_state_index(s, k));
            double gap = std::abs(greedy - optimal[s]);
            worst = std::max(worst, gap);
            if (gap > 0.05) c.pass = false;
        }
    };

    StubDetector bit0(1, [](const PermissionVector& x) { return x.bit(0) ? 1.0 : 0.0; });
    check_toy(1, bit0, qevade::test::make_dataset({{"0", 1}}), 10000);

    StubDetector both(2, [](const PermissionVector& x) {
        return (x.bit(0) && x.bit(1)) ? 1.0 : 0.0;
    });
    check_toy(2, both, qevade::test::make_dataset({{"00", 1}, {"10", 1}}), 20000);

    StubDetector either(2, [](const PermissionVector& x) {
        return (x.bit(0) || x.bit(1)) ? 0.9 : 0.1;
    });
    check_toy(2, either, qevade::test::make_dataset({{"00", 1}}), 20000);

    std::ostringstream detail;
    detail << "max |V_greedy - V*| = " << worst;
    c.detail = detail.str();
    return c;
}

// 2. Ten features give a dense table of exactly 1024 x 11 = 11264 entries.
Criterion criterion_qtable_sizing() {
    Criterion c{"qtable-sizing", false, "", 0.0, 0.0};
    QTable table(10);
    c.pass = table.rows() == 1024 && table.actions() == 11 &&
             table.entry_count() == 11264;
    c.detail = std::to_string(table.rows()) + " x " + std::to_string(table.actions()) +
               " = " + std::to_string(table.entry_count()) + " entries";
    return c;
}

// 3. Fooling rates never decrease with budget, and a multi-policy attack with
//    a superset policy set never loses to the single policy, over 20 seeded
//    runs of the full zoo. Zero violations allowed.
Criterion criterion_monotonicity_dominance() {
    Criterion c{"budget-monotonicity-mpa-dominance", true, "", 0.0, 0.0};
    std::size_t checks = 0;
    for (std::uint64_t seed = 1; seed <= 20 && c.pass; ++seed) {
        LabeledDataset full = synth_dataset({60, 60, 6, 4, 0.08, seed});
        FoldAssignment folds = split_kfold(full, 4, derive_seed(seed, "split"));
        LabeledDataset train = full.subset(folds.complement_indices(0));
        LabeledDataset malware = full.subset(folds.fold_indices(0)).filter_label(1);

        std::vector<DetectorModel> models;
        std::vector<AttackPolicy> policies;
        EnvConfig env;
        for (Algorithm algorithm : kAllAlgorithms) {
            DetectorSpec spec = DetectorSpec::defaults(
                algorithm, derive_seed(seed, algorithm_id(algorithm)));
            if (algorithm == Algorithm::DNN) spec.hp.epochs = 30;
            models.push_back(train_model(spec, train));
            QTrainResult trained = train_qtable(
                env, models.back(), train.filter_label(1), 4000, EpsilonSchedule{},
                derive_seed(seed, "qt:" + algorithm_id(algorithm)));
            policies.push_back(extract_policy(trained.table));
        }
        for (std::size_t i = 0; i < models.size() && c.pass; ++i) {
            double previous_spa = -1.0;
            for (std::size_t budget = 1; budget <= kMaxBudget; ++budget) {
                double spa = spa_attack(policies[i], models[i], malware, budget)
                                 .fooling_rate;
                double mpa = mpa_attack(policies, models[i], malware, budget)
                                 .fooling_rate;
                ++checks;
                if (spa < previous_spa || mpa < spa) {
                    c.pass = false;
                    c.detail = "violation at seed " + std::to_string(seed) + ", model " +
                               models[i].id() + ", budget " + std::to_string(budget);
                    break;
                }
                previous_spa = spa;
            }
        }
    }
    if (c.pass) {
        c.detail = std::to_string(checks) + " budget/dominance checks, 0 violations";
    }
    return c;
}

// 4. On the benchmark corpus the single-policy attack reaches at least a 30%
//    fooling rate against DT at budget 5, and DT is fooled at least as much
//    as GB, on at least 4 of 5 seeds.
Criterion criterion_attack_effectiveness() {
    Criterion c{"attack-effectiveness", false, "", 0.0, 120.0};
    int passes = 0;
    std::ostringstream detail;
    for (std::uint64_t seed : kBenchmarkSeeds) {
        BenchmarkRun run = prepare_benchmark(seed, {Algorithm::DT, Algorithm::GB});
        double fr_dt =
            spa_attack(run.policies[0], run.models[0], run.test_malware, kMaxBudget)
                .fooling_rate;
        double fr_gb =
            spa_attack(run.policies[1], run.models[1], run.test_malware, kMaxBudget)
                .fooling_rate;
        bool ok = fr_dt >= 30.0 && fr_dt >= fr_gb;
        passes += ok;
        detail << (detail.tellp() > 0 ? "; " : "") << "seed " << seed << ": DT "
               << fr_dt << "%, GB " << fr_gb << "%" << (ok ? "" : " (miss)");
    }
    c.pass = passes >= 4;
    c.detail = std::to_string(passes) + "/5 seeds (" + detail.str() + ")";
    return c;
}

// 5. One adversarial-retraining round with frozen policies strictly reduces
//    the budget-5 fooling rate of every fooled model, with a mean relative
//    reduction of at least 40% and baseline accuracy within 3 points, on at
//    least 4 of 5 seeds.
Criterion criterion_defense() {
    Criterion c{"defense-direction-magnitude", false, "", 0.0, 180.0};
    std::vector<Algorithm> all(kAllAlgorithms, kAllAlgorithms + kAlgorithmCount);
    int passes = 0;
    std::ostringstream detail;
    for (std::uint64_t seed : kBenchmarkSeeds) {
        BenchmarkRun run = prepare_benchmark(seed, all);

        AdversarialPool pool;
        for (std::size_t i = 0; i < run.models.size(); ++i) {
            pool.merge(collect_adversarial(spa_attack(
                run.policies[i], run.models[i], run.train_malware, kMaxBudget)));
        }
        std::size_t cap = static_cast<std::size_t>(
            0.15 * static_cast<double>(run.train_malware.size()));
        pool = subsample_pool(pool, cap, derive_seed(seed, "pool"));

        bool all_reduced = true;
        bool accuracy_held = true;
        double reduction_sum = 0.0;
        std::size_t reduced_count = 0;
        for (std::size_t i = 0; i < run.models.size(); ++i) {
            DetectorModel defended = retrain_with_adversarial(
                run.models[i].spec(), run.train, pool,
                derive_seed(seed, "defense:" + run.models[i].id()));
            double fr_before = spa_attack(run.policies[i], run.models[i],
                                          run.test_malware, kMaxBudget)
                                   .fooling_rate;
            double fr_after =
                spa_attack(run.policies[i], defended, run.test_malware, kMaxBudget)
                    .fooling_rate;
            if (fr_before > 0.0) {
                if (fr_after >= fr_before) all_reduced = false;
                reduction_sum += (fr_before - fr_after) / fr_before;
                ++reduced_count;
            } else if (fr_after > 0.0) {
                all_reduced = false;
            }
            double acc_before = evaluate(run.models[i], run.test).accuracy;
            double acc_after = evaluate(defended, run.test).accuracy;
            if (std::abs(acc_after - acc_before) > 0.03) accuracy_held = false;
        }
        double mean_reduction =
            reduced_count > 0 ? reduction_sum / static_cast<double>(reduced_count) : 0.0;
        bool ok = all_reduced && accuracy_held && mean_reduction >= 0.40;
        passes += ok;
        detail << (detail.tellp() > 0 ? "; " : "") << "seed " << seed << ": mean rel. "
               << static_cast<int>(100.0 * mean_reduction) << "%"
               << (all_reduced ? "" : ", not all reduced")
               << (accuracy_held ? "" : ", accuracy drifted") << (ok ? "" : " (miss)");
    }
    c.pass = passes >= 4;
    c.detail = std::to_string(passes) + "/5 seeds (" + detail.str() + ")";
    return c;
}

// 6. Classifier correctness: exact DT fit on consistent data, MLP gradient
//    check at 1e-4, exact ensemble sizes, and probabilities within [0,1] on
//    a 10000-vector fuzz sweep.
Criterion criterion_classifiers() {
    Criterion c{"classifier-correctness", true, "", 0.0, 0.0};
    std::ostringstream detail;

    // exact fit on consistent data
    LabeledDataset consistent = synth_dataset({120, 120, 6, 6, 0.0, 51});
    DetectorModel dt = train_model(DetectorSpec::defaults(Algorithm::DT, 1), consistent);
    Metrics train_fit = evaluate(dt, consistent);
    if (train_fit.accuracy != 1.0) {
        c.pass = false;
        detail << "DT training accuracy " << train_fit.accuracy << "; ";
    }

    // gradient check
    LabeledDataset grad_data = synth_dataset({10, 10, 6, 3, 0.2, 77});
    Hyperparameters hp;
    hp.hidden_units = 8;
    hp.epochs = 1;
    std::vector<std::string> log;
    MlpParams params = train_mlp(grad_data, hp, 5, log);
    std::vector<const PermissionVector*> batch;
    std::vector<int> labels;
    for (std::size_t i = 0; i < 20; ++i) {
        batch.push_back(&grad_data.sample(i).vector);
        labels.push_back(grad_data.sample(i).label);
    }
    std::vector<double> analytic;
    mlp_loss_and_gradient(params, batch, labels, analytic);
    std::vector<double> flat = params.flatten();
    std::vector<double> scratch;
    double worst_rel = 0.0;
    for (std::size_t p = 0; p < flat.size(); ++p) {
        std::vector<double> plus = flat, minus = flat;
        plus[p] += 1e-6;
        minus[p] -= 1e-6;
        double lp = mlp_loss_and_gradient(
            MlpParams::unflatten(params.inputs, params.hidden, plus), batch, labels,
            scratch);
        double lm = mlp_loss_and_gradient(
            MlpParams::unflatten(params.inputs, params.hidden, minus), batch, labels,
            scratch);
        double numeric = (lp - lm) / 2e-6;
        worst_rel = std::max(worst_rel,
                             std::abs(analytic[p] - numeric) /
                                 std::max({1.0, std::abs(analytic[p]), std::abs(numeric)}));
    }
    if (worst_rel > 1e-4) {
        c.pass = false;
        detail << "gradient check rel. error " << worst_rel << "; ";
    }

    // ensemble sizes and the probability fuzz sweep
    LabeledDataset zoo_data = synth_dataset({80, 80, 8, 4, 0.1, 61});
    Rng rng(123);
    std::vector<PermissionVector> fuzz;
    fuzz.reserve(10000);
    for (int i = 0; i < 10000; ++i) {
        fuzz.push_back(PermissionVector::from_state_index(rng.uniform_below(256), 8));
    }
    for (Algorithm algorithm : kAllAlgorithms) {
        DetectorSpec spec = DetectorSpec::defaults(algorithm, 3);
        if (algorithm == Algorithm::DNN) spec.hp.epochs = 30;
        DetectorModel model = train_model(spec, zoo_data);
        std::size_t expected = 0, actual = 0;
        if (const auto* forest = std::get_if<ForestParams>(&model.params())) {
            expected = algorithm == Algorithm::RF ? 100 : 10;
            actual = forest->trees.size();
        } else if (const auto* ada = std::get_if<AdaBoostParams>(&model.params())) {
            expected = 100;
            actual = ada->trees.size();
        } else if (const auto* grad = std::get_if<GradBoostParams>(&model.params())) {
            expected = 100;
            actual = grad->trees.size();
        }
        if (expected != actual) {
            c.pass = false;
            detail << model.id() << " has " << actual << " trees, expected " << expected
                   << "; ";
        }
        for (const PermissionVector& x : fuzz) {
            double p = model.benign_probability(x);
            if (!(p >= 0.0 && p <= 1.0)) {
                c.pass = false;
                detail << model.id() << " probability out of range; ";
                break;
            }
        }
    }

    if (c.pass) {
        detail << "DT exact fit, gradient rel. error " << worst_rel
               << ", sizes exact, 10000-vector sweep in range";
    }
    c.detail = detail.str();
    return c;
}

// 7. Accuracy and fooling-rate arithmetic on pinned examples, exact.
Criterion criterion_metrics() {
    Criterion c{"metrics-arithmetic", true, "", 0.0, 0.0};
    // tp=4, tn=4, fp=1, fn=1 -> accuracy 0.8
    std::vector<std::pair<std::string, int>> rows;
    for (int i = 0; i < 5; ++i) rows.push_back({"1" + std::to_string(i % 2), 1});
    for (int i = 0; i < 5; ++i) rows.push_back({"0" + std::to_string(i % 2), 0});
    LabeledDataset d = qevade::test::make_dataset(
        {{"0001", 1}, {"0010", 1}, {"0011", 1}, {"0100", 1}, {"0101", 1},
         {"1000", 0}, {"1001", 0}, {"1010", 0}, {"1011", 0}, {"1100", 0}});
    StubDetector stub(4, [](const PermissionVector& x) {
        if (x == PermissionVector::from_string("0101")) return 0.9;
        if (x == PermissionVector::from_string("1100")) return 0.1;
        return x.bit(0) ? 0.9 : 0.1;
    });
    Metrics m = evaluate(stub, d);
    if (!(m.tp == 4 && m.tn == 4 && m.fp == 1 && m.fn == 1 && m.accuracy == 0.8)) {
        c.pass = false;
    }
    if (fooling_rate(44, 400) != 11.0) c.pass = false;
    if (fooling_rate(0, 500) != 0.0) c.pass = false;
    if (fooling_rate(500, 500) != 100.0) c.pass = false;
    c.detail = c.pass ? "accuracy 0.8 and fooling rates 0/11/100 exact"
                      : "arithmetic mismatch";
    return c;
}

// 8. Two pipeline runs with one master seed produce byte-identical manifests.
Criterion criterion_determinism() {
    Criterion c{"pipeline-determinism", false, "", 0.0, 0.0};
    qevade::test::TempDir dir;
    RunConfig config = RunConfig::from_json(R"({
        "dataset": {"synth": {"n_benign": 50, "n_malware": 50, "k": 6,
                               "informative": 4, "noise": 0.05, "seed": 9}},
        "feature_k": 6,
        "algorithms": ["DT", "RF"],
        "episodes": 1000,
        "budgets": [1, 2],
        "modes": ["SPA", "MPA"],
        "defense": true,
        "master_seed": 77,
        "n_folds": 5
    })");
    config.out_dir = dir.path / "a";
    run_pipeline(config);
    config.out_dir = dir.path / "b";
    run_pipeline(config);

    std::string a = file_hash_hex(dir.path / "a" / "manifest.json");
    std::string b = file_hash_hex(dir.path / "b" / "manifest.json");
    c.pass = a == b;
    c.detail = c.pass ? "manifest hash " + a : "manifest hashes differ: " + a + " vs " + b;
    return c;
}

}  // namespace

int main() {
    using clock = std::chrono::steady_clock;
    std::vector<Criterion (*)()> criteria = {
        criterion_mdp_oracle,    criterion_qtable_sizing,
        criterion_monotonicity_dominance, criterion_attack_effectiveness,
        criterion_defense,       criterion_classifiers,
        criterion_metrics,       criterion_determinism,
    };

    bool all_pass = true;
    int index = 1;
    for (auto* fn : criteria) {
        auto start = clock::now();
        Criterion c = fn();
        c.seconds = std::chrono::duration<double>(clock::now() - start).count();
        if (c.limit_seconds > 0.0 && c.seconds > c.limit_seconds) {
            c.pass = false;
            c.detail += " [over the " + std::to_string(c.limit_seconds) + "s limit]";
        }
        std::printf("[%s] %d. %s (%s; %.2fs)\n", c.pass ? "PASS" : "FAIL", index,
                    c.name.c_str(), c.detail.c_str(), c.seconds);
        std::fflush(stdout);
        all_pass = all_pass && c.pass;
        ++index;
    }
    std::printf("[SKIP] 9. drebin-reproduction (data-conditional; see "
                "tools/reproduce_drebin.sh)\n");
    std::printf("ACCEPTANCE: %s\n", all_pass ? "all criteria passed" : "FAILURES above");
    return all_pass ? 0 : 1;
}
