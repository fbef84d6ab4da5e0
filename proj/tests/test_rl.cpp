#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "qevade/env.hpp"
#include "qevade/errors.hpp"
#include "qevade/model_io.hpp"
#include "qevade/qlearn.hpp"
#include "oracle_support.hpp"
#include "test_support.hpp"

using namespace qevade;
using qevade::test::make_dataset;
using qevade::test::StubDetector;

namespace {

using qevade::test::enumerate_optimal_values;
using qevade::test::policy_value;

EnvConfig default_env(std::size_t max_steps = 0) {
    EnvConfig env;
    env.max_steps = max_steps;
    return env;
}

}  // namespace

// ---- environment -----------------------------------------------------------------

TEST_CASE("env_reset samples the malware pool deterministically") {
    LabeledDataset one = make_dataset({{"01", 1}});
    Rng rng(1);
    for (int i = 0; i < 5; ++i) {
        CHECK(env_reset(one, rng) == PermissionVector::from_string("01"));
    }

    LabeledDataset two = make_dataset({{"01", 1}, {"10", 1}});
    Rng a(7), b(7);
    for (int i = 0; i < 20; ++i) CHECK(env_reset(two, a) == env_reset(two, b));

    LabeledDataset empty(qevade::test::make_vocab(2), {});
    CHECK_THROWS_AS(env_reset(empty, rng), EmptyPool);
    LabeledDataset mixed = make_dataset({{"01", 1}, {"10", 0}});
    CHECK_THROWS_AS(env_reset(mixed, rng), EmptyPool);
}

TEST_CASE("env_step reward arithmetic on a constant-output stub") {
    StubDetector benign(2, [](const PermissionVector&) { return 0.8; });
    EnvConfig env = default_env();

    StepResult r = env_step(env, benign, PermissionVector::from_string("00"), 1, 0);
    CHECK(r.next_state == PermissionVector::from_string("10"));
    CHECK(r.done);
    CHECK(r.reward == doctest::Approx(1.0 * 0.8 - 0.05 * 1 + 10.0 * 1));  // 10.75
    CHECK(r.benign_prob == doctest::Approx(0.8));
}

TEST_CASE("add-only mode counts wasted steps without changing the state") {
    StubDetector malware(2, [](const PermissionVector&) { return 0.2; });
    EnvConfig env = default_env(5);
    StepResult r = env_step(env, malware, PermissionVector::from_string("10"), 1, 0);
    CHECK(r.next_state == PermissionVector::from_string("10"));
    CHECK(!r.done);
    CHECK(r.reward == doctest::Approx(0.2 - 0.05));  // modification still penalized
}

TEST_CASE("non-goal step in a capped episode") {
    StubDetector malware(2, [](const PermissionVector&) { return 0.2; });
    EnvConfig env = default_env(5);
    StepResult r = env_step(env, malware, PermissionVector::from_string("00"), 2, 0);
    CHECK(r.next_state == PermissionVector::from_string("01"));
    CHECK(!r.done);
    CHECK(r.reward == doctest::Approx(0.15));
}

TEST_CASE("episode termination: stop action, goal, and step cap") {
    StubDetector never(2, [](const PermissionVector&) { return 0.0; });
    EnvConfig env = default_env(2);

    StepResult stop = env_step(env, never, PermissionVector::from_string("00"), 0, 0);
    CHECK(stop.done);
    CHECK(stop.next_state == PermissionVector::from_string("00"));
    CHECK(stop.reward == doctest::Approx(0.0));  // no modification, no goal

    StepResult capped = env_step(env, never, PermissionVector::from_string("10"), 2, 1);
    CHECK(capped.done);  // second modification hits the cap

    CHECK_THROWS_AS(env_step(env, never, PermissionVector::from_string("00"), 3, 0),
                    InvalidAction);
}

TEST_CASE("flip mode clears bits") {
    StubDetector stub(2, [](const PermissionVector&) { return 0.0; });
    EnvConfig env = default_env(5);
    env.action_mode = ActionMode::Flip;
    StepResult r = env_step(env, stub, PermissionVector::from_string("10"), 1, 0);
    CHECK(r.next_state == PermissionVector::from_string("00"));
}

TEST_CASE("config validation") {
    EnvConfig bad = default_env();
    bad.gamma = 1.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = default_env();
    bad.benign_threshold = 0.0;
    CHECK_THROWS_AS(bad.validate(), Error);
}

// ---- episodes and the replay buffer ------------------------------------------------

TEST_CASE("greedy rollout with an oracle table reaches the goal in one transition") {
    StubDetector bit2(3, [](const PermissionVector& x) { return x.bit(2) ? 1.0 : 0.0; });
    QTable oracle(3);
    for (std::uint64_t s = 0; s < 8; ++s) oracle.record_return(s, 3, 100.0);

    LabeledDataset pool = make_dataset({{"100", 1}, {"010", 1}});
    Rng rng(5);
    Episode episode = run_episode(default_env(), bit2, pool, oracle, 0.0, rng);
    REQUIRE(episode.transitions.size() == 1);
    CHECK(episode.transitions[0].action == 3);
    CHECK(episode.transitions[0].done);
    CHECK(episode.transitions[0].next_state.bit(2) == 1);
}

TEST_CASE("pure-random behavior respects the episode cap") {
    StubDetector never(4, [](const PermissionVector&) { return 0.0; });
    QTable table(4);
    LabeledDataset pool = make_dataset({{"0000", 1}});
    Rng rng(11);
    EnvConfig env = default_env(3);
    for (int trial = 0; trial < 50; ++trial) {
        Episode e = run_episode(env, never, pool, table, 1.0, rng);
        CHECK(e.transitions.size() <= 3);
        CHECK(e.transitions.back().done);
        for (std::size_t i = 0; i + 1 < e.transitions.size(); ++i) {
            CHECK(!e.transitions[i].done);  // done only on the last transition
        }
        // never reaches the goal, so no goal bonus in any reward
        CHECK(e.transitions.back().reward < 10.0);
    }
}

TEST_CASE("replay buffer is append-only up to capacity") {
    ReplayBuffer buffer(2);
    buffer.append(Episode{});
    buffer.append(Episode{});
    CHECK(buffer.size() == 2);
    CHECK_THROWS_AS(buffer.append(Episode{}), Error);
}

// ---- Monte Carlo updates -------------------------------------------------------------

TEST_CASE("two-step episode returns with gamma 0.5") {
    QTable table(2);
    Episode e;
    e.transitions.push_back({PermissionVector::from_string("00"), 1, 1.0,
                             PermissionVector::from_string("10"), false});
    e.transitions.push_back({PermissionVector::from_string("10"), 2, 2.0,
                             PermissionVector::from_string("11"), true});
    mc_every_visit_update(table, e, 0.5);
    CHECK(table.value(0b00, 1) == doctest::Approx(2.0));  // 1 + 0.5 * 2
    CHECK(table.value(0b01, 2) == doctest::Approx(2.0));
    CHECK(table.visit_count(0b00, 1) == 1);
}

TEST_CASE("every-visit averaging over a revisited state-action pair") {
    // rewards chosen so the two visits of (s=00, a=1) see returns 1.0 and 3.0
    QTable table(1);
    Episode e;
    e.transitions.push_back({PermissionVector::from_string("0"), 1, -2.0,
                             PermissionVector::from_string("0"), false});
    e.transitions.push_back({PermissionVector::from_string("0"), 1, 3.0,
                             PermissionVector::from_string("1"), true});
    mc_every_visit_update(table, e, 1.0);
    // G_0 = -2 + 3 = 1, G_1 = 3 -> mean 2.0, two visits
    CHECK(table.value(0, 1) == doctest::Approx(2.0));
    CHECK(table.visit_count(0, 1) == 2);
}

TEST_CASE("gamma zero averages immediate rewards only") {
    QTable table(1);
    Episode e;
    e.transitions.push_back({PermissionVector::from_string("0"), 0, 0.4,
                             PermissionVector::from_string("0"), true});
    mc_every_visit_update(table, e, 0.0);
    CHECK(table.value(0, 0) == doctest::Approx(0.4));

    QTable wrong_k(2);
    CHECK_THROWS_AS(mc_every_visit_update(wrong_k, e, 0.0), DimensionMismatch);
}

// ---- Q-table ----------------------------------------------------------------------

TEST_CASE("table dimensions: 10 features give 1024 x 11 = 11264 entries") {
    QTable table(10);
    CHECK(table.rows() == 1024);
    CHECK(table.actions() == 11);
    CHECK(table.entry_count() == 11264);
}

TEST_CASE("greedy action takes the argmax with lowest-index tie-break") {
    QTable table(2);
    table.record_return(0, 0, 0.2);
    table.record_return(0, 1, 0.9);
    table.record_return(0, 2, 0.1);
    CHECK(table.greedy_action(0) == 1);

    table.record_return(1, 0, 0.5);
    table.record_return(1, 1, 0.5);
    CHECK(table.greedy_action(1) == 0);  // stop wins the tie

    CHECK(table.greedy_action(2) == 0);  // untouched rows stop
}

TEST_CASE("extract_policy maps every state") {
    QTable table(2);
    table.record_return(0b01, 2, 5.0);
    AttackPolicy policy = extract_policy(table);
    CHECK(policy.k == 2);
    CHECK(policy.action_of.size() == 4);
    CHECK(policy.action(0b01) == 2);
    CHECK(policy.action(0b00) == 0);
}

// ---- Monte Carlo control on enumerable toys ---------------------------------------

TEST_CASE("k=1 toy: learned policy modifies the bit then stops") {
    StubDetector bit0(1, [](const PermissionVector& x) { return x.bit(0) ? 1.0 : 0.0; });
    LabeledDataset pool = make_dataset({{"0", 1}});
    EnvConfig env = default_env();

    QTrainResult trained = train_qtable(env, bit0, pool, 10000, EpsilonSchedule{}, 3);
    AttackPolicy policy = extract_policy(trained.table);
    CHECK(policy.action(0b0) == 1);
    CHECK(policy.action(0b1) == 0);

    // greedy value matches exhaustive enumeration
    std::vector<double> optimal = enumerate_optimal_values(env, bit0, 1);
    std::vector<std::size_t> actions(policy.action_of.begin(), policy.action_of.end());
    for (std::uint64_t s = 0; s < 2; ++s) {
        double greedy = policy_value(env, bit0, actions,
                                     PermissionVector::from_state_index(s, 1));
        CHECK(greedy == doctest::Approx(optimal[s]).epsilon(0.05));
    }
}

TEST_CASE("k=2 toy: both bits must be set, greedy reaches the goal in two steps") {
    StubDetector both(2, [](const PermissionVector& x) {
        return (x.bit(0) && x.bit(1)) ? 1.0 : 0.0;
    });
    LabeledDataset pool = make_dataset({{"00", 1}});
    EnvConfig env = default_env();

    QTrainResult trained = train_qtable(env, both, pool, 20000, EpsilonSchedule{}, 5);
    AttackPolicy policy = extract_policy(trained.table);

    // rolling the greedy policy out from 00 reaches the goal in exactly 2 steps
    PermissionVector state = PermissionVector::from_string("00");
    std::size_t steps = 0;
    for (; steps < 5; ++steps) {
        std::size_t action = policy.action(state.state_index());
        REQUIRE(action != 0);
        StepResult r = env_step(env, both, state, action, steps);
        state = r.next_state;
        if (r.done) break;
    }
    CHECK(steps + 1 == 2);
    CHECK(state == PermissionVector::from_string("11"));

    std::vector<double> optimal = enumerate_optimal_values(env, both, 2);
    std::vector<std::size_t> actions(policy.action_of.begin(), policy.action_of.end());
    for (std::uint64_t s = 0; s < 4; ++s) {
        double greedy = policy_value(env, both, actions,
                                     PermissionVector::from_state_index(s, 2));
        CHECK(greedy == doctest::Approx(optimal[s]).epsilon(0.05));
    }
}

TEST_CASE("training is reproducible and its buffer matches the table") {
    StubDetector bit1(2, [](const PermissionVector& x) { return x.bit(1) ? 0.9 : 0.1; });
    LabeledDataset pool = make_dataset({{"00", 1}, {"10", 1}});
    EnvConfig env = default_env();

    QTrainResult a = train_qtable(env, bit1, pool, 500, EpsilonSchedule{}, 42);
    QTrainResult b = train_qtable(env, bit1, pool, 500, EpsilonSchedule{}, 42);
    CHECK(qtable_to_json(a.table) == qtable_to_json(b.table));
    CHECK(a.buffer.size() == 500);
    REQUIRE(b.buffer.size() == 500);
    for (std::size_t e = 0; e < 500; ++e) {
        CHECK(a.buffer.episodes()[e].origin_sample == b.buffer.episodes()[e].origin_sample);
        CHECK(a.buffer.episodes()[e].transitions.size() ==
              b.buffer.episodes()[e].transitions.size());
    }

    // replaying the buffer into a fresh table reproduces the trained table
    QTable replay(2, bit1.id());
    for (const Episode& episode : a.buffer.episodes()) {
        mc_every_visit_update(replay, episode, env.gamma);
    }
    CHECK(qtable_to_json(replay) == qtable_to_json(a.table));

    QTrainResult c = train_qtable(env, bit1, pool, 500, EpsilonSchedule{}, 43);
    CHECK(qtable_to_json(c.table) != qtable_to_json(a.table));
}

TEST_CASE("visit counts track every visit") {
    QTable table(1);
    Episode e;
    for (int i = 0; i < 3; ++i) {
        e.transitions.push_back({PermissionVector::from_string("0"), 1, 0.0,
                                 PermissionVector::from_string("0"), i == 2});
    }
    mc_every_visit_update(table, e, 0.9);
    CHECK(table.visit_count(0, 1) == 3);
}

TEST_CASE("epsilon schedule decays linearly to its floor") {
    EpsilonSchedule schedule;
    CHECK(schedule.at(0, 100) == doctest::Approx(1.0));
    CHECK(schedule.at(99, 100) == doctest::Approx(0.05));
    CHECK(schedule.at(49, 100) > schedule.at(50, 100));
}

// ---- serialization -------------------------------------------------------------------

TEST_CASE("Q-table and policy JSON round-trip bit-exactly") {
    StubDetector stub(3, [](const PermissionVector& x) { return x.bit(0) ? 0.8 : 0.3; });
    LabeledDataset pool = make_dataset({{"010", 1}});
    QTrainResult trained =
        train_qtable(default_env(), stub, pool, 300, EpsilonSchedule{}, 9);

    std::string table_json = qtable_to_json(trained.table);
    QTable reloaded = qtable_from_json(table_json);
    CHECK(qtable_to_json(reloaded) == table_json);
    CHECK(reloaded.source_model_id() == "stub");

    AttackPolicy policy = extract_policy(trained.table);
    std::string policy_json = policy_to_json(policy);
    AttackPolicy reloaded_policy = policy_from_json(policy_json);
    CHECK(policy_to_json(reloaded_policy) == policy_json);
    CHECK(reloaded_policy.action_of == policy.action_of);
}
