#include "qevade/qlearn.hpp"

#include <cmath>
#include <utility>

#include "qevade/errors.hpp"

namespace qevade {

namespace {
constexpr std::size_t kMaxTableFeatures = 20;  // 2^20 rows x 21 columns of doubles
}

QTable::QTable(std::size_t k, std::string source_model_id)
    : k_(k), source_model_id_(std::move(source_model_id)) {
    if (k == 0) throw Error("Q-table needs at least one feature");
    if (k > kMaxTableFeatures) {
        throw Error("dense Q-table limited to " + std::to_string(kMaxTableFeatures) +
                    " features (2^" + std::to_string(k) + " rows requested)");
    }
    rows_ = std::size_t{1} << k;
    values_.assign(rows_ * (k_ + 1), 0.0);
    visits_.assign(rows_ * (k_ + 1), 0);
}

std::size_t QTable::index(std::uint64_t state, std::size_t action) const {
    if (state >= rows_) throw IndexOutOfRange("state index out of range");
    if (action > k_) throw InvalidAction("action index out of range");
    return static_cast<std::size_t>(state) * (k_ + 1) + action;
}

double QTable::value(std::uint64_t state, std::size_t action) const {
    return values_[index(state, action)];
}

std::uint64_t QTable::visit_count(std::uint64_t state, std::size_t action) const {
    return visits_[index(state, action)];
}

void QTable::record_return(std::uint64_t state, std::size_t action,
                           double discounted_return) {
    std::size_t i = index(state, action);
    visits_[i] += 1;
    values_[i] += (discounted_return - values_[i]) / static_cast<double>(visits_[i]);
}

std::size_t QTable::greedy_action(std::uint64_t state) const {
    std::size_t base = index(state, 0);
    std::size_t best = 0;
    double best_value = values_[base];
    for (std::size_t a = 1; a <= k_; ++a) {
        if (values_[base + a] > best_value) {
            best_value = values_[base + a];
            best = a;
        }
    }
    return best;
}

QTable QTable::from_arrays(std::size_t k, std::string source_model_id,
                           std::vector<double> values,
                           std::vector<std::uint64_t> visits) {
    QTable table(k, std::move(source_model_id));
    if (values.size() != table.values_.size() || visits.size() != table.visits_.size()) {
        throw DimensionMismatch("serialized Q-table arrays have the wrong length");
    }
    table.values_ = std::move(values);
    table.visits_ = std::move(visits);
    return table;
}

void mc_every_visit_update(QTable& table, const Episode& episode, double gamma) {
    if (episode.transitions.empty()) throw Error("cannot update from an empty episode");
    for (const Transition& t : episode.transitions) {
        if (t.state.size() != table.k()) {
            throw DimensionMismatch("episode state length does not match Q-table");
        }
    }

    const std::size_t n = episode.transitions.size();
    std::vector<double> returns(n);
    double g = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        g = episode.transitions[i].reward + gamma * g;
        returns[i] = g;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Transition& t = episode.transitions[i];
        table.record_return(t.state.state_index(), t.action, returns[i]);
    }
}

double EpsilonSchedule::at(std::size_t episode, std::size_t total_episodes) const {
    if (total_episodes <= 1) return end;
    double progress = static_cast<double>(episode) /
                      static_cast<double>(total_episodes - 1);
    if (progress > 1.0) progress = 1.0;
    return start + (end - start) * progress;
}

Episode run_episode(const EnvConfig& config, const Detector& model,
                    const LabeledDataset& pool, const QTable& behavior,
                    double epsilon, Rng& rng) {
    config.validate();
    if (pool.feature_count() != behavior.k()) {
        throw DimensionMismatch("pool feature count does not match Q-table");
    }

    Episode episode;
    episode.origin_sample = env_reset_index(pool, rng);
    PermissionVector state = pool.sample(episode.origin_sample).vector;

    const std::size_t max_steps = config.effective_max_steps(behavior.k());
    std::size_t steps = 0;
    for (;;) {
        std::size_t action;
        if (rng.uniform() < epsilon) {
            action = rng.uniform_below(behavior.k() + 1);
        } else {
            action = behavior.greedy_action(state.state_index());
        }
        StepResult step = env_step(config, model, state, action, steps);
        episode.transitions.push_back(
            {state, action, step.reward, step.next_state, step.done});
        state = step.next_state;
        if (action != 0) ++steps;
        if (step.done || episode.transitions.size() >= max_steps) break;
    }
    return episode;
}

QTrainResult train_qtable(const EnvConfig& config, const Detector& model,
                          const LabeledDataset& pool, std::size_t episodes,
                          const EpsilonSchedule& schedule, std::uint64_t seed) {
    config.validate();
    if (episodes == 0) throw Error("episode budget must be > 0");

    QTrainResult result{QTable(pool.feature_count(), model.id()),
                        ReplayBuffer(episodes)};
    Rng rng(seed);
    for (std::size_t e = 0; e < episodes; ++e) {
        double epsilon = schedule.at(e, episodes);
        Episode episode = run_episode(config, model, pool, result.table, epsilon, rng);
        mc_every_visit_update(result.table, episode, config.gamma);
        result.buffer.append(std::move(episode));
    }
    return result;
}

AttackPolicy extract_policy(const QTable& table) {
    AttackPolicy policy;
    policy.k = table.k();
    policy.source_model_id = table.source_model_id();
    policy.action_of.resize(table.rows());
    for (std::uint64_t state = 0; state < table.rows(); ++state) {
        policy.action_of[state] = static_cast<std::uint8_t>(table.greedy_action(state));
    }
    return policy;
}

}  // namespace qevade
