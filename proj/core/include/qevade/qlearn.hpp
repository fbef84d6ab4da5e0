#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qevade/env.hpp"

namespace qevade {

/// Dense action-value table over all 2^k states. Row index is the integer
/// encoding of the state bits (bit i of the index = feature i); column 0 is
/// the stop action and column j >= 1 the modification of permission j-1.
/// Values are every-visit running means of discounted returns.
class QTable {
public:
    /// Allocates a zeroed 2^k x (k+1) table. k is capped at 20 to keep the
    /// dense layout within memory reach.
    explicit QTable(std::size_t k, std::string source_model_id = "");

    std::size_t k() const { return k_; }
    std::size_t rows() const { return rows_; }
    std::size_t actions() const { return k_ + 1; }
    std::size_t entry_count() const { return values_.size(); }
    const std::string& source_model_id() const { return source_model_id_; }
    void set_source_model_id(std::string id) { source_model_id_ = std::move(id); }

    double value(std::uint64_t state, std::size_t action) const;
    std::uint64_t visit_count(std::uint64_t state, std::size_t action) const;

    /// Folds one observed return into the running mean for (state, action).
    void record_return(std::uint64_t state, std::size_t action, double discounted_return);

    /// Argmax action for a state, ties toward the lowest action index
    /// (so a tie with the stop action prefers stopping).
    std::size_t greedy_action(std::uint64_t state) const;

    const std::vector<double>& values() const { return values_; }
    const std::vector<std::uint64_t>& visits() const { return visits_; }

    /// Restores a table from its serialized arrays.
    static QTable from_arrays(std::size_t k, std::string source_model_id,
                              std::vector<double> values,
                              std::vector<std::uint64_t> visits);

private:
    std::size_t index(std::uint64_t state, std::size_t action) const;

    std::size_t k_ = 0;
    std::size_t rows_ = 0;
    std::string source_model_id_;
    std::vector<double> values_;
    std::vector<std::uint64_t> visits_;
};

/// Every-visit Monte Carlo update: for each step t of the episode the
/// discounted return G_t = sum_{i>=t} gamma^(i-t) r_i is folded into
/// Q(s_t, a_t) as a running mean, and the visit count is incremented.
void mc_every_visit_update(QTable& table, const Episode& episode, double gamma);

/// Epsilon decays linearly from `start` to `end` over the episode budget.
struct EpsilonSchedule {
    double start = 1.0;
    double end = 0.05;

    double at(std::size_t episode, std::size_t total_episodes) const;
};

/// One episode under the epsilon-greedy behavior policy over the current
/// table: with probability epsilon a uniform action, otherwise the greedy
/// action.
Episode run_episode(const EnvConfig& config, const Detector& model,
                    const LabeledDataset& pool, const QTable& behavior,
                    double epsilon, Rng& rng);

struct QTrainResult {
    QTable table;
    ReplayBuffer buffer;
};

/// Monte Carlo control: runs the episode budget with the epsilon schedule,
/// updating the table after every episode. Deterministic given the seed;
/// returns the populated table and the replay buffer that produced it.
QTrainResult train_qtable(const EnvConfig& config, const Detector& model,
                          const LabeledDataset& pool, std::size_t episodes,
                          const EpsilonSchedule& schedule, std::uint64_t seed);

/// Greedy state -> action lookup extracted from a table.
struct AttackPolicy {
    std::size_t k = 0;
    std::vector<std::uint8_t> action_of;  // 2^k entries, values in [0, k]
    std::string source_model_id;

    std::size_t action(std::uint64_t state) const { return action_of.at(state); }
};

AttackPolicy extract_policy(const QTable& table);

}  // namespace qevade
