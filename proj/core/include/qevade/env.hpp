#pragma once

#include <cstdint>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"
#include "qevade/rng.hpp"

namespace qevade {

enum class ActionMode { AddOnly, Flip };

/// Modification-environment parameters. Rewards follow
/// r = w1 * P_b - w2 * N_m + w3 * S_g, where P_b is the detector's benign
/// probability after the step, N_m the number of modification actions taken
/// so far in the episode and S_g is 1 exactly when the goal (P_b above the
/// benign threshold) has been reached.
struct EnvConfig {
    double w1 = 1.0;
    double w2 = 0.05;
    double w3 = 10.0;
    double gamma = 0.9;
    std::size_t max_steps = 0;  // 0 = feature count
    ActionMode action_mode = ActionMode::AddOnly;
    double benign_threshold = 0.5;

    std::size_t effective_max_steps(std::size_t feature_count) const {
        return max_steps == 0 ? feature_count : max_steps;
    }
    void validate() const;
};

/// One agent-environment interaction. Action 0 stops the episode without
/// touching the state; action j >= 1 modifies permission j-1.
struct Transition {
    PermissionVector state;
    std::size_t action = 0;
    double reward = 0.0;
    PermissionVector next_state;
    bool done = false;
};

struct Episode {
    std::vector<Transition> transitions;
    std::size_t origin_sample = 0;  // index into the malware pool
};

/// Append-only store of training episodes.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {}

    void append(Episode episode);
    const std::vector<Episode>& episodes() const { return episodes_; }
    std::size_t size() const { return episodes_.size(); }
    std::size_t capacity() const { return capacity_; }

private:
    std::vector<Episode> episodes_;
    std::size_t capacity_;
};

/// Index of a uniformly sampled start state in the malware pool.
/// The pool must be non-empty and contain only malware-labeled samples.
std::size_t env_reset_index(const LabeledDataset& malware_pool, Rng& rng);

/// Uniformly sampled malware vector to start an episode from.
PermissionVector env_reset(const LabeledDataset& malware_pool, Rng& rng);

struct StepResult {
    PermissionVector next_state;
    double reward = 0.0;
    bool done = false;
    double benign_prob = 0.0;
};

/// Applies one action. In add-only mode a modification sets its bit (setting
/// an already-set bit changes nothing but still costs a step); flip mode
/// toggles it. `steps_so_far` counts the episode's previous modification
/// actions. The episode is done when the goal is reached, the agent stops,
/// or the step cap is hit.
StepResult env_step(const EnvConfig& config, const Detector& model,
                    const PermissionVector& state, std::size_t action,
                    std::size_t steps_so_far);

}  // namespace qevade
