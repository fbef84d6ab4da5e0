#include "qevade/env.hpp"

#include "qevade/errors.hpp"

namespace qevade {

void EnvConfig::validate() const {
    if (w1 < 0.0 || w2 < 0.0 || w3 < 0.0) throw Error("reward weights must be >= 0");
    if (gamma < 0.0 || gamma >= 1.0) throw Error("discount must lie in [0, 1)");
    if (benign_threshold <= 0.0 || benign_threshold >= 1.0) {
        throw Error("benign threshold must lie in (0, 1)");
    }
}

void ReplayBuffer::append(Episode episode) {
    if (episodes_.size() >= capacity_) throw Error("replay buffer is full");
    episodes_.push_back(std::move(episode));
}

std::size_t env_reset_index(const LabeledDataset& malware_pool, Rng& rng) {
    if (malware_pool.size() == 0) throw EmptyPool("malware pool is empty");
    for (const LabeledSample& s : malware_pool.samples()) {
        if (s.label != 1) {
            throw EmptyPool("malware pool contains a benign-labeled sample");
        }
    }
    return rng.uniform_below(malware_pool.size());
}

PermissionVector env_reset(const LabeledDataset& malware_pool, Rng& rng) {
    return malware_pool.sample(env_reset_index(malware_pool, rng)).vector;
}

StepResult env_step(const EnvConfig& config, const Detector& model,
                    const PermissionVector& state, std::size_t action,
                    std::size_t steps_so_far) {
    const std::size_t k = state.size();
    if (action > k) {
        throw InvalidAction("action " + std::to_string(action) + " out of range [0, " +
                            std::to_string(k) + "]");
    }

    StepResult result;
    result.next_state = state;

    std::size_t modifications = steps_so_far;
    bool stopped = (action == 0);
    if (!stopped) {
        std::size_t bit = action - 1;
        if (config.action_mode == ActionMode::Flip) {
            result.next_state.flip_bit(bit);
        } else {
            result.next_state.set_bit(bit);  // may be a wasted step, still counted
        }
        ++modifications;
    }

    result.benign_prob = model.benign_probability(result.next_state);
    bool goal = result.benign_prob > config.benign_threshold;
    bool capped = modifications >= config.effective_max_steps(k);
    result.done = goal || stopped || capped;
    result.reward = config.w1 * result.benign_prob -
                    config.w2 * static_cast<double>(modifications) +
                    config.w3 * (goal ? 1.0 : 0.0);
    return result;
}

}  // namespace qevade
