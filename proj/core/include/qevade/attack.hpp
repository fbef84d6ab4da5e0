#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"
#include "qevade/qlearn.hpp"

namespace qevade {

enum class AttackMode { SPA, MPA };

std::string_view attack_mode_name(AttackMode mode);  // "SPA" / "MPA"
std::optional<AttackMode> attack_mode_from_name(std::string_view name);

/// Outcome of attacking one malware sample. `final_state` is present exactly
/// when the attack succeeded; `n_modified` counts the modification actions
/// spent (0 when the sample was already misclassified).
struct AttackOutcome {
    PermissionVector original;
    std::optional<PermissionVector> final_state;
    std::size_t n_modified = 0;
    bool succeeded = false;
    std::string model_id;
    std::optional<std::string> policy_id;  // winning policy (multi-policy runs)
};

struct AttackReport {
    AttackMode mode = AttackMode::SPA;
    std::string model_id;
    std::size_t budget = 0;
    std::vector<AttackOutcome> outcomes;
    double fooling_rate = 0.0;  // percent
};

/// Percentage of successfully evading samples: 100 * successes / total.
/// Throws EmptySet when total is zero.
double fooling_rate(std::size_t successes, std::size_t total);

/// Single-policy (white-box) attack: each malware sample repeatedly takes
/// the policy's action, querying the target after every modification, and
/// succeeds as soon as the benign probability exceeds the threshold within
/// the budget. The policy stopping (action 0) ends the rollout early.
AttackReport spa_attack(const AttackPolicy& policy, const Detector& target,
                        const LabeledDataset& malware, std::size_t budget,
                        double threshold = 0.5, ActionMode mode = ActionMode::AddOnly);

/// Multi-policy (grey-box) attack: every policy is rolled out independently
/// against the target and a sample succeeds if any of them evades within the
/// budget. The recorded outcome is the success with the fewest
/// modifications, ties toward the lowest policy index, so the report does
/// not depend on evaluation order.
AttackReport mpa_attack(std::span<const AttackPolicy> policies, const Detector& target,
                        const LabeledDataset& malware, std::size_t budget,
                        double threshold = 0.5, ActionMode mode = ActionMode::AddOnly);

}  // namespace qevade
