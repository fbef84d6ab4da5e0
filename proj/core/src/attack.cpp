#include "qevade/attack.hpp"

#include <algorithm>

#include "qevade/errors.hpp"

namespace qevade {

std::string_view attack_mode_name(AttackMode mode) {
    return mode == AttackMode::SPA ? "SPA" : "MPA";
}

std::optional<AttackMode> attack_mode_from_name(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    if (upper == "SPA") return AttackMode::SPA;
    if (upper == "MPA") return AttackMode::MPA;
    return std::nullopt;
}

double fooling_rate(std::size_t successes, std::size_t total) {
    if (total == 0) throw EmptySet("fooling rate of an empty sample set");
    if (successes > total) throw Error("successes exceed total");
    return 100.0 * static_cast<double>(successes) / static_cast<double>(total);
}

namespace {

struct Rollout {
    bool succeeded = false;
    std::size_t n_modified = 0;
    PermissionVector final_state;
};

// Follows one policy from `start`, querying the target after each
// modification. Success as soon as P_b exceeds the threshold (including at
// zero modifications); the rollout ends on the stop action or when the
// budget is exhausted.
Rollout rollout_policy(const AttackPolicy& policy, const Detector& target,
                       const PermissionVector& start, std::size_t budget,
                       double threshold, ActionMode mode) {
    Rollout r;
    PermissionVector current = start;
    if (target.benign_probability(current) > threshold) {
        return {true, 0, current};
    }
    for (std::size_t used = 0; used < budget;) {
        std::size_t action = policy.action(current.state_index());
        if (action == 0) break;
        if (mode == ActionMode::Flip) {
            current.flip_bit(action - 1);
        } else {
            current.set_bit(action - 1);
        }
        ++used;
        if (target.benign_probability(current) > threshold) {
            return {true, used, current};
        }
        r.n_modified = used;
    }
    return r;
}

void validate_attack_inputs(std::size_t policy_k, const Detector& target,
                            const LabeledDataset& malware, std::size_t budget) {
    if (budget == 0) throw Error("modification budget must be >= 1");
    if (malware.size() == 0) throw EmptyPool("malware set is empty");
    for (const LabeledSample& s : malware.samples()) {
        if (s.label != 1) throw EmptyPool("attack set contains a benign-labeled sample");
    }
    if (policy_k != target.feature_count() || policy_k != malware.feature_count()) {
        throw VocabularyMismatch("policy, target and samples must share one feature set");
    }
}

AttackReport finalize_report(AttackReport report) {
    std::size_t successes = static_cast<std::size_t>(
        std::count_if(report.outcomes.begin(), report.outcomes.end(),
                      [](const AttackOutcome& o) { return o.succeeded; }));
    report.fooling_rate = fooling_rate(successes, report.outcomes.size());
    return report;
}

}  // namespace

AttackReport spa_attack(const AttackPolicy& policy, const Detector& target,
                        const LabeledDataset& malware, std::size_t budget,
                        double threshold, ActionMode mode) {
    validate_attack_inputs(policy.k, target, malware, budget);

    AttackReport report;
    report.mode = AttackMode::SPA;
    report.model_id = target.id();
    report.budget = budget;
    report.outcomes.reserve(malware.size());
    for (const LabeledSample& s : malware.samples()) {
        Rollout r = rollout_policy(policy, target, s.vector, budget, threshold, mode);
        AttackOutcome outcome;
        outcome.original = s.vector;
        outcome.succeeded = r.succeeded;
        outcome.n_modified = r.n_modified;
        outcome.model_id = target.id();
        if (r.succeeded) outcome.final_state = std::move(r.final_state);
        report.outcomes.push_back(std::move(outcome));
    }
    return finalize_report(std::move(report));
}

AttackReport mpa_attack(std::span<const AttackPolicy> policies, const Detector& target,
                        const LabeledDataset& malware, std::size_t budget,
                        double threshold, ActionMode mode) {
    if (policies.empty()) throw EmptyPolicySet();
    for (const AttackPolicy& p : policies) {
        if (p.k != policies.front().k) {
            throw VocabularyMismatch("all policies must share one feature set");
        }
    }
    validate_attack_inputs(policies.front().k, target, malware, budget);

    AttackReport report;
    report.mode = AttackMode::MPA;
    report.model_id = target.id();
    report.budget = budget;
    report.outcomes.reserve(malware.size());
    for (const LabeledSample& s : malware.samples()) {
        AttackOutcome outcome;
        outcome.original = s.vector;
        outcome.model_id = target.id();
        // best = fewest modifications, ties to the lowest policy index
        for (std::size_t p = 0; p < policies.size(); ++p) {
            Rollout r = rollout_policy(policies[p], target, s.vector, budget, threshold, mode);
            if (!r.succeeded) continue;
            if (!outcome.succeeded || r.n_modified < outcome.n_modified) {
                outcome.succeeded = true;
                outcome.n_modified = r.n_modified;
                outcome.final_state = std::move(r.final_state);
                outcome.policy_id = policies[p].source_model_id;
            }
        }
        if (!outcome.succeeded) outcome.n_modified = 0;
        report.outcomes.push_back(std::move(outcome));
    }
    return finalize_report(std::move(report));
}

}  // namespace qevade
