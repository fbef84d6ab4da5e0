#pragma once

#include <span>
#include <string>
#include <vector>

#include "qevade/attack.hpp"
#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"
#include "qevade/qlearn.hpp"

namespace qevade {

struct AdversarialProvenance {
    std::string model_id;
    AttackMode mode = AttackMode::SPA;
    std::size_t n_modified = 0;
};

/// Successfully evading variants harvested from attack reports, relabeled as
/// malware. Every pooled vector differs from its original by at least one
/// bit; identical vectors are stored once with their provenance merged.
struct AdversarialPool {
    std::vector<LabeledSample> samples;  // labels all 1
    std::vector<std::vector<AdversarialProvenance>> provenance;  // parallel to samples

    std::size_t size() const { return samples.size(); }
    void merge(const AdversarialPool& other);
};

/// One pool entry per succeeded outcome that actually changed its vector
/// (already-misclassified originals are not new variants). Duplicates are
/// deduplicated with provenance merged.
AdversarialPool collect_adversarial(const AttackReport& report);

/// Deterministically subsamples a pool down to `max_size` entries (uniform,
/// without replacement, seeded). Pools at or under the cap pass through
/// unchanged. Retraining sets use a capped share of the new variants so the
/// adversarial mass cannot swamp the original training distribution.
AdversarialPool subsample_pool(const AdversarialPool& pool, std::size_t max_size,
                               std::uint64_t seed);

/// Retrains a detector from scratch on base_train plus the pool, balanced by
/// random oversampling (seeded by `seed`).
DetectorModel retrain_with_adversarial(const DetectorSpec& spec,
                                       const LabeledDataset& base_train,
                                       const AdversarialPool& pool, std::uint64_t seed);

struct DefenseRow {
    std::string model_id;
    AttackMode mode = AttackMode::SPA;
    std::size_t budget = 0;
    double fr_before = 0.0;
    double fr_after = 0.0;
    double acc_before = 0.0;
    double acc_after = 0.0;
};

struct DefenseReport {
    std::vector<DefenseRow> rows;
};

/// Re-runs the attacks with the same frozen policies against both model
/// generations and scores baseline accuracy on the untouched test split.
/// `policies[i]` is the policy trained against `before[i]`; single-policy
/// rows attack model i with policy i, multi-policy rows with all policies.
/// Malware rows of `test` form the attack set.
DefenseReport defense_evaluate(std::span<const DetectorModel> before,
                               std::span<const DetectorModel> after,
                               std::span<const AttackPolicy> policies,
                               const LabeledDataset& test,
                               std::span<const std::size_t> budgets,
                               std::span<const AttackMode> modes,
                               double threshold = 0.5,
                               ActionMode action_mode = ActionMode::AddOnly);

}  // namespace qevade
