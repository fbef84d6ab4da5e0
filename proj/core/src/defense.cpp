#include "qevade/defense.hpp"

#include <algorithm>
#include <map>
#include <utility>

#include "qevade/errors.hpp"
#include "qevade/rng.hpp"

namespace qevade {

void AdversarialPool::merge(const AdversarialPool& other) {
    std::map<std::vector<std::uint8_t>, std::size_t> by_bits;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        by_bits.emplace(samples[i].vector.bits(), i);
    }
    for (std::size_t i = 0; i < other.samples.size(); ++i) {
        auto it = by_bits.find(other.samples[i].vector.bits());
        if (it == by_bits.end()) {
            by_bits.emplace(other.samples[i].vector.bits(), samples.size());
            samples.push_back(other.samples[i]);
            provenance.push_back(other.provenance[i]);
        } else {
            auto& merged = provenance[it->second];
            merged.insert(merged.end(), other.provenance[i].begin(),
                          other.provenance[i].end());
        }
    }
}

AdversarialPool collect_adversarial(const AttackReport& report) {
    AdversarialPool pool;
    std::map<std::vector<std::uint8_t>, std::size_t> by_bits;
    for (const AttackOutcome& outcome : report.outcomes) {
        if (!outcome.succeeded || !outcome.final_state) continue;
        if (*outcome.final_state == outcome.original) continue;  // not a new variant

        AdversarialProvenance prov{outcome.model_id, report.mode, outcome.n_modified};
        auto it = by_bits.find(outcome.final_state->bits());
        if (it == by_bits.end()) {
            by_bits.emplace(outcome.final_state->bits(), pool.samples.size());
            pool.samples.push_back({*outcome.final_state, 1});
            pool.provenance.push_back({std::move(prov)});
        } else {
            pool.provenance[it->second].push_back(std::move(prov));
        }
    }
    return pool;
}

AdversarialPool subsample_pool(const AdversarialPool& pool, std::size_t max_size,
                               std::uint64_t seed) {
    if (pool.size() <= max_size) return pool;
    std::vector<std::size_t> indices(pool.size());
    for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
    Rng rng(seed);
    for (std::size_t i = indices.size(); i > 1; --i) {
        std::swap(indices[i - 1], indices[rng.uniform_below(i)]);
    }
    indices.resize(max_size);
    std::sort(indices.begin(), indices.end());

    AdversarialPool kept;
    for (std::size_t i : indices) {
        kept.samples.push_back(pool.samples[i]);
        kept.provenance.push_back(pool.provenance[i]);
    }
    return kept;
}

DetectorModel retrain_with_adversarial(const DetectorSpec& spec,
                                       const LabeledDataset& base_train,
                                       const AdversarialPool& pool, std::uint64_t seed) {
    LabeledDataset augmented = base_train.with_extra_samples(pool.samples);
    LabeledDataset balanced = random_oversample(augmented, seed);
    return train_model(spec, balanced);
}

DefenseReport defense_evaluate(std::span<const DetectorModel> before,
                               std::span<const DetectorModel> after,
                               std::span<const AttackPolicy> policies,
                               const LabeledDataset& test,
                               std::span<const std::size_t> budgets,
                               std::span<const AttackMode> modes, double threshold,
                               ActionMode action_mode) {
    if (before.size() != after.size() || before.size() != policies.size()) {
        throw DimensionMismatch("model generations and policies must align");
    }
    LabeledDataset malware = test.filter_label(1);

    DefenseReport report;
    for (std::size_t i = 0; i < before.size(); ++i) {
        double acc_before = evaluate(before[i], test, threshold).accuracy;
        double acc_after = evaluate(after[i], test, threshold).accuracy;
        for (AttackMode mode : modes) {
            for (std::size_t budget : budgets) {
                DefenseRow row;
                row.model_id = before[i].id();
                row.mode = mode;
                row.budget = budget;
                row.acc_before = acc_before;
                row.acc_after = acc_after;
                if (mode == AttackMode::SPA) {
                    row.fr_before = spa_attack(policies[i], before[i], malware, budget,
                                               threshold, action_mode)
                                        .fooling_rate;
                    row.fr_after = spa_attack(policies[i], after[i], malware, budget,
                                              threshold, action_mode)
                                       .fooling_rate;
                } else {
                    row.fr_before = mpa_attack(policies, before[i], malware, budget,
                                               threshold, action_mode)
                                        .fooling_rate;
                    row.fr_after = mpa_attack(policies, after[i], malware, budget,
                                              threshold, action_mode)
                                       .fooling_rate;
                }
                report.rows.push_back(std::move(row));
            }
        }
    }
    return report;
}

}  // namespace qevade
