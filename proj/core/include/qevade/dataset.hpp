#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

#include "qevade/vocabulary.hpp"

namespace qevade {

class Rng;

/// Fixed-length binary feature vector, positionally aligned to a Vocabulary.
/// Doubles as the state of the modification environment: for k <= 63 features
/// the vector maps to a state index whose bit i is feature i.
class PermissionVector {
public:
    PermissionVector() = default;

    /// Validates that every element is exactly 0 or 1.
    explicit PermissionVector(std::vector<std::uint8_t> bits);

    static PermissionVector zeros(std::size_t size);
    static PermissionVector from_state_index(std::uint64_t index, std::size_t size);

    /// Parses a string of '0'/'1' characters.
    static PermissionVector from_string(const std::string& bits);

    std::size_t size() const { return bits_.size(); }
    std::uint8_t bit(std::size_t i) const { return bits_.at(i); }
    void set_bit(std::size_t i) { bits_.at(i) = 1; }
    void clear_bit(std::size_t i) { bits_.at(i) = 0; }
    void flip_bit(std::size_t i) { bits_.at(i) ^= 1; }

    std::size_t popcount() const;

    /// Integer encoding of the bits (bit i of the result = feature i).
    /// Requires size() <= 63.
    std::uint64_t state_index() const;

    /// Number of differing positions.
    std::size_t hamming_distance(const PermissionVector& other) const;

    /// True when every set bit of `other` is also set here.
    bool covers(const PermissionVector& other) const;

    std::string to_string() const;

    const std::vector<std::uint8_t>& bits() const { return bits_; }

    bool operator==(const PermissionVector& other) const = default;

private:
    std::vector<std::uint8_t> bits_;
};

/// One observation: a permission vector plus its class label
/// (1 = malware, 0 = benign).
struct LabeledSample {
    PermissionVector vector;
    int label = 0;
};

/// Immutable collection of labeled samples sharing one vocabulary.
class LabeledDataset {
public:
    LabeledDataset() = default;

    /// Validates that every vector matches the vocabulary length and every
    /// label is 0 or 1.
    LabeledDataset(std::shared_ptr<const Vocabulary> vocabulary,
                   std::vector<LabeledSample> samples);

    const Vocabulary& vocabulary() const { return *vocabulary_; }
    std::shared_ptr<const Vocabulary> vocabulary_ptr() const { return vocabulary_; }
    const std::vector<LabeledSample>& samples() const { return samples_; }
    const LabeledSample& sample(std::size_t i) const { return samples_.at(i); }
    std::size_t size() const { return samples_.size(); }
    std::size_t feature_count() const { return vocabulary_ ? vocabulary_->size() : 0; }

    std::size_t count_label(int label) const;

    /// Samples with the given label, sharing this dataset's vocabulary.
    LabeledDataset filter_label(int label) const;

    /// Samples at the given indices, in the given order.
    LabeledDataset subset(const std::vector<std::size_t>& indices) const;

    /// This dataset's samples followed by `extra` (same vocabulary length).
    LabeledDataset with_extra_samples(const std::vector<LabeledSample>& extra) const;

    bool operator==(const LabeledDataset& other) const;

private:
    std::shared_ptr<const Vocabulary> vocabulary_;
    std::vector<LabeledSample> samples_;
};

/// Assignment of every sample index to one of k folds.
struct FoldAssignment {
    std::vector<std::uint32_t> fold_of;
    std::size_t k = 0;

    std::vector<std::size_t> fold_indices(std::size_t fold) const;
    std::vector<std::size_t> complement_indices(std::size_t fold) const;
};

/// Parameters of the seeded synthetic corpus generator.
///
/// The first `informative` features carry the class signal: before noise,
/// even-indexed informative features are set exactly on malware rows and
/// odd-indexed ones exactly on benign rows. Remaining features are fair coin
/// flips. Every bit is then flipped independently with probability `noise`.
struct SynthSpec {
    std::size_t n_benign = 0;
    std::size_t n_malware = 0;
    std::size_t k = 0;
    std::size_t informative = 0;
    double noise = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

// ---- dataset file I/O -------------------------------------------------------

/// Loads the flat CSV format: header `label,<name>,...`, cells all in {0,1}.
/// When `expected` is supplied, the header's permission columns must be a
/// permutation of the expected names; columns are reordered to match.
/// Throws MalformedCell / VocabularyMismatch / Error.
LabeledDataset load_dataset_csv(std::istream& in, const Vocabulary* expected = nullptr);
LabeledDataset load_dataset_csv_file(const std::string& path,
                                     const Vocabulary* expected = nullptr);

/// Writes the CSV format read by load_dataset_csv (UTF-8, LF endings).
void save_dataset_csv(const LabeledDataset& dataset, std::ostream& out);
void save_dataset_csv_file(const LabeledDataset& dataset, const std::string& path);

// ---- dataset operations -----------------------------------------------------

/// Stratified, seed-deterministic k-fold split. Fold sizes differ by at most
/// one and each class is spread across folds as evenly as possible.
/// Throws InsufficientData when a class has fewer than k samples.
FoldAssignment split_kfold(const LabeledDataset& dataset, std::size_t k,
                           std::uint64_t seed);

/// Duplicates minority-class rows uniformly at random (with replacement,
/// seeded) until the class counts are equal. A balanced dataset is returned
/// unchanged. Throws SingleClassDataset when only one class is present.
LabeledDataset random_oversample(const LabeledDataset& dataset, std::uint64_t seed);

/// Projects the dataset onto the selected feature indices, in the given
/// order. Labels are preserved; the new vocabulary holds the selected names.
LabeledDataset reduce_to_features(const LabeledDataset& dataset,
                                  const std::vector<std::size_t>& indices);

/// Seed-deterministic synthetic corpus (malware rows first, then benign).
LabeledDataset synth_dataset(const SynthSpec& spec);

}  // namespace qevade
