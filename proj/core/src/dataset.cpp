#include "qevade/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <utility>

#include "qevade/errors.hpp"
#include "qevade/rng.hpp"

namespace qevade {

// ---- PermissionVector -------------------------------------------------------

PermissionVector::PermissionVector(std::vector<std::uint8_t> bits)
    : bits_(std::move(bits)) {
    for (std::uint8_t b : bits_) {
        if (b > 1) throw Error("permission vector elements must be 0 or 1");
    }
}

PermissionVector PermissionVector::zeros(std::size_t size) {
    PermissionVector v;
    v.bits_.assign(size, 0);
    return v;
}

PermissionVector PermissionVector::from_state_index(std::uint64_t index, std::size_t size) {
    if (size > 63) throw Error("state index encoding supports at most 63 features");
    PermissionVector v;
    v.bits_.resize(size);
    for (std::size_t i = 0; i < size; ++i) v.bits_[i] = (index >> i) & 1u;
    return v;
}

PermissionVector PermissionVector::from_string(const std::string& bits) {
    PermissionVector v;
    v.bits_.reserve(bits.size());
    for (char c : bits) {
        if (c != '0' && c != '1') throw Error("bit string must contain only '0'/'1'");
        v.bits_.push_back(c == '1' ? 1 : 0);
    }
    return v;
}

std::size_t PermissionVector::popcount() const {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1));
}

std::uint64_t PermissionVector::state_index() const {
    if (bits_.size() > 63) throw Error("state index encoding supports at most 63 features");
    std::uint64_t index = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        index |= static_cast<std::uint64_t>(bits_[i]) << i;
    }
    return index;
}

std::size_t PermissionVector::hamming_distance(const PermissionVector& other) const {
    if (other.size() != size()) throw DimensionMismatch("hamming distance of unequal lengths");
    std::size_t d = 0;
    for (std::size_t i = 0; i < bits_.size(); ++i) d += bits_[i] != other.bits_[i];
    return d;
}

bool PermissionVector::covers(const PermissionVector& other) const {
    if (other.size() != size()) throw DimensionMismatch("covers() with unequal lengths");
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (other.bits_[i] && !bits_[i]) return false;
    }
    return true;
}

std::string PermissionVector::to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) {
        if (bits_[i]) s[i] = '1';
    }
    return s;
}

// ---- LabeledDataset ---------------------------------------------------------

LabeledDataset::LabeledDataset(std::shared_ptr<const Vocabulary> vocabulary,
                               std::vector<LabeledSample> samples)
    : vocabulary_(std::move(vocabulary)), samples_(std::move(samples)) {
    if (!vocabulary_) throw Error("dataset requires a vocabulary");
    for (const LabeledSample& s : samples_) {
        if (s.vector.size() != vocabulary_->size()) {
            throw VocabularyMismatch("sample length " + std::to_string(s.vector.size()) +
                                     " does not match vocabulary size " +
                                     std::to_string(vocabulary_->size()));
        }
        if (s.label != 0 && s.label != 1) throw Error("labels must be 0 or 1");
    }
}

std::size_t LabeledDataset::count_label(int label) const {
    return static_cast<std::size_t>(
        std::count_if(samples_.begin(), samples_.end(),
                      [label](const LabeledSample& s) { return s.label == label; }));
}

LabeledDataset LabeledDataset::filter_label(int label) const {
    std::vector<LabeledSample> kept;
    for (const LabeledSample& s : samples_) {
        if (s.label == label) kept.push_back(s);
    }
    return LabeledDataset(vocabulary_, std::move(kept));
}

LabeledDataset LabeledDataset::subset(const std::vector<std::size_t>& indices) const {
    std::vector<LabeledSample> kept;
    kept.reserve(indices.size());
    for (std::size_t i : indices) kept.push_back(samples_.at(i));
    return LabeledDataset(vocabulary_, std::move(kept));
}

LabeledDataset LabeledDataset::with_extra_samples(
    const std::vector<LabeledSample>& extra) const {
    std::vector<LabeledSample> all = samples_;
    all.insert(all.end(), extra.begin(), extra.end());
    return LabeledDataset(vocabulary_, std::move(all));
}

bool LabeledDataset::operator==(const LabeledDataset& other) const {
    if (!vocabulary_ != !other.vocabulary_) return false;
    if (vocabulary_ && !(*vocabulary_ == *other.vocabulary_)) return false;
    if (samples_.size() != other.samples_.size()) return false;
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (samples_[i].label != other.samples_[i].label) return false;
        if (!(samples_[i].vector == other.samples_[i].vector)) return false;
    }
    return true;
}

// ---- FoldAssignment ---------------------------------------------------------

std::vector<std::size_t> FoldAssignment::fold_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] == fold) out.push_back(i);
    }
    return out;
}

std::vector<std::size_t> FoldAssignment::complement_indices(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i) {
        if (fold_of[i] != fold) out.push_back(i);
    }
    return out;
}

// ---- CSV I/O ----------------------------------------------------------------

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
        std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

std::uint8_t parse_bit(const std::string& field, std::size_t row, std::size_t col) {
    if (field == "0") return 0;
    if (field == "1") return 1;
    throw MalformedCell(row, col, "'" + field + "' is not 0 or 1");
}

}  // namespace

LabeledDataset load_dataset_csv(std::istream& in, const Vocabulary* expected) {
    std::string line;
    if (!std::getline(in, line)) throw Error("dataset CSV is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();

    std::vector<std::string> header = split_fields(line);
    if (header.empty() || header[0] != "label") {
        throw Error("dataset CSV header must start with 'label'");
    }
    std::vector<std::string> column_names(header.begin() + 1, header.end());
    if (column_names.empty()) throw Error("dataset CSV has no permission columns");

    std::shared_ptr<const Vocabulary> vocab;
    // column_to_feature[j] = vocabulary index of CSV permission column j
    std::vector<std::size_t> column_to_feature(column_names.size());
    if (expected) {
        if (column_names.size() != expected->size()) {
            throw VocabularyMismatch("CSV has " + std::to_string(column_names.size()) +
                                     " permission columns, vocabulary expects " +
                                     std::to_string(expected->size()));
        }
        for (std::size_t j = 0; j < column_names.size(); ++j) {
            auto idx = expected->index_of(column_names[j]);
            if (!idx) throw VocabularyMismatch("column '" + column_names[j] +
                                               "' is not in the vocabulary");
            column_to_feature[j] = *idx;
        }
        vocab = std::make_shared<Vocabulary>(*expected);
    } else {
        vocab = std::make_shared<Vocabulary>(Vocabulary::from_names(column_names));
        for (std::size_t j = 0; j < column_names.size(); ++j) column_to_feature[j] = j;
    }

    std::vector<LabeledSample> samples;
    std::size_t row = 1;  // header line
    while (std::getline(in, line)) {
        ++row;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields = split_fields(line);
        if (fields.size() != column_names.size() + 1) {
            throw MalformedCell(row, fields.size(),
                                "expected " + std::to_string(column_names.size() + 1) +
                                    " fields, found " + std::to_string(fields.size()));
        }
        LabeledSample sample;
        sample.label = parse_bit(fields[0], row, 1);
        std::vector<std::uint8_t> bits(column_names.size(), 0);
        for (std::size_t j = 0; j < column_names.size(); ++j) {
            bits[column_to_feature[j]] = parse_bit(fields[j + 1], row, j + 2);
        }
        sample.vector = PermissionVector(std::move(bits));
        samples.push_back(std::move(sample));
    }
    return LabeledDataset(std::move(vocab), std::move(samples));
}

LabeledDataset load_dataset_csv_file(const std::string& path, const Vocabulary* expected) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open dataset file: " + path);
    return load_dataset_csv(in, expected);
}

void save_dataset_csv(const LabeledDataset& dataset, std::ostream& out) {
    out << "label";
    for (const std::string& name : dataset.vocabulary().names()) out << ',' << name;
    out << '\n';
    for (const LabeledSample& s : dataset.samples()) {
        out << s.label;
        for (std::size_t f = 0; f < s.vector.size(); ++f) {
            out << ',' << static_cast<int>(s.vector.bit(f));
        }
        out << '\n';
    }
}

void save_dataset_csv_file(const LabeledDataset& dataset, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write dataset file: " + path);
    save_dataset_csv(dataset, out);
}

// ---- split / oversample / reduce ---------------------------------------------

FoldAssignment split_kfold(const LabeledDataset& dataset, std::size_t k,
                           std::uint64_t seed) {
    if (k < 2) throw Error("k-fold split requires k >= 2");
    for (int label : {0, 1}) {
        if (dataset.count_label(label) < k) {
            throw InsufficientData("class " + std::to_string(label) + " has " +
                                   std::to_string(dataset.count_label(label)) +
                                   " samples, need at least " + std::to_string(k));
        }
    }

    Rng rng(seed);
    FoldAssignment assignment;
    assignment.k = k;
    assignment.fold_of.assign(dataset.size(), 0);

    // Shuffle each class separately, then deal round-robin. The fold cursor
    // continues across classes so total fold sizes differ by at most one.
    std::size_t cursor = 0;
    for (int label : {0, 1}) {
        std::vector<std::size_t> indices;
        for (std::size_t i = 0; i < dataset.size(); ++i) {
            if (dataset.sample(i).label == label) indices.push_back(i);
        }
        for (std::size_t i = indices.size(); i > 1; --i) {
            std::size_t j = rng.uniform_below(i);
            std::swap(indices[i - 1], indices[j]);
        }
        for (std::size_t idx : indices) {
            assignment.fold_of[idx] = static_cast<std::uint32_t>(cursor % k);
            ++cursor;
        }
    }
    return assignment;
}

LabeledDataset random_oversample(const LabeledDataset& dataset, std::uint64_t seed) {
    std::size_t n0 = dataset.count_label(0);
    std::size_t n1 = dataset.count_label(1);
    if (n0 == 0 || n1 == 0) {
        throw SingleClassDataset("oversampling requires both classes present");
    }
    if (n0 == n1) return dataset;

    int minority = n1 < n0 ? 1 : 0;
    std::size_t deficit = (n1 < n0 ? n0 - n1 : n1 - n0);

    std::vector<std::size_t> minority_indices;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
        if (dataset.sample(i).label == minority) minority_indices.push_back(i);
    }

    Rng rng(seed);
    std::vector<LabeledSample> extra;
    extra.reserve(deficit);
    for (std::size_t d = 0; d < deficit; ++d) {
        std::size_t pick = minority_indices[rng.uniform_below(minority_indices.size())];
        extra.push_back(dataset.sample(pick));
    }
    return dataset.with_extra_samples(extra);
}

LabeledDataset reduce_to_features(const LabeledDataset& dataset,
                                  const std::vector<std::size_t>& indices) {
    std::vector<std::string> names;
    names.reserve(indices.size());
    std::vector<bool> seen(dataset.feature_count(), false);
    for (std::size_t idx : indices) {
        if (idx >= dataset.feature_count()) {
            throw IndexOutOfRange("feature index " + std::to_string(idx) +
                                  " out of range for " +
                                  std::to_string(dataset.feature_count()) + " features");
        }
        if (seen[idx]) throw Error("duplicate feature index " + std::to_string(idx));
        seen[idx] = true;
        names.push_back(dataset.vocabulary().name(idx));
    }
    auto vocab = std::make_shared<Vocabulary>(Vocabulary::from_names(std::move(names)));

    std::vector<LabeledSample> samples;
    samples.reserve(dataset.size());
    for (const LabeledSample& s : dataset.samples()) {
        std::vector<std::uint8_t> bits;
        bits.reserve(indices.size());
        for (std::size_t idx : indices) bits.push_back(s.vector.bit(idx));
        samples.push_back({PermissionVector(std::move(bits)), s.label});
    }
    return LabeledDataset(std::move(vocab), std::move(samples));
}

}  // namespace qevade
