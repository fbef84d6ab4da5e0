#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"
#include "qevade/env.hpp"

namespace qevade {

/// Where the run's dataset comes from: a generated corpus, a CSV matrix, or
/// directories of decoded manifest files.
struct DatasetSource {
    enum class Kind { Synth, Csv, Manifests };
    Kind kind = Kind::Synth;
    SynthSpec synth{200, 200, 10, 4, 0.05, 0};
    bool synth_seed_explicit = false;  // unset seeds derive from the master seed
    std::string csv_path;
    std::string malware_manifest_dir;
    std::string benign_manifest_dir;
    std::string vocab_path;
};

/// Full batch-run configuration. A single master seed fans out to per-stage
/// sub-seeds via derive_seed(master, stage_label); seed_overrides pins
/// individual stages without disturbing the others.
struct RunConfig {
    DatasetSource source;
    std::size_t feature_k = 10;
    std::vector<Algorithm> algorithms{kAllAlgorithms, kAllAlgorithms + kAlgorithmCount};
    EnvConfig env;
    std::size_t episodes = 100000;
    std::vector<std::size_t> budgets{1, 2, 3, 4, 5};
    bool run_spa = true;
    bool run_mpa = true;
    bool defense = true;
    double defense_pool_fraction = 0.15;  // harvested share of the malware count
    std::uint64_t master_seed = 0;
    std::filesystem::path out_dir;
    std::size_t n_folds = 5;  // fold 0 of a stratified split is the test set
    std::map<std::string, std::uint64_t> seed_overrides;

    void validate() const;
    std::uint64_t stage_seed(const std::string& label) const;

    /// Parses the JSON config format (all keys optional except out_dir,
    /// which may also be injected from the CLI).
    static RunConfig from_json(const std::string& text);

    /// Serializes everything except out_dir, so resolved configs are
    /// comparable across runs placed in different directories.
    std::string to_json() const;
};

struct RankArtifacts {
    ImportanceRanking ranking;
    std::vector<std::size_t> top;  // selected feature indices, importance order
    LabeledDataset reduced;
};

/// Importance ranking from a default random forest plus the top-k reduction.
/// k equal to the feature count leaves the dataset unchanged.
RankArtifacts rank_features(const LabeledDataset& dataset, std::size_t k,
                            std::uint64_t seed);

/// Runs the full pipeline into config.out_dir: resolve dataset, split,
/// feature-select, train the detector zoo, train Q-tables and extract
/// policies, run the attacks, optionally retrain and re-evaluate (defense),
/// emit reports, then write a manifest hashing every artifact. A stage
/// failure aborts with a stage-tagged diagnostic; artifacts already written
/// stay on disk.
void run_pipeline(const RunConfig& config);

struct EmitOptions {
    bool csv = true;
    bool svg = true;
};

/// (Re)emits the CSV summaries and SVG charts of an existing run directory
/// from its JSON artifacts. Returns the files written.
std::vector<std::filesystem::path> emit_reports(const std::filesystem::path& run_dir,
                                                const EmitOptions& options = {});

/// FNV-1a 64 content hash of a file, as 16 hex digits.
std::string file_hash_hex(const std::filesystem::path& path);

/// Writes manifest.json listing every artifact under run_dir (relative
/// sorted paths + content hashes, the manifest itself excluded).
void write_run_manifest(const std::filesystem::path& run_dir);

}  // namespace qevade
