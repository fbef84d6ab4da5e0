#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/mlp.hpp"
#include "qevade/tree.hpp"

namespace qevade {

// ---- specs ------------------------------------------------------------------

enum class Algorithm { LR, SVM, DT, RF, AB, GB, ET, DNN };

constexpr std::size_t kAlgorithmCount = 8;
extern const Algorithm kAllAlgorithms[kAlgorithmCount];

std::string_view algorithm_name(Algorithm algorithm);  // "LR", "SVM", ...
std::string algorithm_id(Algorithm algorithm);         // "lr", "svm", ...
std::optional<Algorithm> algorithm_from_name(std::string_view name);

/// Per-algorithm knobs. Only the fields relevant to an algorithm are
/// consulted; defaults(Algorithm) fills in the standard configuration.
struct Hyperparameters {
    // linear models (LR, SVM)
    double reg_lambda = 1.0;  // LR: l2 penalty weight
    double svm_cost = 1.0;    // SVM: squared-hinge cost multiplier
    int max_iter = 500;
    double tol = 1e-6;
    bool balanced = true;  // inverse-class-frequency sample weights

    // trees and ensembles (DT, RF, AB, GB, ET)
    int n_estimators = 100;
    int max_depth = 0;  // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;  // 0 = all features, -1 = sqrt(feature count)
    double learning_rate = 0.1;  // GB shrinkage

    // neural network (DNN)
    int hidden_units = 100;
    int batch_size = 200;
    double adam_lr = 1e-3;
    int epochs = 200;

    void validate(Algorithm algorithm) const;
};

struct DetectorSpec {
    Algorithm algorithm = Algorithm::DT;
    Hyperparameters hp;
    std::uint64_t seed = 0;
    std::string model_id;  // empty -> algorithm_id(algorithm)

    /// The standard configuration of each algorithm: linear SVM with squared
    /// hinge loss; unlimited-depth Gini DT; RF with 100 trees; AB with 100
    /// SAMME.R stumps; GB with 100 depth-3 stages; ET with 10 randomized
    /// trees; single-hidden-layer 100-unit ReLU network trained with Adam.
    static DetectorSpec defaults(Algorithm algorithm, std::uint64_t seed = 0);

    std::string id() const;
};

// ---- trained models -----------------------------------------------------------

/// Anything that can score a permission vector. All detectors expose the
/// benign probability P_b in [0, 1]; a sample is treated as benign exactly
/// when P_b exceeds the decision threshold, so a tie classifies as malware.
class Detector {
public:
    virtual ~Detector() = default;
    virtual double benign_probability(const PermissionVector& x) const = 0;
    virtual std::size_t feature_count() const = 0;
    virtual const std::string& id() const = 0;
};

/// Linear model parameters. The margin w.x + b is oriented malware-positive;
/// LR squashes the raw margin, SVM squashes a fitted rescaling of it.
struct LinearParams {
    std::vector<double> weights;
    double bias = 0.0;
    bool use_platt = false;
    double platt_scale = 1.0;
    double platt_offset = 0.0;
};

struct TreeModelParams {
    Tree tree;
};

struct ForestParams {
    std::vector<Tree> trees;  // probability = mean of per-tree leaf fractions
};

struct AdaBoostParams {
    std::vector<Tree> trees;  // combined with the SAMME.R probability formula
};

struct GradBoostParams {
    double initial_logit = 0.0;
    double learning_rate = 0.1;
    std::vector<Tree> trees;  // additive logit contributions
};

using ModelParams = std::variant<LinearParams, TreeModelParams, ForestParams,
                                 AdaBoostParams, GradBoostParams, MlpParams>;

class DetectorModel final : public Detector {
public:
    DetectorModel() = default;
    DetectorModel(DetectorSpec spec, std::vector<std::string> feature_names,
                  ModelParams params, std::vector<std::string> training_log = {});

    double benign_probability(const PermissionVector& x) const override;
    std::size_t feature_count() const override { return feature_names_.size(); }
    const std::string& id() const override { return model_id_; }

    const DetectorSpec& spec() const { return spec_; }
    const std::vector<std::string>& feature_names() const { return feature_names_; }
    const ModelParams& params() const { return params_; }
    const std::vector<std::string>& training_log() const { return training_log_; }

private:
    DetectorSpec spec_;
    std::string model_id_;
    std::vector<std::string> feature_names_;
    ModelParams params_;
    std::vector<std::string> training_log_;
};

/// Trains one detector. Deterministic given (spec.seed, train). Throws
/// SingleClassDataset when only one class is present; optimizers that hit
/// their iteration cap note it in the training log and return the model.
DetectorModel train_model(const DetectorSpec& spec, const LabeledDataset& train);

/// The model's benign probability for x (P_b).
double predict_benign_prob(const DetectorModel& model, const PermissionVector& x);

// ---- evaluation ----------------------------------------------------------------

/// Malware-positive confusion counts. accuracy = (tp+tn)/(tp+tn+fp+fn).
struct Metrics {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;
    double accuracy = 0.0;
};

/// Scores a model over a test set. A sample is predicted malware when
/// P_b <= threshold (ties classify as malware).
Metrics evaluate(const Detector& model, const LabeledDataset& test,
                 double threshold = 0.5);

struct CrossValidation {
    double mean_accuracy = 0.0;
    std::vector<Metrics> folds;
};

/// Stratified k-fold cross validation: trains k models on k-1 folds each and
/// evaluates them on the held-out fold.
CrossValidation cross_validate(const DetectorSpec& spec, const LabeledDataset& dataset,
                               std::size_t k, std::uint64_t seed);

// ---- feature importance ----------------------------------------------------------

/// Per-feature nonnegative scores summing to 1 (when any split occurred) and
/// the feature indices sorted by descending score, ties toward lower index.
struct ImportanceRanking {
    std::vector<double> scores;
    std::vector<std::size_t> order;
};

/// Mean normalized Gini impurity decrease per feature across the model's
/// trees. Supported for DT, RF and ET models; anything else is
/// UnsupportedModel.
ImportanceRanking feature_importance(const DetectorModel& model);

/// First k entries of ranking.order. Throws IndexOutOfRange when k exceeds
/// the feature count.
std::vector<std::size_t> select_top_k(const ImportanceRanking& ranking, std::size_t k);

}  // namespace qevade
