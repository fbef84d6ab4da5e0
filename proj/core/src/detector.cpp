#include "qevade/detector.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qevade/errors.hpp"
#include "qevade/rng.hpp"
#include "train_internal.hpp"

namespace qevade {

const Algorithm kAllAlgorithms[kAlgorithmCount] = {
    Algorithm::LR, Algorithm::SVM, Algorithm::DT, Algorithm::RF,
    Algorithm::AB, Algorithm::GB,  Algorithm::ET, Algorithm::DNN};

std::string_view algorithm_name(Algorithm algorithm) {
    switch (algorithm) {
        case Algorithm::LR: return "LR";
        case Algorithm::SVM: return "SVM";
        case Algorithm::DT: return "DT";
        case Algorithm::RF: return "RF";
        case Algorithm::AB: return "AB";
        case Algorithm::GB: return "GB";
        case Algorithm::ET: return "ET";
        case Algorithm::DNN: return "DNN";
    }
    return "?";
}

std::string algorithm_id(Algorithm algorithm) {
    std::string id(algorithm_name(algorithm));
    std::transform(id.begin(), id.end(), id.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return id;
}

std::optional<Algorithm> algorithm_from_name(std::string_view name) {
    std::string upper(name);
    std::transform(upper.begin(), upper.end(), upper.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    for (Algorithm a : kAllAlgorithms) {
        if (algorithm_name(a) == upper) return a;
    }
    return std::nullopt;
}

void Hyperparameters::validate(Algorithm algorithm) const {
    switch (algorithm) {
        case Algorithm::LR:
            if (reg_lambda < 0.0) throw Error("LR penalty must be >= 0");
            if (max_iter <= 0 || tol <= 0.0) throw Error("LR needs max_iter > 0, tol > 0");
            break;
        case Algorithm::SVM:
            if (svm_cost <= 0.0) throw Error("SVM cost must be > 0");
            if (max_iter <= 0 || tol <= 0.0) throw Error("SVM needs max_iter > 0, tol > 0");
            break;
        case Algorithm::DT:
        case Algorithm::RF:
        case Algorithm::AB:
        case Algorithm::GB:
        case Algorithm::ET:
            if (n_estimators <= 0) throw Error("tree count must be > 0");
            if (max_depth < 0) throw Error("max_depth must be >= 0 (0 = unlimited)");
            if (min_samples_split < 2) throw Error("min_samples_split must be >= 2");
            if (min_samples_leaf < 1) throw Error("min_samples_leaf must be >= 1");
            if (algorithm == Algorithm::GB && learning_rate <= 0.0) {
                throw Error("GB learning rate must be > 0");
            }
            break;
        case Algorithm::DNN:
            if (hidden_units <= 0) throw Error("hidden unit count must be > 0");
            if (batch_size <= 0) throw Error("batch size must be > 0");
            if (adam_lr <= 0.0) throw Error("learning rate must be > 0");
            if (epochs <= 0) throw Error("epoch count must be > 0");
            break;
    }
}

DetectorSpec DetectorSpec::defaults(Algorithm algorithm, std::uint64_t seed) {
    DetectorSpec spec;
    spec.algorithm = algorithm;
    spec.seed = seed;
    switch (algorithm) {
        case Algorithm::LR:
        case Algorithm::SVM:
        case Algorithm::DNN:
            break;  // field defaults already match
        case Algorithm::DT:
            spec.hp.n_estimators = 1;
            break;
        case Algorithm::RF:
            spec.hp.n_estimators = 100;
            spec.hp.max_features = -1;
            break;
        case Algorithm::AB:
            spec.hp.n_estimators = 100;
            spec.hp.max_depth = 1;
            break;
        case Algorithm::GB:
            spec.hp.n_estimators = 100;
            spec.hp.max_depth = 3;
            spec.hp.learning_rate = 0.1;
            break;
        case Algorithm::ET:
            spec.hp.n_estimators = 10;
            spec.hp.max_features = -1;
            break;
    }
    return spec;
}

std::string DetectorSpec::id() const {
    return model_id.empty() ? algorithm_id(algorithm) : model_id;
}

// ---- training -----------------------------------------------------------------

namespace {

int resolve_max_features(int max_features, std::size_t feature_count) {
    if (max_features == 0) return 0;
    if (max_features > 0) return max_features;
    int sqrt_features = static_cast<int>(
        std::floor(std::sqrt(static_cast<double>(feature_count))));
    return std::max(sqrt_features, 1);
}

std::vector<Tree> train_forest(const LabeledDataset& train, const Hyperparameters& hp,
                               std::uint64_t seed, bool bootstrap,
                               bool random_threshold) {
    TreeGrowth growth;
    growth.max_depth = hp.max_depth;
    growth.min_samples_split = hp.min_samples_split;
    growth.min_samples_leaf = hp.min_samples_leaf;
    growth.max_features = resolve_max_features(hp.max_features, train.feature_count());
    growth.random_threshold = random_threshold;

    std::vector<Tree> trees;
    trees.reserve(static_cast<std::size_t>(hp.n_estimators));
    for (int t = 0; t < hp.n_estimators; ++t) {
        Rng rng(derive_seed(seed, "tree-" + std::to_string(t)));
        std::vector<std::size_t> indices(train.size());
        if (bootstrap) {
            for (std::size_t i = 0; i < train.size(); ++i) {
                indices[i] = rng.uniform_below(train.size());
            }
        } else {
            std::iota(indices.begin(), indices.end(), std::size_t{0});
        }
        trees.push_back(grow_classification_tree(train, indices, {}, growth, &rng));
    }
    return trees;
}

}  // namespace

DetectorModel::DetectorModel(DetectorSpec spec, std::vector<std::string> feature_names,
                             ModelParams params, std::vector<std::string> training_log)
    : spec_(std::move(spec)),
      model_id_(spec_.id()),
      feature_names_(std::move(feature_names)),
      params_(std::move(params)),
      training_log_(std::move(training_log)) {}

DetectorModel train_model(const DetectorSpec& spec, const LabeledDataset& train) {
    spec.hp.validate(spec.algorithm);
    if (train.size() == 0) throw InsufficientData("training set is empty");
    if (train.count_label(0) == 0 || train.count_label(1) == 0) {
        throw SingleClassDataset("training requires both classes present");
    }

    std::vector<std::string> log;
    ModelParams params{LinearParams{}};
    switch (spec.algorithm) {
        case Algorithm::LR:
            params = detail::train_logistic(train, spec.hp, log);
            break;
        case Algorithm::SVM:
            params = detail::train_svm(train, spec.hp, log);
            break;
        case Algorithm::DT: {
            TreeGrowth growth;
            growth.max_depth = spec.hp.max_depth;
            growth.min_samples_split = spec.hp.min_samples_split;
            growth.min_samples_leaf = spec.hp.min_samples_leaf;
            std::vector<std::size_t> all(train.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            params = TreeModelParams{
                grow_classification_tree(train, all, {}, growth, nullptr)};
            break;
        }
        case Algorithm::RF:
            params = ForestParams{train_forest(train, spec.hp, spec.seed, true, false)};
            break;
        case Algorithm::ET:
            params = ForestParams{train_forest(train, spec.hp, spec.seed, false, true)};
            break;
        case Algorithm::AB:
            params = detail::train_adaboost(train, spec.hp);
            break;
        case Algorithm::GB:
            params = detail::train_gradient_boosting(train, spec.hp);
            break;
        case Algorithm::DNN:
            params = train_mlp(train, spec.hp, spec.seed, log);
            break;
    }
    return DetectorModel(spec, train.vocabulary().names(), std::move(params),
                         std::move(log));
}

// ---- prediction -----------------------------------------------------------------

namespace {

struct BenignProbability {
    const PermissionVector& x;

    double operator()(const LinearParams& p) const {
        double margin = p.bias;
        for (std::size_t f = 0; f < x.size(); ++f) {
            if (x.bit(f)) margin += p.weights[f];
        }
        if (p.use_platt) margin = p.platt_scale * margin + p.platt_offset;
        return 1.0 - detail::sigmoid(margin);
    }

    double operator()(const TreeModelParams& p) const { return p.tree.benign_fraction(x); }

    double operator()(const ForestParams& p) const {
        double sum = 0.0;
        for (const Tree& tree : p.trees) sum += tree.benign_fraction(x);
        return sum / static_cast<double>(p.trees.size());
    }

    double operator()(const AdaBoostParams& p) const {
        // SAMME.R: P(benign) = sigmoid(sum_k log(p_k(benign)/p_k(malware)))
        double log_odds = 0.0;
        for (const Tree& tree : p.trees) {
            double pb = std::clamp(tree.benign_fraction(x), 1e-12, 1.0 - 1e-12);
            log_odds += std::log(pb) - std::log(1.0 - pb);
        }
        return detail::sigmoid(log_odds);
    }

    double operator()(const GradBoostParams& p) const {
        double logit = p.initial_logit;
        for (const Tree& tree : p.trees) {
            logit += p.learning_rate * tree.regression_value(x);
        }
        return 1.0 - detail::sigmoid(logit);
    }

    double operator()(const MlpParams& p) const {
        return 1.0 - mlp_malware_probability(p, x);
    }
};

}  // namespace

double DetectorModel::benign_probability(const PermissionVector& x) const {
    if (x.size() != feature_names_.size()) {
        throw VocabularyMismatch("input has " + std::to_string(x.size()) +
                                 " features, model expects " +
                                 std::to_string(feature_names_.size()));
    }
    return std::visit(BenignProbability{x}, params_);
}

double predict_benign_prob(const DetectorModel& model, const PermissionVector& x) {
    return model.benign_probability(x);
}

// ---- evaluation -----------------------------------------------------------------

Metrics evaluate(const Detector& model, const LabeledDataset& test, double threshold) {
    if (test.size() == 0) throw InsufficientData("evaluation set is empty");
    Metrics m;
    for (const LabeledSample& s : test.samples()) {
        bool predicted_malware = model.benign_probability(s.vector) <= threshold;
        if (s.label == 1) {
            (predicted_malware ? m.tp : m.fn) += 1;
        } else {
            (predicted_malware ? m.fp : m.tn) += 1;
        }
    }
    m.accuracy = static_cast<double>(m.tp + m.tn) /
                 static_cast<double>(m.tp + m.tn + m.fp + m.fn);
    return m;
}

CrossValidation cross_validate(const DetectorSpec& spec, const LabeledDataset& dataset,
                               std::size_t k, std::uint64_t seed) {
    FoldAssignment folds = split_kfold(dataset, k, seed);
    CrossValidation cv;
    cv.folds.reserve(k);
    double total = 0.0;
    for (std::size_t fold = 0; fold < k; ++fold) {
        LabeledDataset train = dataset.subset(folds.complement_indices(fold));
        LabeledDataset test = dataset.subset(folds.fold_indices(fold));
        DetectorSpec fold_spec = spec;
        fold_spec.seed = derive_seed(spec.seed, "cv-fold-" + std::to_string(fold));
        DetectorModel model = train_model(fold_spec, train);
        Metrics metrics = evaluate(model, test);
        total += metrics.accuracy;
        cv.folds.push_back(metrics);
    }
    cv.mean_accuracy = total / static_cast<double>(k);
    return cv;
}

// ---- feature importance ------------------------------------------------------------

namespace {

double node_gini(const TreeNode& node) {
    double w = node.w0 + node.w1;
    if (w <= 0.0) return 0.0;
    double p0 = node.w0 / w;
    double p1 = node.w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

// Impurity decrease attributed to each feature, normalized to sum 1.
std::vector<double> tree_importance(const Tree& tree, std::size_t n_features) {
    std::vector<double> scores(n_features, 0.0);
    if (tree.nodes.empty()) return scores;
    double w_root = tree.nodes[0].w0 + tree.nodes[0].w1;
    if (w_root <= 0.0) return scores;
    double total = 0.0;
    for (const TreeNode& node : tree.nodes) {
        if (node.feature < 0) continue;
        const TreeNode& left = tree.nodes[static_cast<std::size_t>(node.left)];
        const TreeNode& right = tree.nodes[static_cast<std::size_t>(node.right)];
        double w = node.w0 + node.w1;
        double wl = left.w0 + left.w1;
        double wr = right.w0 + right.w1;
        double decrease =
            (w * node_gini(node) - wl * node_gini(left) - wr * node_gini(right)) / w_root;
        if (decrease > 0.0) {
            scores[static_cast<std::size_t>(node.feature)] += decrease;
            total += decrease;
        }
    }
    if (total > 0.0) {
        for (double& s : scores) s /= total;
    }
    return scores;
}

}  // namespace

ImportanceRanking feature_importance(const DetectorModel& model) {
    const std::size_t n_features = model.feature_count();
    std::vector<const Tree*> trees;
    if (const auto* single = std::get_if<TreeModelParams>(&model.params())) {
        trees.push_back(&single->tree);
    } else if (const auto* forest = std::get_if<ForestParams>(&model.params())) {
        for (const Tree& t : forest->trees) trees.push_back(&t);
    } else {
        throw UnsupportedModel("feature importance requires a Gini tree model (DT/RF/ET)");
    }

    ImportanceRanking ranking;
    ranking.scores.assign(n_features, 0.0);
    for (const Tree* tree : trees) {
        std::vector<double> scores = tree_importance(*tree, n_features);
        for (std::size_t f = 0; f < n_features; ++f) {
            ranking.scores[f] += scores[f] / static_cast<double>(trees.size());
        }
    }
    double total = std::accumulate(ranking.scores.begin(), ranking.scores.end(), 0.0);
    if (total > 0.0) {
        for (double& s : ranking.scores) s /= total;
    }

    ranking.order.resize(n_features);
    std::iota(ranking.order.begin(), ranking.order.end(), std::size_t{0});
    std::stable_sort(ranking.order.begin(), ranking.order.end(),
                     [&](std::size_t a, std::size_t b) {
                         if (ranking.scores[a] != ranking.scores[b]) {
                             return ranking.scores[a] > ranking.scores[b];
                         }
                         return a < b;
                     });
    return ranking;
}

std::vector<std::size_t> select_top_k(const ImportanceRanking& ranking, std::size_t k) {
    if (k > ranking.order.size()) {
        throw IndexOutOfRange("top-" + std::to_string(k) + " requested from " +
                              std::to_string(ranking.order.size()) + " features");
    }
    return {ranking.order.begin(), ranking.order.begin() + static_cast<long>(k)};
}

}  // namespace qevade
