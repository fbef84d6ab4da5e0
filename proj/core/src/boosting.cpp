#include <algorithm>
#include <cmath>
#include <numeric>

#include "qevade/tree.hpp"
#include "train_internal.hpp"

namespace qevade::detail {

namespace {

constexpr double kProbClip = 1e-12;

double clipped(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

}  // namespace

// SAMME.R boosting over depth-limited Gini stumps. Every boosting stage is
// kept, even degenerate single-leaf ones, so the ensemble always holds
// exactly n_estimators trees.
AdaBoostParams train_adaboost(const LabeledDataset& train, const Hyperparameters& hp) {
    const std::size_t n = train.size();
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});

    TreeGrowth growth;
    growth.max_depth = hp.max_depth > 0 ? hp.max_depth : 1;
    growth.min_samples_split = hp.min_samples_split;
    growth.min_samples_leaf = hp.min_samples_leaf;

    std::vector<double> weights(n, 1.0 / static_cast<double>(n));

    AdaBoostParams params;
    params.trees.reserve(static_cast<std::size_t>(hp.n_estimators));
    for (int stage = 0; stage < hp.n_estimators; ++stage) {
        Tree tree = grow_classification_tree(train, all, weights, growth, nullptr);

        // w_i *= exp(-(K-1)/K * y_vec . log p_vec), K = 2
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double p_benign = clipped(tree.benign_fraction(train.sample(i).vector));
            double log_ratio = std::log(p_benign) - std::log(1.0 - p_benign);
            double direction = train.sample(i).label == 0 ? 1.0 : -1.0;
            weights[i] *= std::exp(-0.5 * direction * log_ratio);
            total += weights[i];
        }
        if (total <= 0.0 || !std::isfinite(total)) {
            std::fill(weights.begin(), weights.end(), 1.0 / static_cast<double>(n));
        } else {
            for (double& w : weights) w /= total;
        }
        params.trees.push_back(std::move(tree));
    }
    return params;
}

// Gradient boosting with the binomial deviance loss. Stage trees are grown
// on the negative gradient with the Friedman improvement criterion and leaf
// values take one Newton step; predictions accumulate scaled logits on top
// of the class-prior logit.
GradBoostParams train_gradient_boosting(const LabeledDataset& train,
                                        const Hyperparameters& hp) {
    const std::size_t n = train.size();
    double positives = static_cast<double>(train.count_label(1));
    double prior = positives / static_cast<double>(n);
    prior = std::clamp(prior, kProbClip, 1.0 - kProbClip);

    GradBoostParams params;
    params.initial_logit = std::log(prior / (1.0 - prior));
    params.learning_rate = hp.learning_rate;
    params.trees.reserve(static_cast<std::size_t>(hp.n_estimators));

    TreeGrowth growth;
    growth.max_depth = hp.max_depth > 0 ? hp.max_depth : 3;
    growth.min_samples_split = hp.min_samples_split;
    growth.min_samples_leaf = hp.min_samples_leaf;

    std::vector<double> logit(n, params.initial_logit);
    std::vector<double> residual(n), hessian(n);
    for (int stage = 0; stage < hp.n_estimators; ++stage) {
        for (std::size_t i = 0; i < n; ++i) {
            double p = sigmoid(logit[i]);
            residual[i] = static_cast<double>(train.sample(i).label) - p;
            hessian[i] = std::max(p * (1.0 - p), 1e-10);
        }
        Tree tree = grow_regression_tree(train, residual, hessian, growth);
        for (std::size_t i = 0; i < n; ++i) {
            logit[i] += hp.learning_rate * tree.regression_value(train.sample(i).vector);
        }
        params.trees.push_back(std::move(tree));
    }
    return params;
}

}  // namespace qevade::detail
