#pragma once

#include <string>
#include <vector>

#include "qevade/dataset.hpp"
#include "qevade/detector.hpp"

namespace qevade::detail {

LinearParams train_logistic(const LabeledDataset& train, const Hyperparameters& hp,
                            std::vector<std::string>& log);

LinearParams train_svm(const LabeledDataset& train, const Hyperparameters& hp,
                       std::vector<std::string>& log);

AdaBoostParams train_adaboost(const LabeledDataset& train, const Hyperparameters& hp);

GradBoostParams train_gradient_boosting(const LabeledDataset& train,
                                        const Hyperparameters& hp);

inline double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    double e = std::exp(z);
    return e / (1.0 + e);
}

/// Inverse-class-frequency sample weights: n / (2 * n_class).
std::vector<double> balanced_weights(const LabeledDataset& data);

}  // namespace qevade::detail
