#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qevade/dataset.hpp"

namespace qevade {

struct Hyperparameters;

/// Single-hidden-layer network: inputs -> ReLU hidden layer -> sigmoid
/// output giving the malware probability.
struct MlpParams {
    std::size_t inputs = 0;
    std::size_t hidden = 0;
    std::vector<double> w1;  // hidden x inputs, row-major
    std::vector<double> b1;  // hidden
    std::vector<double> w2;  // hidden
    double b2 = 0.0;

    std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + 1; }
    std::vector<double> flatten() const;
    static MlpParams unflatten(std::size_t inputs, std::size_t hidden,
                               const std::vector<double>& flat);
};

/// Malware probability (sigmoid of the output unit).
double mlp_malware_probability(const MlpParams& params, const PermissionVector& x);

/// Mean binary cross-entropy over the batch, plus its analytic gradient in
/// flattened parameter order (w1, b1, w2, b2). Exposed so the backward pass
/// can be checked against finite differences.
double mlp_loss_and_gradient(const MlpParams& params,
                             const std::vector<const PermissionVector*>& batch,
                             const std::vector<int>& labels,
                             std::vector<double>& gradient);

/// Adam training with a constant learning rate and seeded epoch shuffling.
MlpParams train_mlp(const LabeledDataset& train, const Hyperparameters& hp,
                    std::uint64_t seed, std::vector<std::string>& log);

}  // namespace qevade
