#include "qevade/mlp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "qevade/detector.hpp"
#include "qevade/errors.hpp"
#include "qevade/rng.hpp"
#include "train_internal.hpp"

namespace qevade {

std::vector<double> MlpParams::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    flat.insert(flat.end(), w1.begin(), w1.end());
    flat.insert(flat.end(), b1.begin(), b1.end());
    flat.insert(flat.end(), w2.begin(), w2.end());
    flat.push_back(b2);
    return flat;
}

MlpParams MlpParams::unflatten(std::size_t inputs, std::size_t hidden,
                               const std::vector<double>& flat) {
    MlpParams p;
    p.inputs = inputs;
    p.hidden = hidden;
    if (flat.size() != hidden * inputs + hidden + hidden + 1) {
        throw DimensionMismatch("flat parameter vector has the wrong length");
    }
    auto it = flat.begin();
    p.w1.assign(it, it + static_cast<long>(hidden * inputs));
    it += static_cast<long>(hidden * inputs);
    p.b1.assign(it, it + static_cast<long>(hidden));
    it += static_cast<long>(hidden);
    p.w2.assign(it, it + static_cast<long>(hidden));
    it += static_cast<long>(hidden);
    p.b2 = *it;
    return p;
}

namespace {

double forward_logit(const MlpParams& p, const PermissionVector& x,
                     std::vector<double>* hidden_out) {
    double logit = p.b2;
    for (std::size_t h = 0; h < p.hidden; ++h) {
        double z = p.b1[h];
        const double* row = &p.w1[h * p.inputs];
        for (std::size_t f = 0; f < p.inputs; ++f) {
            if (x.bit(f)) z += row[f];
        }
        double a = z > 0.0 ? z : 0.0;
        if (hidden_out) (*hidden_out)[h] = a;
        logit += p.w2[h] * a;
    }
    return logit;
}

}  // namespace

double mlp_malware_probability(const MlpParams& params, const PermissionVector& x) {
    return detail::sigmoid(forward_logit(params, x, nullptr));
}

double mlp_loss_and_gradient(const MlpParams& params,
                             const std::vector<const PermissionVector*>& batch,
                             const std::vector<int>& labels,
                             std::vector<double>& gradient) {
    if (batch.empty() || batch.size() != labels.size()) {
        throw DimensionMismatch("batch and labels must be non-empty and equal length");
    }
    const std::size_t d = params.inputs;
    const std::size_t h = params.hidden;
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    gradient.assign(params.parameter_count(), 0.0);
    double* gw1 = gradient.data();
    double* gb1 = gw1 + h * d;
    double* gw2 = gb1 + h;
    double* gb2 = gw2 + h;

    std::vector<double> hidden(h);
    double loss = 0.0;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const PermissionVector& x = *batch[i];
        double y = static_cast<double>(labels[i]);
        double z = forward_logit(params, x, &hidden);

        // binary cross entropy: softplus(z) - y*z
        double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
        loss += inv_batch * (softplus - y * z);

        double dz = inv_batch * (detail::sigmoid(z) - y);
        *gb2 += dz;
        for (std::size_t j = 0; j < h; ++j) {
            gw2[j] += dz * hidden[j];
            if (hidden[j] > 0.0) {
                double da = dz * params.w2[j];
                gb1[j] += da;
                double* grow = gw1 + j * d;
                for (std::size_t f = 0; f < d; ++f) {
                    if (x.bit(f)) grow[f] += da;
                }
            }
        }
    }
    return loss;
}

MlpParams train_mlp(const LabeledDataset& train, const Hyperparameters& hp,
                    std::uint64_t seed, std::vector<std::string>& log) {
    const std::size_t d = train.feature_count();
    const std::size_t h = static_cast<std::size_t>(hp.hidden_units);
    const std::size_t n = train.size();
    const std::size_t batch_size = std::min<std::size_t>(
        static_cast<std::size_t>(hp.batch_size), n);

    Rng rng(seed);

    MlpParams params;
    params.inputs = d;
    params.hidden = h;
    params.w1.resize(h * d);
    params.b1.assign(h, 0.0);
    params.w2.resize(h);
    params.b2 = 0.0;

    // Glorot-uniform initialization
    double bound1 = std::sqrt(6.0 / static_cast<double>(d + h));
    for (double& w : params.w1) w = (rng.uniform() * 2.0 - 1.0) * bound1;
    double bound2 = std::sqrt(6.0 / static_cast<double>(h + 1));
    for (double& w : params.w2) w = (rng.uniform() * 2.0 - 1.0) * bound2;

    const std::size_t n_params = params.parameter_count();
    std::vector<double> m(n_params, 0.0), v(n_params, 0.0), grad(n_params, 0.0);
    const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    double beta1_t = 1.0, beta2_t = 1.0;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});

    std::vector<const PermissionVector*> batch;
    std::vector<int> labels;
    double last_loss = 0.0;
    for (int epoch = 0; epoch < hp.epochs; ++epoch) {
        for (std::size_t i = n; i > 1; --i) {
            std::size_t j = rng.uniform_below(i);
            std::swap(order[i - 1], order[j]);
        }
        last_loss = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += batch_size) {
            std::size_t end = std::min(start + batch_size, n);
            batch.clear();
            labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&train.sample(order[i]).vector);
                labels.push_back(train.sample(order[i]).label);
            }
            last_loss += mlp_loss_and_gradient(params, batch, labels, grad);
            ++batches;

            beta1_t *= beta1;
            beta2_t *= beta2;
            // parameter p in flat order: w1, b1, w2, b2
            double* segments[] = {params.w1.data(), params.b1.data(),
                                  params.w2.data(), &params.b2};
            std::size_t sizes[] = {h * d, h, h, 1};
            std::size_t p = 0;
            for (int seg = 0; seg < 4; ++seg) {
                for (std::size_t k = 0; k < sizes[seg]; ++k, ++p) {
                    m[p] = beta1 * m[p] + (1.0 - beta1) * grad[p];
                    v[p] = beta2 * v[p] + (1.0 - beta2) * grad[p] * grad[p];
                    double m_hat = m[p] / (1.0 - beta1_t);
                    double v_hat = v[p] / (1.0 - beta2_t);
                    segments[seg][k] -= hp.adam_lr * m_hat / (std::sqrt(v_hat) + eps);
                }
            }
        }
        last_loss /= static_cast<double>(std::max<std::size_t>(batches, 1));
    }
    log.push_back("DNN: trained " + std::to_string(hp.epochs) + " epochs, final loss " +
                  std::to_string(last_loss));
    return params;
}

}  // namespace qevade
