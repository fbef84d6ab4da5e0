#include <algorithm>
#include <cmath>
#include <vector>

#include "qevade/errors.hpp"
#include "train_internal.hpp"

namespace qevade::detail {

namespace {

// Cholesky solve of A x = b for symmetric positive definite A (row-major,
// destroyed). Returns false when the factorization breaks down.
bool cholesky_solve(std::vector<double>& a, std::vector<double>& b, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (d <= 0.0) return false;
        d = std::sqrt(d);
        a[j * n + j] = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) v -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = v / d;
        }
    }
    // forward substitution L y = b
    for (std::size_t i = 0; i < n; ++i) {
        double v = b[i];
        for (std::size_t k = 0; k < i; ++k) v -= a[i * n + k] * b[k];
        b[i] = v / a[i * n + i];
    }
    // back substitution L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        double v = b[ii];
        for (std::size_t k = ii + 1; k < n; ++k) v -= a[k * n + ii] * b[k];
        b[ii] = v / a[ii * n + ii];
    }
    return true;
}

double dot_margin(const std::vector<double>& w, double b, const PermissionVector& x) {
    double m = b;
    for (std::size_t f = 0; f < x.size(); ++f) {
        if (x.bit(f)) m += w[f];
    }
    return m;
}

double inf_norm(const std::vector<double>& v) {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

// Platt-style rescaling: fits sigmoid(scale * margin + offset) to the labels
// by Newton iteration on the logistic loss in two parameters.
void fit_platt(const std::vector<double>& margins, const std::vector<int>& labels,
               double& scale, double& offset) {
    const double ridge = 1e-8;
    scale = 1.0;
    offset = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        double g0 = ridge * scale, g1 = ridge * offset;
        double h00 = ridge, h01 = 0.0, h11 = ridge;
        for (std::size_t i = 0; i < margins.size(); ++i) {
            double p = sigmoid(scale * margins[i] + offset);
            double r = p - labels[i];
            double s = std::max(p * (1.0 - p), 1e-12);
            g0 += r * margins[i];
            g1 += r;
            h00 += s * margins[i] * margins[i];
            h01 += s * margins[i];
            h11 += s;
        }
        if (std::max(std::abs(g0), std::abs(g1)) < 1e-10) break;
        double det = h00 * h11 - h01 * h01;
        if (std::abs(det) < 1e-30) break;
        scale -= (h11 * g0 - h01 * g1) / det;
        offset -= (h00 * g1 - h01 * g0) / det;
    }
}

}  // namespace

std::vector<double> balanced_weights(const LabeledDataset& data) {
    double n = static_cast<double>(data.size());
    double n0 = static_cast<double>(data.count_label(0));
    double n1 = static_cast<double>(data.count_label(1));
    std::vector<double> weights(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        weights[i] = data.sample(i).label == 0 ? n / (2.0 * n0) : n / (2.0 * n1);
    }
    return weights;
}

// l2-regularized logistic regression (malware-positive margin) fitted with a
// damped Newton iteration. The bias is unpenalized.
LinearParams train_logistic(const LabeledDataset& train, const Hyperparameters& hp,
                            std::vector<std::string>& log) {
    const std::size_t d = train.feature_count();
    const std::size_t dim = d + 1;  // bias last
    const double lambda = hp.reg_lambda;

    std::vector<double> sw = hp.balanced ? balanced_weights(train)
                                         : std::vector<double>(train.size(), 1.0);

    std::vector<double> theta(dim, 0.0);
    auto loss_at = [&](const std::vector<double>& t) {
        double loss = 0.0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            const LabeledSample& s = train.sample(i);
            double z = t[d];
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) z += t[f];
            }
            // log(1 + e^z) - y z, computed stably
            double logexp = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
            loss += sw[i] * (logexp - s.label * z);
        }
        for (std::size_t f = 0; f < d; ++f) loss += 0.5 * lambda * t[f] * t[f];
        return loss;
    };

    bool converged = false;
    double loss = loss_at(theta);
    for (int iter = 0; iter < hp.max_iter; ++iter) {
        std::vector<double> grad(dim, 0.0);
        std::vector<double> hess(dim * dim, 0.0);
        for (std::size_t i = 0; i < train.size(); ++i) {
            const LabeledSample& s = train.sample(i);
            double z = theta[d];
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) z += theta[f];
            }
            double p = sigmoid(z);
            double r = sw[i] * (p - s.label);
            double h = sw[i] * std::max(p * (1.0 - p), 1e-12);

            // binary features: x_f in {0,1}, so only set bits contribute
            std::vector<std::size_t> on;
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) on.push_back(f);
            }
            for (std::size_t a : on) {
                grad[a] += r;
                for (std::size_t b : on) hess[a * dim + b] += h;
                hess[a * dim + d] += h;
                hess[d * dim + a] += h;
            }
            grad[d] += r;
            hess[d * dim + d] += h;
        }
        for (std::size_t f = 0; f < d; ++f) {
            grad[f] += lambda * theta[f];
            hess[f * dim + f] += lambda;
        }
        hess[d * dim + d] += 1e-12;

        if (inf_norm(grad) <= hp.tol) {
            converged = true;
            break;
        }

        std::vector<double> step = grad;
        std::vector<double> hess_copy = hess;
        if (!cholesky_solve(hess_copy, step, dim)) {
            log.push_back("LR: Hessian factorization failed, stopping early");
            break;
        }

        // backtrack until the Newton step decreases the loss
        double alpha = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            std::vector<double> candidate = theta;
            for (std::size_t j = 0; j < dim; ++j) candidate[j] -= alpha * step[j];
            double candidate_loss = loss_at(candidate);
            if (candidate_loss <= loss) {
                theta = std::move(candidate);
                loss = candidate_loss;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) {
            converged = true;  // no descent direction left at working precision
            break;
        }
    }
    if (!converged) {
        log.push_back("LR: iteration cap " + std::to_string(hp.max_iter) +
                      " reached before tolerance " + std::to_string(hp.tol));
    }

    LinearParams params;
    params.weights.assign(theta.begin(), theta.begin() + static_cast<long>(d));
    params.bias = theta[d];
    params.use_platt = false;
    return params;
}

// Linear SVM with squared hinge loss and l2 penalty, fitted with a
// semi-smooth Newton iteration; the margin is then rescaled through a
// logistic fit on the training margins so the model exposes a probability.
LinearParams train_svm(const LabeledDataset& train, const Hyperparameters& hp,
                       std::vector<std::string>& log) {
    const std::size_t d = train.feature_count();
    const std::size_t dim = d + 1;
    const double cost = hp.svm_cost;

    std::vector<double> sw = hp.balanced ? balanced_weights(train)
                                         : std::vector<double>(train.size(), 1.0);
    std::vector<double> y(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        y[i] = train.sample(i).label == 1 ? 1.0 : -1.0;
    }

    std::vector<double> theta(dim, 0.0);
    auto objective = [&](const std::vector<double>& t) {
        double obj = 0.0;
        for (std::size_t f = 0; f < d; ++f) obj += 0.5 * t[f] * t[f];
        for (std::size_t i = 0; i < train.size(); ++i) {
            const LabeledSample& s = train.sample(i);
            double m = t[d];
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) m += t[f];
            }
            double slack = 1.0 - y[i] * m;
            if (slack > 0.0) obj += cost * sw[i] * slack * slack;
        }
        return obj;
    };

    bool converged = false;
    double obj = objective(theta);
    for (int iter = 0; iter < hp.max_iter; ++iter) {
        std::vector<double> grad(dim, 0.0);
        std::vector<double> hess(dim * dim, 0.0);
        for (std::size_t f = 0; f < d; ++f) {
            grad[f] = theta[f];
            hess[f * dim + f] = 1.0;
        }
        hess[d * dim + d] = 1e-9;

        for (std::size_t i = 0; i < train.size(); ++i) {
            const LabeledSample& s = train.sample(i);
            double m = theta[d];
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) m += theta[f];
            }
            double slack = 1.0 - y[i] * m;
            if (slack <= 0.0) continue;
            double g = -2.0 * cost * sw[i] * slack * y[i];
            double h = 2.0 * cost * sw[i];

            std::vector<std::size_t> on;
            for (std::size_t f = 0; f < d; ++f) {
                if (s.vector.bit(f)) on.push_back(f);
            }
            for (std::size_t a : on) {
                grad[a] += g;
                for (std::size_t b : on) hess[a * dim + b] += h;
                hess[a * dim + d] += h;
                hess[d * dim + a] += h;
            }
            grad[d] += g;
            hess[d * dim + d] += h;
        }

        if (inf_norm(grad) <= hp.tol) {
            converged = true;
            break;
        }

        std::vector<double> step = grad;
        if (!cholesky_solve(hess, step, dim)) {
            log.push_back("SVM: Hessian factorization failed, stopping early");
            break;
        }

        double alpha = 1.0;
        bool improved = false;
        for (int halving = 0; halving < 40; ++halving) {
            std::vector<double> candidate = theta;
            for (std::size_t j = 0; j < dim; ++j) candidate[j] -= alpha * step[j];
            double candidate_obj = objective(candidate);
            if (candidate_obj <= obj) {
                theta = std::move(candidate);
                obj = candidate_obj;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!improved) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        log.push_back("SVM: iteration cap " + std::to_string(hp.max_iter) +
                      " reached before tolerance " + std::to_string(hp.tol));
    }

    LinearParams params;
    params.weights.assign(theta.begin(), theta.begin() + static_cast<long>(d));
    params.bias = theta[d];
    params.use_platt = true;

    std::vector<double> margins(train.size());
    std::vector<int> labels(train.size());
    for (std::size_t i = 0; i < train.size(); ++i) {
        margins[i] = dot_margin(params.weights, params.bias, train.sample(i).vector);
        labels[i] = train.sample(i).label;
    }
    fit_platt(margins, labels, params.platt_scale, params.platt_offset);
    return params;
}

}  // namespace qevade::detail
