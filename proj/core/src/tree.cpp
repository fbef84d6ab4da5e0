#include "qevade/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qevade/errors.hpp"
#include "qevade/rng.hpp"

namespace qevade {

namespace {

constexpr double kMinGain = 1e-12;

double gini(double w0, double w1) {
    double w = w0 + w1;
    if (w <= 0.0) return 0.0;
    double p0 = w0 / w;
    double p1 = w1 / w;
    return 1.0 - p0 * p0 - p1 * p1;
}

// Candidate features for one node: all of them, or a seeded random subset.
std::vector<std::size_t> candidate_features(std::size_t n_features, int max_features,
                                            Rng* rng) {
    std::vector<std::size_t> all(n_features);
    std::iota(all.begin(), all.end(), std::size_t{0});
    if (max_features <= 0 || static_cast<std::size_t>(max_features) >= n_features) {
        return all;
    }
    // partial Fisher-Yates, then sorted so tie-breaks stay index-ordered
    for (std::size_t i = 0; i < static_cast<std::size_t>(max_features); ++i) {
        std::size_t j = i + rng->uniform_below(n_features - i);
        std::swap(all[i], all[j]);
    }
    all.resize(static_cast<std::size_t>(max_features));
    std::sort(all.begin(), all.end());
    return all;
}

struct ClassSplit {
    std::size_t feature = 0;
    double gain = -1.0;
    double w0_left = 0.0, w1_left = 0.0;
    std::size_t n_left = 0;
};

class ClassificationGrower {
public:
    ClassificationGrower(const LabeledDataset& data, const std::vector<double>& weights,
                         const TreeGrowth& growth, Rng* rng)
        : data_(data), weights_(weights), growth_(growth), rng_(rng) {}

    Tree grow(const std::vector<std::size_t>& indices) {
        Tree tree;
        build(tree, indices, 0);
        return tree;
    }

private:
    double weight_of(std::size_t sample) const {
        return weights_.empty() ? 1.0 : weights_[sample];
    }

    std::int32_t build(Tree& tree, const std::vector<std::size_t>& indices, int depth) {
        double w0 = 0.0, w1 = 0.0;
        for (std::size_t i : indices) {
            (data_.sample(i).label == 0 ? w0 : w1) += weight_of(i);
        }

        std::int32_t node_index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back({-1, -1, -1, w0, w1, 0.0});

        bool pure = (w0 <= 0.0 || w1 <= 0.0);
        bool at_depth = growth_.max_depth > 0 && depth >= growth_.max_depth;
        bool too_small = indices.size() < static_cast<std::size_t>(growth_.min_samples_split);
        if (pure || at_depth || too_small) return node_index;

        // an impure node splits on the best candidate even at zero gain
        // (xor-like label structure needs the zero-gain step to separate),
        // so only the absence of any valid split makes a leaf
        ClassSplit best = find_split(indices, w0, w1);
        if (best.gain < 0.0) return node_index;

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(best.n_left);
        right_idx.reserve(indices.size() - best.n_left);
        for (std::size_t i : indices) {
            (data_.sample(i).vector.bit(best.feature) == 0 ? left_idx : right_idx)
                .push_back(i);
        }

        std::int32_t left = build(tree, left_idx, depth + 1);
        std::int32_t right = build(tree, right_idx, depth + 1);
        tree.nodes[node_index].feature = static_cast<std::int32_t>(best.feature);
        tree.nodes[node_index].left = left;
        tree.nodes[node_index].right = right;
        return node_index;
    }

    ClassSplit find_split(const std::vector<std::size_t>& indices, double w0,
                          double w1) const {
        double w_total = w0 + w1;
        double parent_gini = gini(w0, w1);

        ClassSplit best;
        for (std::size_t f : candidate_features(data_.feature_count(),
                                                growth_.max_features, rng_)) {
            double w0_left = 0.0, w1_left = 0.0;
            std::size_t n_left = 0;
            for (std::size_t i : indices) {
                if (data_.sample(i).vector.bit(f) == 0) {
                    (data_.sample(i).label == 0 ? w0_left : w1_left) += weight_of(i);
                    ++n_left;
                }
            }
            std::size_t n_right = indices.size() - n_left;
            if (n_left < static_cast<std::size_t>(growth_.min_samples_leaf) ||
                n_right < static_cast<std::size_t>(growth_.min_samples_leaf)) {
                continue;
            }
            double w_left = w0_left + w1_left;
            double w_right = w_total - w_left;
            if (w_left <= 0.0 || w_right <= 0.0) continue;

            if (growth_.random_threshold) {
                // a draw in (0, 1) always lands between the two binary values
                rng_->uniform();
            }

            double w0_right = w0 - w0_left;
            double w1_right = w1 - w1_left;
            double gain = parent_gini -
                          (w_left / w_total) * gini(w0_left, w1_left) -
                          (w_right / w_total) * gini(w0_right, w1_right);
            // features are scanned in ascending order, so requiring a strict
            // improvement breaks ties toward the lowest feature index
            if (gain > best.gain + kMinGain) {
                best = {f, gain, w0_left, w1_left, n_left};
            }
        }
        return best;
    }

    const LabeledDataset& data_;
    const std::vector<double>& weights_;
    const TreeGrowth& growth_;
    Rng* rng_;
};

class RegressionGrower {
public:
    RegressionGrower(const LabeledDataset& data, const std::vector<double>& targets,
                     const std::vector<double>& hessians, const TreeGrowth& growth)
        : data_(data), targets_(targets), hessians_(hessians), growth_(growth) {}

    Tree grow(const std::vector<std::size_t>& indices) {
        Tree tree;
        build(tree, indices, 0);
        return tree;
    }

private:
    std::int32_t build(Tree& tree, const std::vector<std::size_t>& indices, int depth) {
        double sum_t = 0.0, sum_h = 0.0;
        for (std::size_t i : indices) {
            sum_t += targets_[i];
            sum_h += hessians_[i];
        }
        double leaf_value = sum_t / std::max(sum_h, 1e-10);

        std::int32_t node_index = static_cast<std::int32_t>(tree.nodes.size());
        tree.nodes.push_back(
            {-1, -1, -1, static_cast<double>(indices.size()), 0.0, leaf_value});

        bool at_depth = growth_.max_depth > 0 && depth >= growth_.max_depth;
        bool too_small = indices.size() < static_cast<std::size_t>(growth_.min_samples_split);
        if (at_depth || too_small) return node_index;

        // Friedman improvement: (nL*nR/(nL+nR)) * (meanL - meanR)^2
        std::size_t best_feature = 0;
        double best_improvement = -1.0;
        for (std::size_t f = 0; f < data_.feature_count(); ++f) {
            double sum_left = 0.0;
            std::size_t n_left = 0;
            for (std::size_t i : indices) {
                if (data_.sample(i).vector.bit(f) == 0) {
                    sum_left += targets_[i];
                    ++n_left;
                }
            }
            std::size_t n_right = indices.size() - n_left;
            if (n_left < static_cast<std::size_t>(growth_.min_samples_leaf) ||
                n_right < static_cast<std::size_t>(growth_.min_samples_leaf)) {
                continue;
            }
            double mean_left = sum_left / static_cast<double>(n_left);
            double mean_right = (sum_t - sum_left) / static_cast<double>(n_right);
            double diff = mean_left - mean_right;
            double improvement = diff * diff * static_cast<double>(n_left) *
                                 static_cast<double>(n_right) /
                                 static_cast<double>(indices.size());
            if (improvement > best_improvement + kMinGain) {
                best_improvement = improvement;
                best_feature = f;
            }
        }
        if (best_improvement <= kMinGain) return node_index;

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : indices) {
            (data_.sample(i).vector.bit(best_feature) == 0 ? left_idx : right_idx)
                .push_back(i);
        }
        std::int32_t left = build(tree, left_idx, depth + 1);
        std::int32_t right = build(tree, right_idx, depth + 1);
        tree.nodes[node_index].feature = static_cast<std::int32_t>(best_feature);
        tree.nodes[node_index].left = left;
        tree.nodes[node_index].right = right;
        return node_index;
    }

    const LabeledDataset& data_;
    const std::vector<double>& targets_;
    const std::vector<double>& hessians_;
    const TreeGrowth& growth_;
};

}  // namespace

const TreeNode& Tree::leaf_for(const PermissionVector& x) const {
    if (nodes.empty()) throw Error("empty tree");
    std::size_t index = 0;
    for (;;) {
        const TreeNode& node = nodes[index];
        if (node.feature < 0) return node;
        index = static_cast<std::size_t>(
            x.bit(static_cast<std::size_t>(node.feature)) == 0 ? node.left : node.right);
    }
}

double Tree::benign_fraction(const PermissionVector& x) const {
    return leaf_benign_probability(leaf_for(x));
}

double Tree::regression_value(const PermissionVector& x) const {
    return leaf_for(x).value;
}

int Tree::depth() const {
    if (nodes.empty()) return 0;
    // depth of node i computed iteratively; parents precede children
    std::vector<int> depth_of(nodes.size(), 0);
    int max_depth = 0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const TreeNode& node = nodes[i];
        if (node.feature < 0) continue;
        depth_of[static_cast<std::size_t>(node.left)] = depth_of[i] + 1;
        depth_of[static_cast<std::size_t>(node.right)] = depth_of[i] + 1;
        max_depth = std::max(max_depth, depth_of[i] + 1);
    }
    return max_depth;
}

double leaf_benign_probability(const TreeNode& leaf) {
    if (leaf.w1 <= 0.0 && leaf.w0 <= 0.0) return 0.5;
    if (leaf.w1 <= 0.0) return 1.0;
    if (leaf.w0 <= 0.0) return 0.0;
    return (leaf.w0 + 1.0) / (leaf.w0 + leaf.w1 + 2.0);
}

Tree grow_classification_tree(const LabeledDataset& data,
                              const std::vector<std::size_t>& sample_indices,
                              const std::vector<double>& weights,
                              const TreeGrowth& growth, Rng* rng) {
    if (sample_indices.empty()) throw Error("cannot grow a tree on zero samples");
    if ((growth.max_features > 0 || growth.random_threshold) && rng == nullptr) {
        throw Error("randomized tree growth requires an rng");
    }
    return ClassificationGrower(data, weights, growth, rng).grow(sample_indices);
}

Tree grow_regression_tree(const LabeledDataset& data,
                          const std::vector<double>& targets,
                          const std::vector<double>& hessians,
                          const TreeGrowth& growth) {
    if (data.size() == 0) throw Error("cannot grow a tree on zero samples");
    std::vector<std::size_t> all(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    return RegressionGrower(data, targets, hessians, growth).grow(all);
}

}  // namespace qevade
