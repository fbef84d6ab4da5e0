#pragma once

#include <cstdint>
#include <vector>

#include "qevade/dataset.hpp"

namespace qevade {

class Rng;

/// Binary-feature tree node. Internal nodes route bit==0 left and bit==1
/// right; leaves carry class weights (classification) or a value
/// (regression). Class weights are kept on internal nodes too so impurity
/// based feature importance can be recovered from the structure alone.
struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    std::int32_t left = -1;
    std::int32_t right = -1;
    double w0 = 0.0;  // benign weight reaching the node
    double w1 = 0.0;  // malware weight reaching the node
    double value = 0.0;  // regression leaf value
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& leaf_for(const PermissionVector& x) const;
    double benign_fraction(const PermissionVector& x) const;
    double regression_value(const PermissionVector& x) const;
    int depth() const;
};

/// Benign probability of a leaf: exact 0/1 for pure leaves, Laplace-smoothed
/// (+1 per class) class fraction for mixed ones.
double leaf_benign_probability(const TreeNode& leaf);

struct TreeGrowth {
    int max_depth = 0;          // 0 = unlimited
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    int max_features = 0;       // 0 = all; otherwise per-node random subset size
    bool random_threshold = false;  // extra-trees style split draw
};

/// Grows a CART classification tree (Gini impurity) over the given sample
/// indices (repeats express bootstrap draws). `weights` are per dataset index
/// and may be empty for uniform weighting. `rng` is only consulted when
/// growth.max_features > 0 or growth.random_threshold is set.
Tree grow_classification_tree(const LabeledDataset& data,
                              const std::vector<std::size_t>& sample_indices,
                              const std::vector<double>& weights,
                              const TreeGrowth& growth, Rng* rng);

/// Grows a regression tree on residual targets using the Friedman MSE
/// improvement criterion. Leaf values are the Newton step
/// sum(targets) / sum(hessians).
Tree grow_regression_tree(const LabeledDataset& data,
                          const std::vector<double>& targets,
                          const std::vector<double>& hessians,
                          const TreeGrowth& growth);

}  // namespace qevade
