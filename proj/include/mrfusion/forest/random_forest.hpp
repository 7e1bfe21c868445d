#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mrfusion/nn/tensor.hpp"

namespace mrfusion::forest {

using nn::Tensor;

struct ForestConfig {
    std::size_t n_trees = 400;
    std::optional<std::size_t> max_depth;  // unlimited when empty
    std::size_t min_leaf = 1;
    std::size_t features_per_split = 0;  // 0: round(sqrt(features))
    bool bootstrap = true;               // resample n of n with replacement per tree
    std::uint64_t seed = 0;

    void validate() const;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    float threshold = 0.0f;     // x[feature] <= threshold goes left
    std::uint32_t left = 0, right = 0;
    std::uint32_t leaf = 0;  // leaf index into the histogram table

    friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

struct DecisionTree {
    std::vector<TreeNode> nodes;       // root at 0
    std::vector<std::uint32_t> hists;  // num_classes counts per leaf

    std::size_t leaf_count(std::size_t num_classes) const { return hists.size() / num_classes; }
    friend bool operator==(const DecisionTree&, const DecisionTree&) = default;
};

struct ForestPrediction {
    std::vector<std::int32_t> labels;  // 1-based
    Tensor<double> proba;              // samples x num_classes vote fractions
};

/// CART forest with Gini splits over a random subset of candidate features.
class RandomForest {
public:
    /// X is samples x features, y holds 1-based labels in 1..num_classes.
    /// A single-class y yields a constant predictor flagged as degenerate.
    static RandomForest fit(const Tensor<float>& X, const std::vector<std::int32_t>& y, std::size_t num_classes,
                            const ForestConfig& config);

    ForestPrediction predict(const Tensor<float>& X) const;

    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t num_features() const noexcept { return num_features_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    bool degenerate() const noexcept { return degenerate_; }

    // Binary format: magic "MRRF1", u64 classes, features, degenerate flag
    // and tree count, then per tree its node array and leaf histograms.
    void save(const std::string& path) const;
    static RandomForest load(const std::string& path);

    friend bool operator==(const RandomForest&, const RandomForest&) = default;

private:
    std::size_t num_classes_ = 0;
    std::size_t num_features_ = 0;
    std::vector<DecisionTree> trees_;
    bool degenerate_ = false;
};

}  // namespace mrfusion::forest
