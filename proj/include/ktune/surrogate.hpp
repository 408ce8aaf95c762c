#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ktune {

// One node of a regression tree, stored flat; index 0 is the root.
// A numeric split routes encoded[feature] <= threshold to the left child; a
// category-subset split routes codes contained in `subset` left.
struct TreeNode {
    int feature = -1; // -1 marks a leaf
    bool subset_split = false;
    double threshold = 0.0;
    std::vector<int> subset; // sorted category codes routed left
    int left = -1;
    int right = -1;
    double value = 0.0; // leaf value
};

struct RegressionTree {
    std::vector<TreeNode> nodes;

    bool is_leaf_only() const { return nodes.size() == 1 && nodes[0].feature < 0; }
    double predict(const std::vector<double>& x) const;
};

enum class Loss { L2, L1 };

struct TrainConfig {
    int n_trees = 400;
    int max_depth = 8;
    int min_leaf = 5;
    double learning_rate = 0.1;
    Loss loss = Loss::L2;
    std::uint64_t rng_seed = 0; // reserved; exact greedy fitting is deterministic

    void validate() const;
};

// Additive ensemble: predict(x) = base_score + learning_rate * sum of trees.
struct GbdtModel {
    double base_score = 0.0;
    double learning_rate = 0.1;
    std::size_t n_features = 0;
    std::vector<int> categorical_features; // sorted feature indices
    std::vector<RegressionTree> trees;
    std::vector<double> stage_train_loss; // training loss after each stage

    double predict(const std::vector<double>& x,
                   std::size_t use_trees = std::numeric_limits<std::size_t>::max()) const;
    std::vector<double> predict_batch(const std::vector<std::vector<double>>& rows) const;
};

// Rows of encoded configurations plus objectives.
struct Dataset {
    std::vector<std::vector<double>> rows;
    std::vector<double> targets;
    std::vector<int> categorical_features;
};

// Stagewise gradient boosting with exact greedy CART splits. Residual targets
// are the negative loss gradients (L2: y - yhat, L1: sign(y - yhat)); leaf
// values are the mean residual for L2 and the median residual for L1.
// Categorical features are split by ordering categories on their mean residual
// and scanning that order. All-equal targets produce a zero-tree model.
GbdtModel fit(const Dataset& data, const TrainConfig& config);

struct Metrics {
    double mae = 0.0;
    double rmse = 0.0;
    double mape = 0.0;
    std::size_t mape_excluded = 0; // zero-truth rows skipped by MAPE
};

Metrics metrics(const std::vector<double>& predictions, const std::vector<double>& truths);

// Self-describing text document; reals carry 17 significant digits so the
// round-trip is bit-exact.
std::string serialize(const GbdtModel& model);
GbdtModel deserialize_model(const std::string& text);

void save_model(const GbdtModel& model, const std::string& path);
GbdtModel load_model(const std::string& path);

} // namespace ktune
