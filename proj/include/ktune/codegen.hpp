#pragma once

#include <string>
#include <vector>

#include "ktune/driver.hpp"
#include "ktune/optimize.hpp"
#include "ktune/space.hpp"

namespace ktune {

// Node of a tuning decision tree. Splits reference input dimensions only
// (indices into input_dims order) and always use numeric thresholds;
// `encoded_input[feature] <= threshold` goes left.
struct DtNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0; // regressor leaf value, or classifier label code
};

// One tree per design parameter: a regressor for numeric targets, a
// classifier (majority label leaves) for categorical ones.
struct DecisionTreeModel {
    std::string target;
    bool classifier = false;
    int max_depth = 8;
    std::vector<DtNode> nodes;

    // Raw tree output for an encoded input point: numeric value or label code.
    double predict_raw(const std::vector<double>& encoded_input) const;
    int depth() const;
};

struct TuningTrees {
    std::vector<DecisionTreeModel> trees; // one per design parameter, space order
};

// Fits one CART per design parameter on (input values -> optimized design
// value): variance-reduction splits for numeric targets, Gini for categorical,
// midpoint thresholds, min_leaf 1, ties broken by lowest input index then
// lowest threshold.
TuningTrees build_trees(const std::vector<OptimizedPoint>& points, const ParameterSpace& space,
                        int max_depth = 8);

// Total on any input point: combines all tree outputs into a design
// configuration, rounding integer kinds half-to-even and clamping to bounds.
std::vector<Value> predict_config(const TuningTrees& trees, const ParameterSpace& space,
                                  const std::vector<Value>& input_values);

// Emits one pure C function per design parameter,
// `double <prefix>_<param>(double x0, ..)`, nested if/else on thresholds
// printed with 17 significant digits. Categorical functions return the
// category ordinal; the header comment documents argument order and code
// tables. Compiled output agrees with predict_config everywhere.
std::string emit_c(const TuningTrees& trees, const ParameterSpace& space,
                   const std::string& symbol_prefix);

struct MergeOutcome {
    struct Row {
        std::vector<Value> input_values;
        std::vector<Value> candidate_design;
        std::vector<Value> reference_design;
        double candidate_objective = 0.0;
        double reference_objective = 0.0;
        bool candidate_won = false;
        bool dropped = false; // both measurements failed
    };
    TuningTrees merged;
    std::vector<Row> rows;
    std::size_t dropped = 0;
};

// Pointwise best-of between the candidate trees' decisions and a per-input
// reference configuration, measured with the driver (ties keep the
// reference); the winning labels retrain the trees.
MergeOutcome expert_merge(const std::vector<std::vector<Value>>& inputs,
                          const TuningTrees& candidate,
                          const std::vector<std::vector<Value>>& reference_designs,
                          const Kernel& kernel, const ParameterSpace& space,
                          const EvalOptions& opts, unsigned jobs = 1);

// Canonical versioned text document; serializing twice yields identical bytes.
std::string serialize(const TuningTrees& trees);
TuningTrees deserialize_trees(const std::string& text);

void save_trees(const TuningTrees& trees, const std::string& path);
TuningTrees load_trees(const std::string& path);

} // namespace ktune
