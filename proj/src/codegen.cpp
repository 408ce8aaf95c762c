#include "ktune/codegen.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "ktune/detail/split.hpp"
#include "ktune/util.hpp"

namespace ktune {

double DecisionTreeModel::predict_raw(const std::vector<double>& encoded_input) const {
    int i = 0;
    for (;;) {
        const DtNode& node = nodes[static_cast<std::size_t>(i)];
        if (node.feature < 0) return node.value;
        i = encoded_input[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                                    : node.right;
    }
}

int DecisionTreeModel::depth() const {
    std::function<int(int)> walk = [&](int i) -> int {
        const DtNode& node = nodes[static_cast<std::size_t>(i)];
        if (node.feature < 0) return 0;
        return 1 + std::max(walk(node.left), walk(node.right));
    };
    return nodes.empty() ? 0 : walk(0);
}

namespace {

struct GiniSplit {
    bool valid = false;
    double threshold = 0.0;
    double gain = 0.0;
};

// Weighted Gini impurity decrease, scanning midpoints between distinct values.
GiniSplit best_gini_split(std::vector<std::pair<double, int>>& pairs, int n_classes) {
    GiniSplit best;
    const std::size_t n = pairs.size();
    if (n < 2) return best;
    std::sort(pairs.begin(), pairs.end());

    std::vector<double> total_counts(static_cast<std::size_t>(n_classes), 0.0);
    for (const auto& p : pairs) total_counts[static_cast<std::size_t>(p.second)] += 1.0;

    auto gini_from = [](const std::vector<double>& counts, double n_side) {
        double acc = 0.0;
        for (double c : counts) acc += c * c;
        return 1.0 - acc / (n_side * n_side);
    };
    const double parent_gini = gini_from(total_counts, static_cast<double>(n));

    std::vector<double> left_counts(static_cast<std::size_t>(n_classes), 0.0);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        left_counts[static_cast<std::size_t>(pairs[i].second)] += 1.0;
        if (pairs[i].first == pairs[i + 1].first) continue;
        const double nl = static_cast<double>(i + 1);
        const double nr = static_cast<double>(n) - nl;
        std::vector<double> right_counts(total_counts);
        for (std::size_t c = 0; c < right_counts.size(); ++c) right_counts[c] -= left_counts[c];
        const double child =
            (nl * gini_from(left_counts, nl) + nr * gini_from(right_counts, nr)) /
            static_cast<double>(n);
        const double gain = parent_gini - child;
        if (gain > best.gain) {
            best.valid = true;
            best.gain = gain;
            best.threshold = pairs[i].first + 0.5 * (pairs[i + 1].first - pairs[i].first);
        }
    }
    return best;
}

class DtBuilder {
public:
    DtBuilder(const std::vector<std::vector<double>>& rows, const std::vector<double>& targets,
              bool classifier, int n_classes, int max_depth)
        : rows_(rows),
          targets_(targets),
          classifier_(classifier),
          n_classes_(n_classes),
          max_depth_(max_depth) {}

    DecisionTreeModel build(const std::string& target_name) {
        DecisionTreeModel tree;
        tree.target = target_name;
        tree.classifier = classifier_;
        tree.max_depth = max_depth_;
        std::vector<std::size_t> all(rows_.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        grow(tree, all, 0);
        return tree;
    }

private:
    int grow(DecisionTreeModel& tree, const std::vector<std::size_t>& idx, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        bool found = false;
        int best_feature = -1;
        double best_threshold = 0.0, best_gain = 0.0;
        if (depth < max_depth_ && idx.size() >= 2 && !pure(idx)) {
            const std::size_t n_feat = rows_[0].size();
            for (std::size_t f = 0; f < n_feat; ++f) {
                if (classifier_) {
                    std::vector<std::pair<double, int>> pairs;
                    pairs.reserve(idx.size());
                    for (std::size_t i : idx)
                        pairs.emplace_back(rows_[i][f], static_cast<int>(targets_[i]));
                    auto split = best_gini_split(pairs, n_classes_);
                    if (split.valid && split.gain > best_gain) {
                        found = true;
                        best_feature = static_cast<int>(f);
                        best_threshold = split.threshold;
                        best_gain = split.gain;
                    }
                } else {
                    std::vector<std::pair<double, double>> pairs;
                    pairs.reserve(idx.size());
                    for (std::size_t i : idx) pairs.emplace_back(rows_[i][f], targets_[i]);
                    auto split = detail::best_numeric_split(pairs, 1);
                    if (split.valid && split.gain > best_gain) {
                        found = true;
                        best_feature = static_cast<int>(f);
                        best_threshold = split.threshold;
                        best_gain = split.gain;
                    }
                }
            }
        }

        if (!found) {
            tree.nodes[static_cast<std::size_t>(node_id)].value = leaf_value(idx);
            return node_id;
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx)
            (rows_[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? left_idx
                                                                                : right_idx)
                .push_back(i);
        const int left_id = grow(tree, left_idx, depth + 1);
        const int right_id = grow(tree, right_idx, depth + 1);
        DtNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }

    bool pure(const std::vector<std::size_t>& idx) const {
        for (std::size_t i = 1; i < idx.size(); ++i)
            if (targets_[idx[i]] != targets_[idx[0]]) return false;
        return true;
    }

    double leaf_value(const std::vector<std::size_t>& idx) const {
        if (classifier_) {
            std::vector<std::size_t> counts(static_cast<std::size_t>(n_classes_), 0);
            for (std::size_t i : idx) ++counts[static_cast<std::size_t>(targets_[i])];
            std::size_t best = 0;
            for (std::size_t c = 1; c < counts.size(); ++c)
                if (counts[c] > counts[best]) best = c; // ties keep the lowest code
            return static_cast<double>(best);
        }
        std::vector<double> vals;
        vals.reserve(idx.size());
        for (std::size_t i : idx) vals.push_back(targets_[i]);
        return detail::canonical_mean(std::move(vals));
    }

    const std::vector<std::vector<double>>& rows_;
    const std::vector<double>& targets_;
    bool classifier_;
    int n_classes_;
    int max_depth_;
};

} // namespace

TuningTrees build_trees(const std::vector<OptimizedPoint>& points, const ParameterSpace& space,
                        int max_depth) {
    if (points.empty()) throw ConfigError("build_trees: empty point list");
    if (max_depth < 1) throw ConfigError("build_trees: max_depth must be >= 1");

    std::vector<std::vector<double>> rows;
    rows.reserve(points.size());
    for (const auto& p : points)
        rows.push_back(encode_subspace(space, space.input_dims(), p.input_values));

    TuningTrees out;
    const auto& design_dims = space.design_dims();
    for (std::size_t j = 0; j < design_dims.size(); ++j) {
        const auto& spec = space.param(design_dims[j]);
        std::vector<double> targets;
        targets.reserve(points.size());
        for (const auto& p : points) {
            if (p.design_values.size() != design_dims.size())
                throw ConfigError("build_trees: point design values do not match the space");
            targets.push_back(value_to_number(spec, p.design_values[j]));
        }
        const bool classifier = !spec.is_numeric();
        DtBuilder builder(rows, targets, classifier,
                          classifier ? static_cast<int>(spec.categories.size()) : 0, max_depth);
        out.trees.push_back(builder.build(spec.name));
    }
    return out;
}

std::vector<Value> predict_config(const TuningTrees& trees, const ParameterSpace& space,
                                  const std::vector<Value>& input_values) {
    const auto& design_dims = space.design_dims();
    if (trees.trees.size() != design_dims.size())
        throw ConfigError("predict_config: trees do not cover the design parameters");
    auto encoded = encode_subspace(space, space.input_dims(), input_values);

    std::vector<Value> out;
    out.reserve(design_dims.size());
    for (std::size_t j = 0; j < design_dims.size(); ++j) {
        const auto& spec = space.param(design_dims[j]);
        const double raw = trees.trees[j].predict_raw(encoded);
        switch (spec.kind) {
            case ParamKind::Real:
                out.emplace_back(std::clamp(raw, spec.low, spec.high));
                break;
            case ParamKind::Integer:
                out.emplace_back(static_cast<long long>(
                    std::clamp(round_half_even(raw), spec.low, spec.high)));
                break;
            default: {
                const double code = std::clamp(round_half_even(raw), 0.0,
                                               static_cast<double>(spec.categories.size() - 1));
                out.emplace_back(spec.categories[static_cast<std::size_t>(code)]);
            }
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// C emission
// -----------------------------------------------------------------------------

namespace {

std::string sanitize_identifier(const std::string& name) {
    std::string out;
    for (char c : name)
        out.push_back(std::isalnum(static_cast<unsigned char>(c)) ? c : '_');
    if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0]))) out.insert(out.begin(), '_');
    return out;
}

// Leaf constants are emitted after the same rounding/clamping predict_config
// applies, so the compiled function and predict_config agree bit-exactly.
std::string leaf_constant(const ParameterSpec& spec, double raw) {
    switch (spec.kind) {
        case ParamKind::Real:
            return format_g17(std::clamp(raw, spec.low, spec.high));
        case ParamKind::Integer:
            return format_g17(std::clamp(round_half_even(raw), spec.low, spec.high));
        default:
            return format_g17(std::clamp(round_half_even(raw), 0.0,
                                         static_cast<double>(spec.categories.size() - 1)));
    }
}

void emit_node(std::ostringstream& out, const DecisionTreeModel& tree, const ParameterSpec& spec,
               int node_id, int indent) {
    const DtNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
    const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
    if (node.feature < 0) {
        out << pad << "return " << leaf_constant(spec, node.value) << ";\n";
        return;
    }
    out << pad << "if (x" << node.feature << " <= " << format_g17(node.threshold) << ") {\n";
    emit_node(out, tree, spec, node.left, indent + 1);
    out << pad << "} else {\n";
    emit_node(out, tree, spec, node.right, indent + 1);
    out << pad << "}\n";
}

} // namespace

std::string emit_c(const TuningTrees& trees, const ParameterSpace& space,
                   const std::string& symbol_prefix) {
    const auto& input_dims = space.input_dims();
    const auto& design_dims = space.design_dims();
    if (trees.trees.size() != design_dims.size())
        throw ConfigError("emit_c: trees do not cover the design parameters");

    std::ostringstream out;
    out << "/* Tuning decision functions. Generated file, do not edit.\n";
    out << " *\n";
    out << " * Arguments, in order:\n";
    for (std::size_t a = 0; a < input_dims.size(); ++a) {
        const auto& p = space.param(input_dims[a]);
        out << " *   x" << a << " = " << p.name;
        if (p.is_numeric()) {
            out << " (" << to_string(p.kind) << " in [" << format_g17(p.low) << ", "
                << format_g17(p.high) << "])";
        } else {
            out << " (pass the category code: ";
            for (std::size_t c = 0; c < p.categories.size(); ++c)
                out << (c ? ", " : "") << c << "=" << p.categories[c];
            out << ")";
        }
        out << "\n";
    }
    bool any_cat_output = false;
    for (std::size_t dim : design_dims)
        if (!space.param(dim).is_numeric()) any_cat_output = true;
    if (any_cat_output) {
        out << " *\n * Categorical outputs return the category code:\n";
        for (std::size_t dim : design_dims) {
            const auto& p = space.param(dim);
            if (p.is_numeric()) continue;
            out << " *   " << p.name << ": ";
            for (std::size_t c = 0; c < p.categories.size(); ++c)
                out << (c ? ", " : "") << c << "=" << p.categories[c];
            out << "\n";
        }
    }
    out << " */\n\n";

    std::string args;
    for (std::size_t a = 0; a < input_dims.size(); ++a) {
        if (a) args += ", ";
        args += "double x" + std::to_string(a);
    }

    std::set<std::string> used;
    for (std::size_t j = 0; j < design_dims.size(); ++j) {
        const auto& spec = space.param(design_dims[j]);
        const std::string fn = sanitize_identifier(symbol_prefix + "_" + spec.name);
        if (!used.insert(fn).second)
            throw ConfigError("emit_c: sanitized identifier collision on '" + fn + "'");
        out << "double " << fn << "(" << args << ") {\n";
        emit_node(out, trees.trees[j], spec, 0, 1);
        out << "}\n";
        if (j + 1 < design_dims.size()) out << "\n";
    }
    return out.str();
}

// -----------------------------------------------------------------------------
// Expert merge
// -----------------------------------------------------------------------------

MergeOutcome expert_merge(const std::vector<std::vector<Value>>& inputs,
                          const TuningTrees& candidate,
                          const std::vector<std::vector<Value>>& reference_designs,
                          const Kernel& kernel, const ParameterSpace& space,
                          const EvalOptions& opts, unsigned jobs) {
    if (inputs.empty()) throw ConfigError("expert_merge: no inputs");
    if (reference_designs.size() != inputs.size())
        throw ConfigError("expert_merge: reference must cover every input (" +
                          std::to_string(reference_designs.size()) + " of " +
                          std::to_string(inputs.size()) + " given)");

    std::vector<Configuration> to_measure;
    std::vector<std::vector<Value>> cand_designs;
    to_measure.reserve(2 * inputs.size());
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        cand_designs.push_back(predict_config(candidate, space, inputs[i]));
        to_measure.push_back(combine(space, inputs[i], cand_designs[i]));
        to_measure.push_back(combine(space, inputs[i], reference_designs[i]));
    }
    auto records = evaluate_batch(kernel, space, to_measure, jobs, opts);

    MergeOutcome outcome;
    std::vector<OptimizedPoint> labels;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const auto& cand = records[2 * i];
        const auto& ref = records[2 * i + 1];
        MergeOutcome::Row row;
        row.input_values = inputs[i];
        row.candidate_design = cand_designs[i];
        row.reference_design = reference_designs[i];
        row.candidate_objective = cand.objective;
        row.reference_objective = ref.objective;

        const bool cand_ok =
            cand.status == SampleStatus::Ok || cand.status == SampleStatus::Clipped;
        const bool ref_ok = ref.status == SampleStatus::Ok || ref.status == SampleStatus::Clipped;
        if (!cand_ok && !ref_ok) {
            row.dropped = true;
            ++outcome.dropped;
            outcome.rows.push_back(std::move(row));
            continue;
        }
        // ties keep the incumbent reference
        row.candidate_won = cand_ok && (!ref_ok || cand.objective < ref.objective);
        OptimizedPoint label;
        label.input_values = inputs[i];
        label.design_values = row.candidate_won ? cand_designs[i] : reference_designs[i];
        label.predicted_objective = row.candidate_won ? cand.objective : ref.objective;
        labels.push_back(std::move(label));
        outcome.rows.push_back(std::move(row));
    }
    if (labels.empty()) throw std::runtime_error("expert_merge: every input failed to measure");

    const int depth = candidate.trees.empty() ? 8 : candidate.trees[0].max_depth;
    outcome.merged = build_trees(labels, space, depth);
    return outcome;
}

// -----------------------------------------------------------------------------
// Serialization
// -----------------------------------------------------------------------------

std::string serialize(const TuningTrees& trees) {
    std::ostringstream out;
    out << "ktune-trees 1\n";
    out << "n_trees " << trees.trees.size() << "\n";
    for (const auto& t : trees.trees) {
        out << "target " << t.target << " " << (t.classifier ? "classifier" : "regressor")
            << " depth " << t.max_depth << " nodes " << t.nodes.size() << "\n";
        for (const auto& node : t.nodes) {
            if (node.feature < 0)
                out << "L " << format_g17(node.value) << "\n";
            else
                out << "S " << node.feature << " " << format_g17(node.threshold) << " "
                    << node.left << " " << node.right << "\n";
        }
    }
    out << "end\n";
    return out.str();
}

TuningTrees deserialize_trees(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "ktune-trees")
        throw ConfigError("trees document: bad magic");
    if (version != 1)
        throw ConfigError("trees document: unsupported version " + std::to_string(version));

    std::string key;
    std::size_t n_trees = 0;
    if (!(in >> key >> n_trees) || key != "n_trees")
        throw ConfigError("trees document: expected n_trees");

    TuningTrees out;
    for (std::size_t t = 0; t < n_trees; ++t) {
        DecisionTreeModel tree;
        std::string kind, tag;
        std::size_t n_nodes = 0;
        if (!(in >> key >> tree.target >> kind >> tag >> tree.max_depth) || key != "target" ||
            tag != "depth")
            throw ConfigError("trees document: malformed tree header");
        if (kind == "classifier")
            tree.classifier = true;
        else if (kind != "regressor")
            throw ConfigError("trees document: unknown tree kind '" + kind + "'");
        if (!(in >> tag >> n_nodes) || tag != "nodes")
            throw ConfigError("trees document: malformed tree header");
        tree.nodes.resize(n_nodes);
        for (auto& node : tree.nodes) {
            if (!(in >> tag)) throw ConfigError("trees document: truncated");
            if (tag == "L") {
                std::string v;
                if (!(in >> v)) throw ConfigError("trees document: truncated leaf");
                node.value = parse_double(v, "leaf value");
            } else if (tag == "S") {
                std::string th;
                if (!(in >> node.feature >> th >> node.left >> node.right))
                    throw ConfigError("trees document: truncated split");
                node.threshold = parse_double(th, "threshold");
                if (node.left < 0 || node.right < 0 ||
                    node.left >= static_cast<int>(n_nodes) ||
                    node.right >= static_cast<int>(n_nodes))
                    throw ConfigError("trees document: child index out of range");
            } else {
                throw ConfigError("trees document: unknown node tag '" + tag + "'");
            }
        }
        out.trees.push_back(std::move(tree));
    }
    if (!(in >> key) || key != "end") throw ConfigError("trees document: missing end marker");
    return out;
}

void save_trees(const TuningTrees& trees, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << serialize(trees);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

TuningTrees load_trees(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trees document '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_trees(buf.str());
}

} // namespace ktune
