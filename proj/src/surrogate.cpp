#include "ktune/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ktune/detail/split.hpp"
#include "ktune/util.hpp"

namespace ktune {

double RegressionTree::predict(const std::vector<double>& x) const {
    int i = 0;
    for (;;) {
        const TreeNode& node = nodes[static_cast<std::size_t>(i)];
        if (node.feature < 0) return node.value;
        const double v = x[static_cast<std::size_t>(node.feature)];
        bool go_left;
        if (node.subset_split) {
            const int code = static_cast<int>(v);
            go_left = std::binary_search(node.subset.begin(), node.subset.end(), code);
        } else {
            go_left = v <= node.threshold;
        }
        i = go_left ? node.left : node.right;
    }
}

void TrainConfig::validate() const {
    if (n_trees < 1) throw ConfigError("surrogate: n_trees must be >= 1");
    if (max_depth < 1) throw ConfigError("surrogate: max_depth must be >= 1");
    if (min_leaf < 1) throw ConfigError("surrogate: min_leaf must be >= 1");
    if (!(learning_rate > 0.0 && learning_rate <= 1.0))
        throw ConfigError("surrogate: learning_rate must be in (0,1]");
}

double GbdtModel::predict(const std::vector<double>& x, std::size_t use_trees) const {
    if (x.size() != n_features)
        throw ConfigError("predict: input has " + std::to_string(x.size()) +
                          " features, model expects " + std::to_string(n_features));
    double acc = 0.0;
    const std::size_t limit = std::min(use_trees, trees.size());
    for (std::size_t t = 0; t < limit; ++t) acc += trees[t].predict(x);
    return base_score + learning_rate * acc;
}

std::vector<double> GbdtModel::predict_batch(const std::vector<std::vector<double>>& rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& row : rows) out.push_back(predict(row));
    return out;
}

namespace {

struct CandidateSplit {
    bool valid = false;
    int feature = -1;
    bool subset_split = false;
    double threshold = 0.0;
    std::vector<int> subset;
    double gain = 0.0;
};

class TreeBuilder {
public:
    TreeBuilder(const Dataset& data, const std::vector<double>& structure_targets,
                const std::vector<double>& leaf_targets, const TrainConfig& config)
        : data_(data),
          structure_(structure_targets),
          leaf_targets_(leaf_targets),
          config_(config),
          is_categorical_(data.rows.empty() ? 0 : data.rows[0].size(), false) {
        for (int f : data.categorical_features)
            is_categorical_[static_cast<std::size_t>(f)] = true;
    }

    RegressionTree build() {
        RegressionTree tree;
        std::vector<std::size_t> all(data_.rows.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        grow(tree, all, 0);
        return tree;
    }

private:
    int grow(RegressionTree& tree, const std::vector<std::size_t>& idx, int depth) {
        const int node_id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();

        CandidateSplit best;
        if (depth < config_.max_depth &&
            idx.size() >= 2 * static_cast<std::size_t>(config_.min_leaf))
            best = find_best_split(idx);

        if (!best.valid) {
            tree.nodes[static_cast<std::size_t>(node_id)].value = leaf_value(idx);
            return node_id;
        }

        std::vector<std::size_t> left_idx, right_idx;
        left_idx.reserve(idx.size());
        right_idx.reserve(idx.size());
        for (std::size_t i : idx) {
            const double v = data_.rows[i][static_cast<std::size_t>(best.feature)];
            bool go_left;
            if (best.subset_split)
                go_left = std::binary_search(best.subset.begin(), best.subset.end(),
                                             static_cast<int>(v));
            else
                go_left = v <= best.threshold;
            (go_left ? left_idx : right_idx).push_back(i);
        }

        const int left_id = grow(tree, left_idx, depth + 1);
        const int right_id = grow(tree, right_idx, depth + 1);
        TreeNode& node = tree.nodes[static_cast<std::size_t>(node_id)];
        node.feature = best.feature;
        node.subset_split = best.subset_split;
        node.threshold = best.threshold;
        node.subset = std::move(best.subset);
        node.left = left_id;
        node.right = right_id;
        return node_id;
    }

    CandidateSplit find_best_split(const std::vector<std::size_t>& idx) {
        CandidateSplit best;
        const std::size_t n_feat = data_.rows[0].size();
        const auto min_leaf = static_cast<std::size_t>(config_.min_leaf);
        for (std::size_t f = 0; f < n_feat; ++f) {
            if (is_categorical_[f]) {
                consider_categorical(idx, static_cast<int>(f), min_leaf, best);
            } else {
                std::vector<std::pair<double, double>> pairs;
                pairs.reserve(idx.size());
                for (std::size_t i : idx) pairs.emplace_back(data_.rows[i][f], structure_[i]);
                auto split = detail::best_numeric_split(pairs, min_leaf);
                // strict > keeps the lowest feature index, then the lowest
                // threshold (the scan visits thresholds in ascending order)
                if (split.valid && split.gain > best.gain) {
                    best.valid = true;
                    best.feature = static_cast<int>(f);
                    best.subset_split = false;
                    best.threshold = split.threshold;
                    best.subset.clear();
                    best.gain = split.gain;
                }
            }
        }
        return best;
    }

    // Fisher ordering: per-category mean targets define an order; scanning
    // that order as if ordinal yields the optimal binary partition.
    void consider_categorical(const std::vector<std::size_t>& idx, int feature,
                              std::size_t min_leaf, CandidateSplit& best) {
        std::vector<std::pair<double, double>> pairs; // (code, target), canonical order
        pairs.reserve(idx.size());
        for (std::size_t i : idx)
            pairs.emplace_back(data_.rows[i][static_cast<std::size_t>(feature)], structure_[i]);
        std::sort(pairs.begin(), pairs.end());

        struct Group {
            int code;
            std::size_t count = 0;
            double sum = 0.0;
            double mean() const { return sum / static_cast<double>(count); }
        };
        std::vector<Group> groups;
        for (const auto& [code_v, t] : pairs) {
            const int code = static_cast<int>(code_v);
            if (groups.empty() || groups.back().code != code) groups.push_back({code});
            groups.back().count += 1;
            groups.back().sum += t;
        }
        if (groups.size() < 2) return;

        std::stable_sort(groups.begin(), groups.end(), [](const Group& a, const Group& b) {
            if (a.mean() != b.mean()) return a.mean() < b.mean();
            return a.code < b.code;
        });

        double total = 0.0;
        for (const auto& g : groups) total += g.sum;
        const auto n = static_cast<double>(idx.size());

        double left_sum = 0.0;
        std::size_t left_count = 0;
        for (std::size_t g = 0; g + 1 < groups.size(); ++g) {
            left_sum += groups[g].sum;
            left_count += groups[g].count;
            const std::size_t right_count = idx.size() - left_count;
            if (left_count < min_leaf || right_count < min_leaf) continue;
            const double right_sum = total - left_sum;
            const double gain = left_sum * left_sum / static_cast<double>(left_count) +
                                right_sum * right_sum / static_cast<double>(right_count) -
                                total * total / n;
            if (gain > best.gain) {
                best.valid = true;
                best.feature = feature;
                best.subset_split = true;
                best.threshold = 0.0;
                best.subset.clear();
                for (std::size_t j = 0; j <= g; ++j) best.subset.push_back(groups[j].code);
                std::sort(best.subset.begin(), best.subset.end());
                best.gain = gain;
            }
        }
    }

    double leaf_value(const std::vector<std::size_t>& idx) const {
        std::vector<double> vals;
        vals.reserve(idx.size());
        for (std::size_t i : idx) vals.push_back(leaf_targets_[i]);
        return config_.loss == Loss::L1 ? detail::median(std::move(vals))
                                        : detail::canonical_mean(std::move(vals));
    }

    const Dataset& data_;
    const std::vector<double>& structure_;
    const std::vector<double>& leaf_targets_;
    const TrainConfig& config_;
    std::vector<bool> is_categorical_;
};

double training_loss(Loss loss, const std::vector<double>& y, const std::vector<double>& yhat) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double d = y[i] - yhat[i];
        acc += loss == Loss::L1 ? std::fabs(d) : d * d;
    }
    return acc / static_cast<double>(y.size());
}

} // namespace

GbdtModel fit(const Dataset& data, const TrainConfig& config) {
    config.validate();
    const std::size_t n = data.rows.size();
    if (n < 2) throw ConfigError("surrogate fit: need at least 2 samples, got " +
                                 std::to_string(n));
    if (data.targets.size() != n)
        throw ConfigError("surrogate fit: rows/targets length mismatch");
    const std::size_t n_feat = data.rows[0].size();
    for (const auto& row : data.rows)
        if (row.size() != n_feat) throw ConfigError("surrogate fit: ragged feature rows");
    for (double t : data.targets)
        if (!std::isfinite(t)) throw ConfigError("surrogate fit: non-finite target");

    GbdtModel model;
    model.learning_rate = config.learning_rate;
    model.n_features = n_feat;
    model.categorical_features = data.categorical_features;
    std::sort(model.categorical_features.begin(), model.categorical_features.end());
    model.base_score = detail::canonical_mean(data.targets);

    const double lo = *std::min_element(data.targets.begin(), data.targets.end());
    const double hi = *std::max_element(data.targets.begin(), data.targets.end());
    if (lo == hi) {
        model.base_score = lo;
        return model;
    }

    std::vector<double> yhat(n, model.base_score);
    std::vector<double> structure(n), residual(n);
    for (int stage = 0; stage < config.n_trees; ++stage) {
        bool any_residual = false;
        for (std::size_t i = 0; i < n; ++i) {
            residual[i] = data.targets[i] - yhat[i];
            structure[i] = config.loss == Loss::L1
                               ? (residual[i] > 0 ? 1.0 : (residual[i] < 0 ? -1.0 : 0.0))
                               : residual[i];
            if (residual[i] != 0.0) any_residual = true;
        }
        if (!any_residual) break; // exact fit reached

        TreeBuilder builder(data, structure, residual, config);
        RegressionTree tree = builder.build();
        for (std::size_t i = 0; i < n; ++i)
            yhat[i] += config.learning_rate * tree.predict(data.rows[i]);
        model.trees.push_back(std::move(tree));
        model.stage_train_loss.push_back(training_loss(config.loss, data.targets, yhat));
    }
    return model;
}

Metrics metrics(const std::vector<double>& predictions, const std::vector<double>& truths) {
    if (predictions.size() != truths.size() || predictions.empty())
        throw ConfigError("metrics: need equal-length, non-empty vectors");
    Metrics m;
    double ape = 0.0;
    std::size_t ape_n = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const double d = predictions[i] - truths[i];
        m.mae += std::fabs(d);
        m.rmse += d * d;
        if (truths[i] != 0.0) {
            ape += std::fabs(d) / std::fabs(truths[i]);
            ++ape_n;
        } else {
            ++m.mape_excluded;
        }
    }
    const auto n = static_cast<double>(truths.size());
    m.mae /= n;
    m.rmse = std::sqrt(m.rmse / n);
    m.mape = ape_n ? ape / static_cast<double>(ape_n) : 0.0;
    return m;
}

// -----------------------------------------------------------------------------
// Serialization
// -----------------------------------------------------------------------------

namespace {

void write_tree(std::ostringstream& out, const RegressionTree& tree) {
    out << "tree " << tree.nodes.size() << "\n";
    for (const auto& node : tree.nodes) {
        if (node.feature < 0) {
            out << "L " << format_g17(node.value) << "\n";
        } else if (node.subset_split) {
            out << "C " << node.feature << " " << node.subset.size();
            for (int c : node.subset) out << " " << c;
            out << " " << node.left << " " << node.right << "\n";
        } else {
            out << "S " << node.feature << " " << format_g17(node.threshold) << " " << node.left
                << " " << node.right << "\n";
        }
    }
}

RegressionTree read_tree(std::istringstream& in, const std::string& what) {
    std::string tag;
    std::size_t count = 0;
    if (!(in >> tag >> count) || tag != "tree")
        throw ConfigError(what + ": malformed document, expected a tree header");
    RegressionTree tree;
    tree.nodes.resize(count);
    for (auto& node : tree.nodes) {
        if (!(in >> tag)) throw ConfigError(what + ": truncated document");
        if (tag == "L") {
            std::string v;
            if (!(in >> v)) throw ConfigError(what + ": truncated leaf");
            node.value = parse_double(v, what + " leaf value");
        } else if (tag == "S") {
            std::string t;
            if (!(in >> node.feature >> t >> node.left >> node.right))
                throw ConfigError(what + ": truncated split");
            node.threshold = parse_double(t, what + " threshold");
        } else if (tag == "C") {
            std::size_t k = 0;
            if (!(in >> node.feature >> k)) throw ConfigError(what + ": truncated subset split");
            node.subset_split = true;
            node.subset.resize(k);
            for (auto& c : node.subset)
                if (!(in >> c)) throw ConfigError(what + ": truncated subset");
            if (!(in >> node.left >> node.right))
                throw ConfigError(what + ": truncated subset split");
        } else {
            throw ConfigError(what + ": unknown node tag '" + tag + "'");
        }
    }
    for (const auto& node : tree.nodes)
        if (node.feature >= 0 &&
            (node.left < 0 || node.right < 0 ||
             node.left >= static_cast<int>(count) || node.right >= static_cast<int>(count)))
            throw ConfigError(what + ": node child index out of range");
    return tree;
}

} // namespace

std::string serialize(const GbdtModel& model) {
    std::ostringstream out;
    out << "ktune-gbdt 1\n";
    out << "base_score " << format_g17(model.base_score) << "\n";
    out << "learning_rate " << format_g17(model.learning_rate) << "\n";
    out << "n_features " << model.n_features << "\n";
    out << "categorical " << model.categorical_features.size();
    for (int f : model.categorical_features) out << " " << f;
    out << "\n";
    out << "n_trees " << model.trees.size() << "\n";
    for (const auto& tree : model.trees) write_tree(out, tree);
    out << "end\n";
    return out.str();
}

GbdtModel deserialize_model(const std::string& text) {
    std::istringstream in(text);
    std::string magic;
    int version = 0;
    if (!(in >> magic >> version) || magic != "ktune-gbdt")
        throw ConfigError("model document: bad magic");
    if (version != 1)
        throw ConfigError("model document: unsupported version " + std::to_string(version));

    GbdtModel model;
    std::string key, v;
    std::size_t n_trees = 0, n_cat = 0;
    if (!(in >> key >> v) || key != "base_score")
        throw ConfigError("model document: expected base_score");
    model.base_score = parse_double(v, "base_score");
    if (!(in >> key >> v) || key != "learning_rate")
        throw ConfigError("model document: expected learning_rate");
    model.learning_rate = parse_double(v, "learning_rate");
    if (!(in >> key >> model.n_features) || key != "n_features")
        throw ConfigError("model document: expected n_features");
    if (!(in >> key >> n_cat) || key != "categorical")
        throw ConfigError("model document: expected categorical");
    model.categorical_features.resize(n_cat);
    for (auto& f : model.categorical_features)
        if (!(in >> f)) throw ConfigError("model document: truncated categorical list");
    if (!(in >> key >> n_trees) || key != "n_trees")
        throw ConfigError("model document: expected n_trees");
    model.trees.reserve(n_trees);
    for (std::size_t t = 0; t < n_trees; ++t) model.trees.push_back(read_tree(in, "model"));
    if (!(in >> key) || key != "end") throw ConfigError("model document: missing end marker");
    return model;
}

void save_model(const GbdtModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out << serialize(model);
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

GbdtModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return deserialize_model(buf.str());
}

} // namespace ktune
