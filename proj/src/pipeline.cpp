#include "ktune/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "ktune/rng.hpp"
#include "ktune/util.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace ktune {

namespace {

constexpr std::uint64_t kGridStream = 0x9a1d;
constexpr std::uint64_t kHoldoutStream = 0x401d;

// ---------------------------------------------------------------------------
// JSON helpers with error paths
// ---------------------------------------------------------------------------

[[noreturn]] void bad(const std::string& path, const std::string& msg) {
    throw ConfigError(path + ": " + msg);
}

const ordered_json& require(const ordered_json& j, const std::string& key,
                            const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) bad(path + "." + key, "missing required field");
    return *it;
}

double get_number(const ordered_json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

long long get_integer(const ordered_json& j, const std::string& path) {
    if (!j.is_number_integer()) bad(path, "expected an integer");
    return j.get<long long>();
}

std::string get_string(const ordered_json& j, const std::string& path) {
    if (!j.is_string()) bad(path, "expected a string");
    return j.get<std::string>();
}

template <typename T, typename Get>
T get_or(const ordered_json& j, const std::string& key, const std::string& path, T fallback,
         Get get) {
    if (!j.is_object()) bad(path, "expected an object");
    auto it = j.find(key);
    if (it == j.end()) return fallback;
    return get(*it, path + "." + key);
}

double number_or(const ordered_json& j, const std::string& key, const std::string& path,
                 double fallback) {
    return get_or<double>(j, key, path, fallback, get_number);
}

long long integer_or(const ordered_json& j, const std::string& key, const std::string& path,
                     long long fallback) {
    return get_or<long long>(j, key, path, fallback, get_integer);
}

std::string string_or(const ordered_json& j, const std::string& key, const std::string& path,
                      std::string fallback) {
    return get_or<std::string>(j, key, path, std::move(fallback), get_string);
}

std::vector<std::size_t> grid_dims_from(const ordered_json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) bad(path, "expected a non-empty array of axis counts");
    std::vector<std::size_t> dims;
    for (std::size_t i = 0; i < j.size(); ++i) {
        long long v = get_integer(j[i], path + "[" + std::to_string(i) + "]");
        if (v < 1) bad(path + "[" + std::to_string(i) + "]", "axis count must be >= 1");
        dims.push_back(static_cast<std::size_t>(v));
    }
    return dims;
}

ParamKind kind_from_string(const std::string& s, const std::string& path) {
    if (s == "real") return ParamKind::Real;
    if (s == "integer") return ParamKind::Integer;
    if (s == "categorical") return ParamKind::Categorical;
    if (s == "boolean") return ParamKind::Boolean;
    bad(path, "unknown kind '" + s + "' (real, integer, categorical, boolean)");
}

ParamRole role_from_string(const std::string& s, const std::string& path) {
    if (s == "input") return ParamRole::Input;
    if (s == "design") return ParamRole::Design;
    bad(path, "unknown role '" + s + "' (input, design)");
}

ParameterSpace space_from_json(const ordered_json& arr, const std::string& path) {
    if (!arr.is_array() || arr.empty()) bad(path, "expected a non-empty array of parameters");
    std::vector<ParameterSpec> params;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string p = path + "[" + std::to_string(i) + "]";
        const auto& pj = arr[i];
        ParameterSpec spec;
        spec.name = get_string(require(pj, "name", p), p + ".name");
        spec.kind = kind_from_string(get_string(require(pj, "kind", p), p + ".kind"), p + ".kind");
        spec.role = role_from_string(get_string(require(pj, "role", p), p + ".role"), p + ".role");
        if (spec.kind == ParamKind::Real || spec.kind == ParamKind::Integer) {
            const auto& bounds = require(pj, "bounds", p);
            if (!bounds.is_array() || bounds.size() != 2)
                bad(p + ".bounds", "expected [low, high]");
            spec.low = get_number(bounds[0], p + ".bounds[0]");
            spec.high = get_number(bounds[1], p + ".bounds[1]");
        } else if (spec.kind == ParamKind::Categorical) {
            const auto& cats = require(pj, "categories", p);
            if (!cats.is_array()) bad(p + ".categories", "expected an array of labels");
            for (std::size_t c = 0; c < cats.size(); ++c)
                spec.categories.push_back(
                    get_string(cats[c], p + ".categories[" + std::to_string(c) + "]"));
        } else {
            spec.categories = {"false", "true"};
        }
        params.push_back(std::move(spec));
    }
    auto errors = ParameterSpace::validate(params);
    if (!errors.empty()) {
        std::string msg = "invalid space:";
        for (const auto& e : errors) msg += "\n  - " + e;
        bad(path, msg);
    }
    return ParameterSpace(std::move(params));
}

Value value_from_json(const ordered_json& j, const ParameterSpec& spec, const std::string& path) {
    switch (spec.kind) {
        case ParamKind::Real:
            return get_number(j, path);
        case ParamKind::Integer:
            return get_integer(j, path);
        default: {
            std::string label = get_string(j, path);
            if (!spec.category_code(label))
                bad(path, "unknown category label '" + label + "' for parameter '" + spec.name +
                              "'");
            return label;
        }
    }
}

ordered_json value_to_json(const ParameterSpec& spec, const Value& v) {
    switch (spec.kind) {
        case ParamKind::Real: return std::get<double>(v);
        case ParamKind::Integer: return std::get<long long>(v);
        default: return std::get<std::string>(v);
    }
}

Aggregate aggregate_from_string(const std::string& s, const std::string& path) {
    if (s == "min") return Aggregate::Min;
    if (s == "median") return Aggregate::Median;
    if (s == "mean") return Aggregate::Mean;
    bad(path, "unknown aggregate '" + s + "' (min, median, mean)");
}

std::string aggregate_to_string(Aggregate a) {
    switch (a) {
        case Aggregate::Min: return "min";
        case Aggregate::Median: return "median";
        case Aggregate::Mean: return "mean";
    }
    return "?";
}

ArgStyle arg_style_from_string(const std::string& s, const std::string& path) {
    if (s == "named-flags") return ArgStyle::NamedFlags;
    if (s == "positional") return ArgStyle::Positional;
    if (s == "env-vars") return ArgStyle::EnvVars;
    bad(path, "unknown arg_style '" + s + "' (named-flags, positional, env-vars)");
}

std::string arg_style_to_string(ArgStyle s) {
    switch (s) {
        case ArgStyle::NamedFlags: return "named-flags";
        case ArgStyle::Positional: return "positional";
        case ArgStyle::EnvVars: return "env-vars";
    }
    return "?";
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open '" + tmp + "' for writing");
        out << content;
        if (!out) throw std::runtime_error("write failed for '" + tmp + "'");
    }
    fs::rename(tmp, path);
}

void say(bool quiet, const std::string& line) {
    if (!quiet) std::printf("%s\n", line.c_str());
}

} // namespace

// ---------------------------------------------------------------------------
// ExperimentConfig
// ---------------------------------------------------------------------------

void ExperimentConfig::validate() const {
    if (builtin.empty() && command.executable.empty())
        throw ConfigError("kernel: either a builtin name or an executable is required");
    if (!builtin.empty() && !is_builtin_kernel(builtin))
        throw ConfigError("kernel.builtin: unknown builtin '" + builtin + "'");
    if (sampler.name != "ga-adaptive" && sampler.name != "hvs" && sampler.name != "hvs-cv" &&
        sampler.name != "lhs" && sampler.name != "random")
        throw ConfigError("sampler.name: unknown sampler '" + sampler.name + "'");
    schedule.validate();
    surrogate.validate();
    ga.validate();
    if (hvs.max_depth < 1) throw ConfigError("sampler.hvs_depth: must be >= 1");
    if (hvs.min_leaf < 1) throw ConfigError("sampler.hvs_min_leaf: must be >= 1");
    if (eval.repeats < 1) throw ConfigError("kernel.repeats: must be >= 1");
    if (eval.clip && !std::isfinite(*eval.clip)) throw ConfigError("objective.clip: must be finite");
    if (!std::isfinite(eval.penalty)) throw ConfigError("objective.penalty: must be finite");
    if (optimization_grid.size() != space.input_dims().size())
        throw ConfigError("optimization_grid: expected " +
                          std::to_string(space.input_dims().size()) + " axis counts");
    if (validation_grid.size() != space.input_dims().size())
        throw ConfigError("validation.grid: expected " +
                          std::to_string(space.input_dims().size()) + " axis counts");
    if (tree_depth < 1) throw ConfigError("tree_depth: must be >= 1");
    if (output_dir.empty()) throw ConfigError("output_dir: must not be empty");
    if (baseline.is_table()) {
        // table checked when loaded
    } else if (baseline.from_builtin_default) {
        if (builtin.empty())
            throw ConfigError("validation.baseline: required for subprocess kernels");
    } else if (baseline.fixed_design.size() != space.design_dims().size()) {
        throw ConfigError("validation.baseline.design: expected one value per design parameter");
    }
}

ExperimentConfig parse_experiment(const std::string& json_text) {
    ordered_json root;
    try {
        root = ordered_json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    if (!root.is_object()) throw ConfigError("config: top level must be an object");

    ExperimentConfig config;

    const auto& kernel = require(root, "kernel", "config");
    config.builtin = string_or(kernel, "builtin", "kernel", "");
    if (!config.builtin.empty()) {
        if (!is_builtin_kernel(config.builtin))
            bad("kernel.builtin", "unknown builtin '" + config.builtin + "'");
        config.builtin_noise_sd = number_or(kernel, "noise_sd", "kernel", 0.0);
        config.eval.repeats = static_cast<int>(integer_or(kernel, "repeats", "kernel", 1));
        config.eval.aggregate =
            aggregate_from_string(string_or(kernel, "aggregate", "kernel", "min"),
                                  "kernel.aggregate");
    } else {
        config.command.executable = get_string(require(kernel, "executable", "kernel"),
                                               "kernel.executable");
        if (kernel.contains("args")) {
            const auto& args = kernel["args"];
            if (!args.is_array()) bad("kernel.args", "expected an array of strings");
            for (std::size_t i = 0; i < args.size(); ++i)
                config.command.base_args.push_back(
                    get_string(args[i], "kernel.args[" + std::to_string(i) + "]"));
        }
        config.command.arg_style = arg_style_from_string(
            string_or(kernel, "arg_style", "kernel", "named-flags"), "kernel.arg_style");
        config.command.timeout_sec = number_or(kernel, "timeout", "kernel", 60.0);
        if (!(config.command.timeout_sec > 0)) bad("kernel.timeout", "must be > 0");
        config.command.repeats = static_cast<int>(integer_or(kernel, "repeats", "kernel", 1));
        if (config.command.repeats < 1) bad("kernel.repeats", "must be >= 1");
        config.command.aggregate = aggregate_from_string(
            string_or(kernel, "aggregate", "kernel", "min"), "kernel.aggregate");
        config.eval.repeats = config.command.repeats;
        config.eval.aggregate = config.command.aggregate;
    }

    if (root.contains("space")) {
        config.space = space_from_json(root["space"], "space");
    } else if (!config.builtin.empty()) {
        config.space = builtin_space(config.builtin);
    } else {
        throw ConfigError("space: required when the kernel is not builtin");
    }
    if (!config.builtin.empty()) {
        // A builtin kernel fixes its space; reject mismatching declarations.
        if (config.space.fingerprint() != builtin_space(config.builtin).fingerprint())
            throw ConfigError("space: does not match builtin kernel '" + config.builtin + "'");
    }

    if (root.contains("objective")) {
        const auto& obj = root["objective"];
        if (obj.contains("clip")) config.eval.clip = get_number(obj["clip"], "objective.clip");
        config.eval.penalty = number_or(obj, "penalty", "objective", config.eval.penalty);
    }

    const auto& sampler = require(root, "sampler", "config");
    config.sampler.name = string_or(sampler, "name", "sampler", "ga-adaptive");
    config.sampler.subsampler =
        subsampler_from_string(string_or(sampler, "subsampler", "sampler", "hvs-cv"));
    config.schedule.bootstrap_ratio = number_or(sampler, "b", "sampler", 0.1);
    config.schedule.initial_ga_ratio = number_or(sampler, "i", "sampler", 0.0);
    config.schedule.final_ga_ratio = number_or(sampler, "f", "sampler", 1.0);
    long long s_count = integer_or(sampler, "s", "sampler", 100);
    long long n_count = get_integer(require(sampler, "n", "sampler"), "sampler.n");
    if (s_count < 1) bad("sampler.s", "must be >= 1");
    if (n_count < 1) bad("sampler.n", "must be >= 1");
    config.schedule.per_iteration = static_cast<std::size_t>(s_count);
    config.schedule.total = static_cast<std::size_t>(n_count);
    config.hvs.max_depth = static_cast<int>(integer_or(sampler, "hvs_depth", "sampler", 6));
    config.hvs.min_leaf = static_cast<int>(integer_or(sampler, "hvs_min_leaf", "sampler", 10));

    if (root.contains("surrogate")) {
        const auto& sur = root["surrogate"];
        config.surrogate.n_trees = static_cast<int>(integer_or(sur, "n_trees", "surrogate", 400));
        config.surrogate.max_depth =
            static_cast<int>(integer_or(sur, "max_depth", "surrogate", 8));
        config.surrogate.min_leaf = static_cast<int>(integer_or(sur, "min_leaf", "surrogate", 5));
        config.surrogate.learning_rate = number_or(sur, "learning_rate", "surrogate", 0.1);
        const std::string loss = string_or(sur, "loss", "surrogate", "l2");
        if (loss == "l2")
            config.surrogate.loss = Loss::L2;
        else if (loss == "l1")
            config.surrogate.loss = Loss::L1;
        else
            bad("surrogate.loss", "unknown loss '" + loss + "' (l1, l2)");
    }

    if (root.contains("ga")) {
        const auto& ga = root["ga"];
        config.ga.population = static_cast<int>(integer_or(ga, "population", "ga", 64));
        config.ga.generations = static_cast<int>(integer_or(ga, "generations", "ga", 100));
        config.ga.crossover_prob = number_or(ga, "crossover_prob", "ga", 0.9);
        if (ga.contains("mutation_prob"))
            config.ga.mutation_prob = get_number(ga["mutation_prob"], "ga.mutation_prob");
        config.ga.eta_crossover = number_or(ga, "eta_crossover", "ga", 15.0);
        config.ga.eta_mutation = number_or(ga, "eta_mutation", "ga", 20.0);
        config.ga.tournament_size = static_cast<int>(integer_or(ga, "tournament_size", "ga", 2));
    }

    config.optimization_grid =
        grid_dims_from(require(root, "optimization_grid", "config"), "optimization_grid");

    config.tree_depth = static_cast<int>(integer_or(root, "tree_depth", "config", 8));

    const auto& validation = require(root, "validation", "config");
    config.validation_grid = grid_dims_from(require(validation, "grid", "validation"),
                                            "validation.grid");
    if (validation.contains("baseline")) {
        const auto& baseline = validation["baseline"];
        if (baseline.contains("reference_csv")) {
            config.baseline.reference_csv =
                get_string(baseline["reference_csv"], "validation.baseline.reference_csv");
        } else if (baseline.contains("design")) {
            const auto& design = baseline["design"];
            if (!design.is_object())
                bad("validation.baseline.design", "expected an object of design values");
            config.baseline.fixed_design.resize(config.space.design_dims().size());
            std::vector<bool> seen(config.space.design_dims().size(), false);
            for (auto it = design.begin(); it != design.end(); ++it) {
                auto idx = config.space.index_of(it.key());
                if (!idx || config.space.param(*idx).role != ParamRole::Design)
                    bad("validation.baseline.design." + it.key(), "not a design parameter");
                const auto& dims = config.space.design_dims();
                std::size_t pos = static_cast<std::size_t>(
                    std::find(dims.begin(), dims.end(), *idx) - dims.begin());
                config.baseline.fixed_design[pos] =
                    value_from_json(it.value(), config.space.param(*idx),
                                    "validation.baseline.design." + it.key());
                seen[pos] = true;
            }
            for (std::size_t i = 0; i < seen.size(); ++i)
                if (!seen[i])
                    bad("validation.baseline.design",
                        "missing value for design parameter '" +
                            config.space.param(config.space.design_dims()[i]).name + "'");
        } else {
            bad("validation.baseline", "expected 'design' or 'reference_csv'");
        }
    } else if (!config.builtin.empty()) {
        config.baseline.fixed_design = builtin_baseline(config.builtin);
        config.baseline.from_builtin_default = true;
    } else {
        throw ConfigError("validation.baseline: required for subprocess kernels");
    }

    if (root.contains("seed"))
        config.seed = static_cast<std::uint64_t>(get_integer(root["seed"], "seed"));
    config.output_dir = string_or(root, "output_dir", "config", "tune-out");

    config.validate();
    return config;
}

ExperimentConfig load_experiment(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_experiment(buf.str());
}

std::string experiment_to_json(const ExperimentConfig& config) {
    ordered_json root;

    ordered_json kernel;
    if (!config.builtin.empty()) {
        kernel["builtin"] = config.builtin;
        if (config.builtin_noise_sd > 0.0) kernel["noise_sd"] = config.builtin_noise_sd;
        kernel["repeats"] = config.eval.repeats;
        kernel["aggregate"] = aggregate_to_string(config.eval.aggregate);
    } else {
        kernel["executable"] = config.command.executable;
        if (!config.command.base_args.empty()) kernel["args"] = config.command.base_args;
        kernel["arg_style"] = arg_style_to_string(config.command.arg_style);
        kernel["timeout"] = config.command.timeout_sec;
        kernel["repeats"] = config.command.repeats;
        kernel["aggregate"] = aggregate_to_string(config.command.aggregate);
    }
    root["kernel"] = kernel;

    ordered_json space = ordered_json::array();
    for (const auto& p : config.space.params()) {
        ordered_json pj;
        pj["name"] = p.name;
        pj["kind"] = to_string(p.kind);
        pj["role"] = to_string(p.role);
        if (p.is_numeric())
            pj["bounds"] = {p.low, p.high};
        else if (p.kind == ParamKind::Categorical)
            pj["categories"] = p.categories;
        space.push_back(pj);
    }
    root["space"] = space;

    ordered_json objective;
    if (config.eval.clip) objective["clip"] = *config.eval.clip;
    objective["penalty"] = config.eval.penalty;
    root["objective"] = objective;

    ordered_json sampler;
    sampler["name"] = config.sampler.name;
    sampler["subsampler"] = to_string(config.sampler.subsampler);
    sampler["b"] = config.schedule.bootstrap_ratio;
    sampler["i"] = config.schedule.initial_ga_ratio;
    sampler["f"] = config.schedule.final_ga_ratio;
    sampler["s"] = config.schedule.per_iteration;
    sampler["n"] = config.schedule.total;
    sampler["hvs_depth"] = config.hvs.max_depth;
    sampler["hvs_min_leaf"] = config.hvs.min_leaf;
    root["sampler"] = sampler;

    ordered_json surrogate;
    surrogate["n_trees"] = config.surrogate.n_trees;
    surrogate["max_depth"] = config.surrogate.max_depth;
    surrogate["min_leaf"] = config.surrogate.min_leaf;
    surrogate["learning_rate"] = config.surrogate.learning_rate;
    surrogate["loss"] = config.surrogate.loss == Loss::L1 ? "l1" : "l2";
    root["surrogate"] = surrogate;

    ordered_json ga;
    ga["population"] = config.ga.population;
    ga["generations"] = config.ga.generations;
    ga["crossover_prob"] = config.ga.crossover_prob;
    if (config.ga.mutation_prob) ga["mutation_prob"] = *config.ga.mutation_prob;
    ga["eta_crossover"] = config.ga.eta_crossover;
    ga["eta_mutation"] = config.ga.eta_mutation;
    ga["tournament_size"] = config.ga.tournament_size;
    root["ga"] = ga;

    root["optimization_grid"] = config.optimization_grid;
    root["tree_depth"] = config.tree_depth;

    ordered_json validation;
    validation["grid"] = config.validation_grid;
    if (config.baseline.is_table()) {
        validation["baseline"] = {{"reference_csv", config.baseline.reference_csv}};
    } else if (!config.baseline.from_builtin_default) {
        ordered_json design;
        const auto& dims = config.space.design_dims();
        for (std::size_t i = 0; i < dims.size(); ++i) {
            const auto& p = config.space.param(dims[i]);
            design[p.name] = value_to_json(p, config.baseline.fixed_design[i]);
        }
        validation["baseline"] = {{"design", design}};
    }
    root["validation"] = validation;

    root["seed"] = config.seed;
    root["output_dir"] = config.output_dir;

    return root.dump(2) + "\n";
}

std::unique_ptr<Kernel> make_kernel(const ExperimentConfig& config) {
    if (!config.builtin.empty())
        return std::make_unique<BuiltinKernel>(config.builtin, config.builtin_noise_sd,
                                               config.seed);
    return std::make_unique<SubprocessKernel>(config.command);
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

std::vector<std::pair<std::vector<Value>, std::vector<Value>>> load_reference_table(
    const std::string& path, const ParameterSpace& space) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open reference table '" + path + "'");
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    const auto& input_dims = space.input_dims();
    const auto& design_dims = space.design_dims();
    auto header = split_csv_line(line);
    if (header.size() != input_dims.size() + design_dims.size())
        throw ConfigError(path + ": header must list input then design columns");

    std::vector<std::pair<std::vector<Value>, std::vector<Value>>> table;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != header.size())
            throw ConfigError(path + ":" + std::to_string(line_no) + ": wrong field count");
        std::vector<Value> inputs, designs;
        std::size_t c = 0;
        for (std::size_t dim : input_dims) {
            const auto& p = space.param(dim);
            inputs.push_back(p.kind == ParamKind::Real
                                 ? Value(parse_double(fields[c], p.name))
                                 : (p.kind == ParamKind::Integer
                                        ? Value(parse_int(fields[c], p.name))
                                        : Value(fields[c])));
            ++c;
        }
        for (std::size_t dim : design_dims) {
            const auto& p = space.param(dim);
            designs.push_back(p.kind == ParamKind::Real
                                  ? Value(parse_double(fields[c], p.name))
                                  : (p.kind == ParamKind::Integer
                                         ? Value(parse_int(fields[c], p.name))
                                         : Value(fields[c])));
            ++c;
        }
        table.emplace_back(std::move(inputs), std::move(designs));
    }
    return table;
}

namespace {

std::string input_key(const std::vector<Value>& values) {
    std::string key;
    for (const auto& v : values) {
        key += value_to_string(v);
        key.push_back('|');
    }
    return key;
}

} // namespace

ValidationReport validate_trees(const TuningTrees& trees, const ExperimentConfig& config,
                                const Kernel& kernel,
                                const std::vector<std::size_t>& grid_dims, unsigned jobs) {
    const auto& space = config.space;
    auto grid = input_grid(space, grid_dims);

    std::map<std::string, std::vector<Value>> reference;
    if (config.baseline.is_table()) {
        for (auto& [inputs, designs] : load_reference_table(config.baseline.reference_csv, space))
            reference[input_key(inputs)] = designs;
    }

    std::vector<Configuration> to_measure;
    std::vector<ValidationRow> rows;
    to_measure.reserve(2 * grid.points.size());
    for (const auto& point : grid.points) {
        ValidationRow row;
        row.input_values = point;
        row.tuned_design = predict_config(trees, space, point);
        if (config.baseline.is_table()) {
            auto it = reference.find(input_key(point));
            if (it == reference.end())
                throw ConfigError("validation: reference table has no row for input " +
                                  input_key(point));
            row.baseline_design = it->second;
        } else {
            row.baseline_design = config.baseline.fixed_design;
        }
        to_measure.push_back(combine(space, point, row.tuned_design));
        to_measure.push_back(combine(space, point, row.baseline_design));
        rows.push_back(std::move(row));
    }

    auto records = evaluate_batch(kernel, space, to_measure, jobs, config.eval);

    ValidationReport report;
    double log_sum = 0.0;
    std::size_t included = 0, progressions = 0, regressions = 0;
    double progression_sum = 0.0, regression_sum = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ValidationRow& row = rows[i];
        const auto& tuned = records[2 * i];
        const auto& baseline = records[2 * i + 1];
        row.tuned_objective = tuned.objective;
        row.baseline_objective = baseline.objective;
        const bool tuned_ok =
            tuned.status == SampleStatus::Ok || tuned.status == SampleStatus::Clipped;
        const bool baseline_ok =
            baseline.status == SampleStatus::Ok || baseline.status == SampleStatus::Clipped;
        if (!tuned_ok || !baseline_ok || !(tuned.objective > 0.0) ||
            !(baseline.objective > 0.0)) {
            row.ok = false;
            ++report.failures;
        } else {
            row.speedup = baseline.objective / tuned.objective;
            log_sum += std::log(row.speedup);
            ++included;
            if (row.speedup > 1.0) {
                ++progressions;
                progression_sum += row.speedup;
            } else if (row.speedup < 1.0) {
                ++regressions;
                regression_sum += row.speedup;
            }
        }
        report.rows.push_back(std::move(row));
    }
    if (included) {
        report.geomean_speedup = std::exp(log_sum / static_cast<double>(included));
        report.pct_progressions =
            100.0 * static_cast<double>(progressions) / static_cast<double>(included);
        report.pct_regressions =
            100.0 * static_cast<double>(regressions) / static_cast<double>(included);
        report.mean_progression_speedup =
            progressions ? progression_sum / static_cast<double>(progressions) : 0.0;
        report.mean_regression_slowdown =
            regressions ? regression_sum / static_cast<double>(regressions) : 0.0;
    }
    return report;
}

void save_validation(const ValidationReport& report, const ParameterSpace& space,
                     const std::string& csv_path, const std::string& report_path) {
    std::ostringstream csv;
    std::vector<std::string> header;
    for (std::size_t dim : space.input_dims()) header.push_back(space.param(dim).name);
    header.push_back("tuned_objective");
    header.push_back("baseline_objective");
    header.push_back("speedup");
    header.push_back("status");
    csv << join_csv(header) << "\n";
    for (const auto& row : report.rows) {
        std::vector<std::string> fields;
        for (const auto& v : row.input_values) fields.push_back(value_to_string(v));
        fields.push_back(format_g17(row.tuned_objective));
        fields.push_back(format_g17(row.baseline_objective));
        fields.push_back(row.ok ? format_g17(row.speedup) : "");
        fields.push_back(row.ok ? "ok" : "failed");
        csv << join_csv(fields) << "\n";
    }
    write_file_atomic(csv_path, csv.str());

    char buf[256];
    std::ostringstream txt;
    txt << "validation points: " << report.rows.size() << " (excluded: " << report.failures
        << ")\n";
    std::snprintf(buf, sizeof(buf), "geomean speedup:   %.4f\n", report.geomean_speedup);
    txt << buf;
    std::snprintf(buf, sizeof(buf), "progressions:      %.1f%% (mean speedup %.4f)\n",
                  report.pct_progressions, report.mean_progression_speedup);
    txt << buf;
    std::snprintf(buf, sizeof(buf), "regressions:       %.1f%% (mean slowdown %.4f)\n",
                  report.pct_regressions, report.mean_regression_slowdown);
    txt << buf;
    write_file_atomic(report_path, txt.str());
}

// ---------------------------------------------------------------------------
// Pipeline stages
// ---------------------------------------------------------------------------

namespace {

Dataset dataset_from_store(const ParameterSpace& space, const SampleStore& store) {
    Dataset data;
    for (const auto& r : store.records()) {
        data.rows.push_back(encode(space, r.config));
        data.targets.push_back(r.objective);
    }
    for (std::size_t dim : space.categorical_dims())
        data.categorical_features.push_back(static_cast<int>(dim));
    return data;
}

SampleStore sampling_stage(const ExperimentConfig& config, const Kernel& kernel,
                           const ArtifactPaths& paths, unsigned jobs, bool quiet) {
    SampleStore store(config.space);
    const SampleStore* resume = nullptr;
    if (fs::exists(paths.samples())) {
        store = load_store(paths.samples(), config.space);
        if (store.size() > config.schedule.total)
            throw ConfigError("samples.csv holds " + std::to_string(store.size()) +
                              " records but the budget is " +
                              std::to_string(config.schedule.total));
        resume = &store;
        say(quiet, "[sample] resuming from " + std::to_string(store.size()) + " records");
    }

    GaAdaptiveOptions options;
    options.schedule = config.schedule;
    options.subsampler = config.sampler.subsampler;
    options.hvs = config.hvs;
    options.surrogate = config.surrogate;
    options.ga = config.ga;
    options.jobs = jobs;
    options.rng_seed = config.seed;
    options.checkpoint = [&](const SampleStore& snapshot) {
        persist(snapshot, paths.samples() + ".tmp");
        fs::rename(paths.samples() + ".tmp", paths.samples());
    };
    options.on_iteration = [&](const IterationLog& log) {
        if (quiet) return;
        std::printf("[sample] iter %zu: %zu -> %zu samples, eps=%.3f, ga=%zu, sub=%zu\n",
                    log.index, log.store_size_before,
                    log.store_size_before + log.ga_kept + log.sub_points, log.epsilon,
                    log.ga_kept, log.sub_points);
    };

    if (config.sampler.name == "ga-adaptive")
        return ga_adaptive(config.space, kernel, config.eval, options, resume);
    Subsampler plain = subsampler_from_string(config.sampler.name);
    return run_sampler(config.space, kernel, config.eval, plain, options, resume);
}

} // namespace

PipelineResult run_pipeline(const ExperimentConfig& config, unsigned jobs, bool quiet) {
    config.validate();
    ArtifactPaths paths{config.output_dir};
    fs::create_directories(paths.dir);

    if (!fs::exists(paths.config()))
        write_file_atomic(paths.config(), experiment_to_json(config));

    auto kernel = make_kernel(config);

    say(quiet, "[sample] budget " + std::to_string(config.schedule.total) + " with sampler " +
                   config.sampler.name);
    PipelineResult result{SampleStore(config.space), {}, {}, {}, {}};
    result.store = sampling_stage(config, *kernel, paths, jobs, quiet);

    if (fs::exists(paths.model())) {
        result.model = load_model(paths.model());
        say(quiet, "[model] loaded " + paths.model());
    } else {
        say(quiet, "[model] fitting " + std::to_string(config.surrogate.n_trees) + " trees on " +
                       std::to_string(result.store.size()) + " samples");
        result.model = fit(dataset_from_store(config.space, result.store), config.surrogate);
        write_file_atomic(paths.model(), serialize(result.model));
    }

    if (fs::exists(paths.optimized_points())) {
        result.optimized_points = load_optimized_points(paths.optimized_points(), config.space);
        say(quiet, "[optimize] loaded " + paths.optimized_points());
    } else {
        auto grid = input_grid(config.space, config.optimization_grid);
        say(quiet, "[optimize] " + std::to_string(grid.points.size()) + " grid points");
        GaConfig ga = config.ga;
        ga.rng_seed = derive_seed(config.seed, kGridStream);
        result.optimized_points = optimize_grid(result.model, config.space, grid.points, ga, jobs);
        const std::string tmp = paths.optimized_points() + ".tmp";
        save_optimized_points(result.optimized_points, config.space, tmp);
        fs::rename(tmp, paths.optimized_points());
    }

    if (fs::exists(paths.trees())) {
        result.trees = load_trees(paths.trees());
        say(quiet, "[trees] loaded " + paths.trees());
    } else {
        say(quiet, "[trees] building depth-" + std::to_string(config.tree_depth) + " trees");
        result.trees = build_trees(result.optimized_points, config.space, config.tree_depth);
        write_file_atomic(paths.trees(), serialize(result.trees));
    }
    if (!fs::exists(paths.trees_c()))
        write_file_atomic(paths.trees_c(), emit_c(result.trees, config.space, "tuned"));

    if (fs::exists(paths.validation()) && fs::exists(paths.report())) {
        say(quiet, "[validate] already complete");
        // leave result.validation default; rows live in the CSV
    } else {
        std::string dims;
        for (std::size_t d : config.validation_grid)
            dims += (dims.empty() ? "" : "x") + std::to_string(d);
        say(quiet, "[validate] grid " + dims);
        result.validation =
            validate_trees(result.trees, config, *kernel, config.validation_grid, jobs);
        save_validation(result.validation, config.space, paths.validation(), paths.report());
    }
    say(quiet, "[done] artifacts in " + paths.dir);
    return result;
}

PipelineResult resume_pipeline(const std::string& output_dir, unsigned jobs, bool quiet) {
    ArtifactPaths paths{output_dir};
    if (!fs::exists(paths.config()))
        throw std::runtime_error("resume: no config.json in '" + output_dir + "'");
    ExperimentConfig config = load_experiment(paths.config());
    config.output_dir = output_dir;
    return run_pipeline(config, jobs, quiet);
}

// ---------------------------------------------------------------------------
// Sampler benchmark
// ---------------------------------------------------------------------------

std::vector<SamplerBenchRow> bench_samplers(const ExperimentConfig& config,
                                            const std::vector<std::string>& samplers,
                                            std::size_t holdout_size, unsigned jobs, bool quiet) {
    config.validate();
    auto kernel = make_kernel(config);
    const auto& space = config.space;

    auto holdout = random_sample(space, holdout_size, derive_seed(config.seed, kHoldoutStream));
    auto holdout_records = evaluate_batch(*kernel, space, holdout, jobs, config.eval);
    std::vector<std::vector<double>> holdout_rows;
    std::vector<double> holdout_truth;
    for (const auto& r : holdout_records) {
        if (r.status == SampleStatus::Failed || r.status == SampleStatus::Timeout) continue;
        holdout_rows.push_back(encode(space, r.config));
        holdout_truth.push_back(r.objective);
    }

    std::vector<SamplerBenchRow> out;
    for (const auto& name : samplers) {
        say(quiet, "[bench] sampler " + name);
        GaAdaptiveOptions options;
        options.schedule = config.schedule;
        options.subsampler = config.sampler.subsampler;
        options.hvs = config.hvs;
        options.surrogate = config.surrogate;
        options.ga = config.ga;
        options.jobs = jobs;
        options.rng_seed = derive_seed(config.seed, fnv1a(name));

        SampleStore store =
            name == "ga-adaptive"
                ? ga_adaptive(space, *kernel, config.eval, options)
                : run_sampler(space, *kernel, config.eval, subsampler_from_string(name), options);

        GbdtModel model = fit(dataset_from_store(space, store), config.surrogate);

        SamplerBenchRow row;
        row.sampler = name;
        auto m = metrics(model.predict_batch(holdout_rows), holdout_truth);
        row.global_mae = m.mae;
        row.global_rmse = m.rmse;

        auto grid = input_grid(space, config.optimization_grid);
        GaConfig ga = config.ga;
        ga.rng_seed = derive_seed(options.rng_seed, kGridStream);
        auto points = optimize_grid(model, space, grid.points, ga, jobs);
        row.local_mae = local_accuracy(*kernel, space, points, config.eval, jobs);

        auto trees = build_trees(points, space, config.tree_depth);
        auto report = validate_trees(trees, config, *kernel, config.validation_grid, jobs);
        row.geomean_speedup = report.geomean_speedup;

        say(quiet, "[bench] " + name + ": global MAE " + format_g17(row.global_mae) +
                       ", local MAE " + format_g17(row.local_mae) + ", geomean " +
                       format_g17(row.geomean_speedup));
        out.push_back(row);
    }
    return out;
}

} // namespace ktune
