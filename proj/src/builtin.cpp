#include "ktune/builtin.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ktune/rng.hpp"
#include "ktune/util.hpp"

namespace ktune {

namespace {

constexpr std::uint64_t kDiscreteTableSeed = 0x6d2c5a11e7f03b49ull;

double hash01(std::uint64_t h) {
    return static_cast<double>(splitmix64(h) >> 11) * 0x1.0p-53;
}

std::uint64_t mix_values(std::uint64_t seed, const std::vector<long long>& vals) {
    std::uint64_t h = seed;
    for (long long v : vals) h = splitmix64(h ^ static_cast<std::uint64_t>(v));
    return h;
}

double quad_objective(const Configuration& c) {
    const double x1 = std::get<double>(c.values[0]);
    const double x2 = std::get<double>(c.values[1]);
    const double d1 = std::get<double>(c.values[2]);
    const double d2 = std::get<double>(c.values[3]);
    return 0.1 + (d1 - x1) * (d1 - x1) + (d2 - (1.0 - x2)) * (d2 - (1.0 - x2));
}

std::string cliff_best_block(long long n) {
    if (n < 1024) return "8";
    if (n < 2048) return "32";
    return "128";
}

double cliff_objective(const Configuration& c) {
    const long long n = std::get<long long>(c.values[0]);
    const long long t = std::get<long long>(c.values[1]);
    const std::string& b = std::get<std::string>(c.values[2]);
    const long long saturation = (n + 127) / 128; // ceil(n/128)
    const double base = static_cast<double>(n) /
                        (50.0 * static_cast<double>(std::min(t, saturation)));
    return base + (b == cliff_best_block(n) ? 0.0 : 0.2);
}

// Seeded table over the 8x8x512 lattice: a bowl whose center moves with the
// inputs, plus a hash term (cubed to skew mass towards the optimum). Both the
// structure and the noise are fixed by the table seed, so the optimum per
// input is stable and brute-force enumerable.
double discrete_objective(const Configuration& c) {
    std::vector<long long> vals;
    vals.reserve(c.values.size());
    for (const auto& v : c.values) vals.push_back(std::get<long long>(v));
    const long long i1 = vals[0], i2 = vals[1];
    const long long center[3] = {i1, 9 - i2, 1 + (i1 + i2) % 8};
    double bowl = 0.0;
    for (int j = 0; j < 3; ++j) {
        const double d = static_cast<double>(vals[2 + j] - center[j]);
        bowl += d * d;
    }
    const double u = hash01(mix_values(kDiscreteTableSeed, vals));
    return 1.0 + 0.45 * bowl / 49.0 + 0.15 * u * u * u;
}

} // namespace

bool is_builtin_kernel(const std::string& name) {
    return name == "quad" || name == "cliff" || name == "discrete";
}

ParameterSpace builtin_space(const std::string& name) {
    if (name == "quad")
        return ParameterSpace({
            ParameterSpec::real("x1", ParamRole::Input, 0.0, 1.0),
            ParameterSpec::real("x2", ParamRole::Input, 0.0, 1.0),
            ParameterSpec::real("d1", ParamRole::Design, 0.0, 1.0),
            ParameterSpec::real("d2", ParamRole::Design, 0.0, 1.0),
        });
    if (name == "cliff")
        return ParameterSpace({
            ParameterSpec::integer("n", ParamRole::Input, 256, 4096),
            ParameterSpec::integer("T", ParamRole::Design, 1, 32),
            ParameterSpec::categorical("b", ParamRole::Design, {"8", "16", "32", "64", "128"}),
        });
    if (name == "discrete")
        return ParameterSpace({
            ParameterSpec::integer("i1", ParamRole::Input, 1, 8),
            ParameterSpec::integer("i2", ParamRole::Input, 1, 8),
            ParameterSpec::integer("d1", ParamRole::Design, 1, 8),
            ParameterSpec::integer("d2", ParamRole::Design, 1, 8),
            ParameterSpec::integer("d3", ParamRole::Design, 1, 8),
        });
    throw ConfigError("unknown builtin kernel '" + name + "' (expected quad, cliff or discrete)");
}

double builtin_objective(const std::string& name, const ParameterSpace& space,
                         const Configuration& config) {
    if (auto err = space.check(config)) throw ConfigError("builtin kernel: " + *err);
    if (name == "quad") return quad_objective(config);
    if (name == "cliff") return cliff_objective(config);
    if (name == "discrete") return discrete_objective(config);
    throw ConfigError("unknown builtin kernel '" + name + "'");
}

std::vector<Value> builtin_baseline(const std::string& name) {
    if (name == "quad") return {0.5, 0.5};
    if (name == "cliff") return {static_cast<long long>(16), std::string("32")};
    if (name == "discrete")
        return {static_cast<long long>(4), static_cast<long long>(4), static_cast<long long>(4)};
    throw ConfigError("unknown builtin kernel '" + name + "'");
}

BuiltinKernel::BuiltinKernel(std::string name, double noise_sd, std::uint64_t noise_seed)
    : name_(std::move(name)), noise_sd_(noise_sd), noise_seed_(noise_seed) {
    if (!is_builtin_kernel(name_)) throw ConfigError("unknown builtin kernel '" + name_ + "'");
}

Kernel::RunResult BuiltinKernel::run_once(const ParameterSpace& space,
                                          const Configuration& config) const {
    double v = builtin_objective(name_, space, config);
    if (noise_sd_ > 0.0) {
        // Deterministic noise field: the same configuration always sees the
        // same perturbation, so repeated evaluation stays pure.
        std::uint64_t h = noise_seed_;
        for (const auto& value : config.values) h = fnv1a(value_to_string(value), h);
        const double u1 = hash01(h);
        const double u2 = hash01(splitmix64(h));
        const double z = std::sqrt(-2.0 * std::log(std::max(u1, 1e-300))) *
                         std::cos(2.0 * 3.14159265358979323846 * u2);
        v *= 1.0 + noise_sd_ * z;
    }
    return {v, SampleStatus::Ok, 0.0};
}

BruteForceBest brute_force_best(const std::string& name, const ParameterSpace& space,
                                const std::vector<Value>& input_values) {
    const auto& design_dims = space.design_dims();
    std::vector<std::vector<Value>> axis_values;
    for (std::size_t dim : design_dims) {
        const auto& p = space.param(dim);
        std::vector<Value> vals;
        if (p.kind == ParamKind::Integer) {
            for (long long v = static_cast<long long>(p.low); v <= static_cast<long long>(p.high);
                 ++v)
                vals.emplace_back(v);
        } else if (p.kind == ParamKind::Real) {
            throw ConfigError("brute_force_best: real design dimension '" + p.name +
                              "' is not enumerable");
        } else {
            for (const auto& label : p.categories) vals.emplace_back(label);
        }
        axis_values.push_back(std::move(vals));
    }

    BruteForceBest best;
    best.objective = std::numeric_limits<double>::infinity();
    std::vector<std::size_t> idx(axis_values.size(), 0);
    for (;;) {
        std::vector<Value> design(axis_values.size());
        for (std::size_t a = 0; a < axis_values.size(); ++a) design[a] = axis_values[a][idx[a]];
        const double v =
            builtin_objective(name, space, combine(space, input_values, design));
        if (v < best.objective) {
            best.objective = v;
            best.design_values = design;
        }
        std::size_t a = axis_values.size();
        for (; a-- > 0;) {
            if (++idx[a] < axis_values[a].size()) break;
            idx[a] = 0;
        }
        if (a == static_cast<std::size_t>(-1)) break;
    }
    return best;
}

} // namespace ktune
