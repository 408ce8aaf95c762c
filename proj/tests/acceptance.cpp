// Acceptance suite: one self-contained check per criterion, each printing a
// single [PASS]/[FAIL] line. Run everything, or a single criterion with
// --only N. --jobs bounds worker threads inside a criterion.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ktune/pipeline.hpp"
#include "ktune/rng.hpp"
#include "ktune/util.hpp"
#include "test_helpers.hpp"

using namespace ktune;
using namespace ktune::testing;

namespace {

unsigned g_jobs = 4;
std::string g_tune_bin;

double median_of(std::vector<double> values) {
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return (n % 2) ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

// ---------------------------------------------------------------------------
// Shared experiment setups
// ---------------------------------------------------------------------------

ExperimentConfig discrete_experiment(std::uint64_t seed, const std::string& outdir) {
    ExperimentConfig config;
    config.space = builtin_space("discrete");
    config.builtin = "discrete";
    config.sampler.name = "ga-adaptive";
    config.sampler.subsampler = Subsampler::HvsCv;
    config.schedule.bootstrap_ratio = 0.1;
    config.schedule.initial_ga_ratio = 0.0;
    config.schedule.final_ga_ratio = 1.0;
    config.schedule.per_iteration = 150;
    config.schedule.total = 3000;
    config.hvs.min_leaf = 8;
    config.surrogate.n_trees = 120;
    config.surrogate.max_depth = 9;
    config.surrogate.min_leaf = 1;
    config.surrogate.learning_rate = 0.2;
    config.ga.population = 24;
    config.ga.generations = 30;
    config.optimization_grid = {8, 8};
    config.tree_depth = 8;
    config.validation_grid = {8, 8};
    config.baseline.fixed_design = builtin_baseline("discrete");
    config.baseline.from_builtin_default = true;
    config.seed = seed;
    config.output_dir = outdir;
    return config;
}

ExperimentConfig cliff_experiment(std::uint64_t seed, const std::string& outdir) {
    ExperimentConfig config;
    config.space = builtin_space("cliff");
    config.builtin = "cliff";
    config.sampler.name = "ga-adaptive";
    config.sampler.subsampler = Subsampler::HvsCv;
    config.schedule.bootstrap_ratio = 0.1;
    config.schedule.initial_ga_ratio = 0.0;
    config.schedule.final_ga_ratio = 1.0;
    config.schedule.per_iteration = 100;
    config.schedule.total = 2000;
    config.surrogate.n_trees = 150;
    config.surrogate.max_depth = 8;
    config.surrogate.min_leaf = 2;
    config.surrogate.learning_rate = 0.15;
    config.ga.population = 24;
    config.ga.generations = 25;
    config.optimization_grid = {64};
    config.tree_depth = 8;
    config.validation_grid = {16};
    config.baseline.fixed_design = builtin_baseline("cliff");
    config.baseline.from_builtin_default = true;
    config.seed = seed;
    config.output_dir = outdir;
    return config;
}

Dataset dataset_of(const ParameterSpace& space, const SampleStore& store) {
    Dataset data;
    for (const auto& r : store.records()) {
        data.rows.push_back(encode(space, r.config));
        data.targets.push_back(r.objective);
    }
    for (std::size_t dim : space.categorical_dims())
        data.categorical_features.push_back(static_cast<int>(dim));
    return data;
}

struct SamplerRun {
    GbdtModel model;
    std::vector<OptimizedPoint> points;
};

// Budgeted sampling + surrogate + per-grid-point optimization for one
// strategy, mirroring the bench-samplers flow.
SamplerRun sampler_run(const ExperimentConfig& config, const std::string& sampler,
                       std::uint64_t seed) {
    auto kernel = make_kernel(config);
    GaAdaptiveOptions options;
    options.schedule = config.schedule;
    options.subsampler = config.sampler.subsampler;
    options.hvs = config.hvs;
    options.surrogate = config.surrogate;
    options.ga = config.ga;
    options.jobs = g_jobs;
    options.rng_seed = seed;

    SampleStore store =
        sampler == "ga-adaptive"
            ? ga_adaptive(config.space, *kernel, config.eval, options)
            : run_sampler(config.space, *kernel, config.eval, subsampler_from_string(sampler),
                          options);

    SamplerRun run;
    run.model = fit(dataset_of(config.space, store), config.surrogate);
    auto grid = input_grid(config.space, config.optimization_grid);
    GaConfig ga = config.ga;
    ga.rng_seed = derive_seed(seed, 0x9a1d);
    run.points = optimize_grid(run.model, config.space, grid.points, ga, g_jobs);
    return run;
}

// ---------------------------------------------------------------------------
// Criteria
// ---------------------------------------------------------------------------

// Oracle optimality on the enumerable kernel: the pipeline's tree decisions
// land within 5% of the brute-force optimum in geomean, median of 5 seeds.
Outcome criterion_1() {
    auto space = builtin_space("discrete");
    auto grid = input_grid(space, {8, 8});

    double log_opt = 0.0;
    std::vector<BruteForceBest> oracle;
    for (const auto& input : grid.points) {
        oracle.push_back(brute_force_best("discrete", space, input));
        log_opt += std::log(oracle.back().objective);
    }
    log_opt /= static_cast<double>(grid.points.size());

    std::vector<double> ratios;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TempDir tmp;
        auto config = discrete_experiment(seed, tmp.file("out"));
        auto result = run_pipeline(config, g_jobs, true);
        double log_tree = 0.0;
        for (const auto& input : grid.points) {
            auto design = predict_config(result.trees, space, input);
            log_tree += std::log(builtin_objective("discrete", space,
                                                   combine(space, input, design)));
        }
        log_tree /= static_cast<double>(grid.points.size());
        ratios.push_back(std::exp(log_tree - log_opt));
    }

    const double med = median_of(ratios);
    std::ostringstream detail;
    detail << "geomean(tree)/geomean(opt) median " << med << " (per seed:";
    for (double r : ratios) detail << " " << r;
    detail << "), threshold 1.05";
    return {med <= 1.05, detail.str()};
}

// Local accuracy ordering: the adaptive sampler's surrogate must be the most
// accurate on its own predicted-best points.
Outcome criterion_2() {
    std::map<std::string, std::vector<double>> local;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TempDir tmp;
        auto config = cliff_experiment(seed, tmp.file("out"));
        auto kernel = make_kernel(config);
        for (const std::string sampler : {"ga-adaptive", "lhs", "random"}) {
            auto run = sampler_run(config, sampler, derive_seed(seed, fnv1a(sampler)));
            local[sampler].push_back(
                local_accuracy(*kernel, config.space, run.points, config.eval, g_jobs));
        }
    }
    const double ga = median_of(local["ga-adaptive"]);
    const double lhs = median_of(local["lhs"]);
    const double rnd = median_of(local["random"]);
    std::ostringstream detail;
    detail << "median local MAE: ga-adaptive " << ga << ", lhs " << lhs << ", random " << rnd;
    return {ga < lhs && ga < rnd, detail.str()};
}

// Global accuracy ordering on a 5k random holdout. HVS leads, the adaptive
// sampler trails; 10% slack on each inequality.
Outcome criterion_3() {
    std::map<std::string, std::vector<double>> global;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        TempDir tmp;
        auto config = cliff_experiment(seed, tmp.file("out"));
        auto kernel = make_kernel(config);

        auto holdout = random_sample(config.space, 5000, derive_seed(seed, 0x401d));
        auto records = evaluate_batch(*kernel, config.space, holdout, g_jobs, config.eval);
        std::vector<std::vector<double>> rows;
        std::vector<double> truth;
        for (const auto& r : records) {
            rows.push_back(encode(config.space, r.config));
            truth.push_back(r.objective);
        }

        for (const std::string sampler : {"hvs", "lhs", "ga-adaptive"}) {
            auto run = sampler_run(config, sampler, derive_seed(seed, fnv1a(sampler)));
            global[sampler].push_back(metrics(run.model.predict_batch(rows), truth).mae);
        }
    }
    const double hvs = median_of(global["hvs"]);
    const double lhs = median_of(global["lhs"]);
    const double ga = median_of(global["ga-adaptive"]);
    std::ostringstream detail;
    detail << "median global MAE: hvs " << hvs << ", lhs " << lhs << ", ga-adaptive " << ga;
    return {hvs <= 1.1 * lhs && lhs <= 1.1 * ga, detail.str()};
}

// Algorithm accounting: exact sample totals, bootstrap counts and epsilon
// schedule across a random sweep of schedule parameters.
Outcome criterion_4() {
    auto space = builtin_space("quad");
    BuiltinKernel kernel("quad");
    Rng rng(404);

    for (int trial = 0; trial < 12; ++trial) {
        ScheduleParams schedule;
        schedule.total = 80 + rng.below(300);
        schedule.per_iteration = 10 + rng.below(40);
        if (schedule.per_iteration > schedule.total)
            schedule.per_iteration = schedule.total;
        schedule.bootstrap_ratio = 0.05 + 0.4 * rng.uniform01();
        schedule.initial_ga_ratio = 0.5 * rng.uniform01();
        schedule.final_ga_ratio =
            schedule.initial_ga_ratio + (1.0 - schedule.initial_ga_ratio) * rng.uniform01();
        if (schedule.bootstrap_count() < 1 || schedule.bootstrap_count() >= schedule.total)
            continue;

        GaAdaptiveOptions options;
        options.schedule = schedule;
        options.surrogate.n_trees = 5;
        options.surrogate.max_depth = 2;
        options.surrogate.min_leaf = 2;
        options.ga.population = 4;
        options.ga.generations = 2;
        options.jobs = g_jobs;
        options.rng_seed = rng.next();

        std::vector<IterationLog> logs;
        options.on_iteration = [&](const IterationLog& log) { logs.push_back(log); };
        auto store = ga_adaptive(space, kernel, {}, options);

        // independent oracle: round() here is llround, i.e. half away from zero
        const auto expected_bootstrap = static_cast<std::size_t>(
            std::llround(schedule.bootstrap_ratio * static_cast<double>(schedule.total)));
        if (store.size() != schedule.total)
            return {false, "total " + std::to_string(store.size()) + " != n " +
                               std::to_string(schedule.total)};
        if (schedule.bootstrap_count() != expected_bootstrap)
            return {false, "bootstrap count mismatch"};
        std::size_t expected_size = expected_bootstrap;
        for (const auto& log : logs) {
            if (log.store_size_before != expected_size)
                return {false, "iteration started at an unexpected store size"};
            const double p =
                static_cast<double>(log.store_size_before) / static_cast<double>(schedule.total);
            const double eps = schedule.initial_ga_ratio +
                               (schedule.final_ga_ratio - schedule.initial_ga_ratio) * p;
            if (std::fabs(log.epsilon - eps) > 1e-12)
                return {false, "epsilon deviates from i + (f-i)p"};
            const std::size_t take =
                std::min(schedule.per_iteration, schedule.total - log.store_size_before);
            const auto expected_ga = static_cast<std::size_t>(
                std::llround(eps * static_cast<double>(take)));
            if (log.ga_requested != std::min(expected_ga, take))
                return {false, "GA point count deviates from round(eps*s)"};
            expected_size += take;
        }
        if (expected_size != schedule.total) return {false, "iteration sizes do not sum to n"};
    }

    // the worked schedule value: i=0, f=0.8 at 50% completion gives eps=0.4,
    // i.e. the GA picks 40% of the iteration's points
    GaAdaptiveOptions options;
    options.schedule.bootstrap_ratio = 0.2;
    options.schedule.initial_ga_ratio = 0.0;
    options.schedule.final_ga_ratio = 0.8;
    options.schedule.per_iteration = 100;
    options.schedule.total = 1000;
    options.surrogate.n_trees = 5;
    options.surrogate.max_depth = 2;
    options.surrogate.min_leaf = 2;
    options.ga.population = 4;
    options.ga.generations = 2;
    options.jobs = g_jobs;
    options.rng_seed = 77;
    bool saw_worked_value = false;
    options.on_iteration = [&](const IterationLog& log) {
        if (log.store_size_before == 500) {
            if (std::fabs(log.epsilon - 0.4) <= 1e-12 && log.ga_requested == 40)
                saw_worked_value = true;
        }
    };
    (void)ga_adaptive(space, kernel, {}, options);
    if (!saw_worked_value) return {false, "eps at p=0.5 with (i=0, f=0.8) did not equal 0.4"};

    return {true, "12-config random sweep plus the worked eps=0.4 value"};
}

// LHS stratification, exhaustively over k, dimension count and seeds.
Outcome criterion_5() {
    for (std::size_t dims = 1; dims <= 6; ++dims) {
        std::vector<ParameterSpec> params;
        for (std::size_t d = 0; d < dims; ++d)
            params.push_back(ParameterSpec::real("x" + std::to_string(d),
                                                 d == 0 ? ParamRole::Input : ParamRole::Design,
                                                 -1.0 + static_cast<double>(d),
                                                 2.0 + 3.0 * static_cast<double>(d)));
        if (dims == 1)
            params.push_back(ParameterSpec::categorical("pad", ParamRole::Design, {"o"}));
        ParameterSpace space(params);

        for (std::size_t k = 1; k <= 64; ++k) {
            for (std::uint64_t seed = 0; seed < 100; ++seed) {
                auto configs = lhs_sample(space, k, seed * 7919 + k);
                for (std::size_t d = 0; d < dims; ++d) {
                    const auto& p = space.param(d);
                    std::vector<int> counts(k, 0);
                    for (const auto& c : configs) {
                        const double v = std::get<double>(c.values[d]);
                        double f = (v - p.low) / (p.high - p.low) * static_cast<double>(k);
                        auto s = static_cast<long long>(std::floor(f));
                        s = std::clamp<long long>(s, 0, static_cast<long long>(k) - 1);
                        ++counts[static_cast<std::size_t>(s)];
                    }
                    for (std::size_t s = 0; s < k; ++s)
                        if (counts[s] != 1)
                            return {false, "k=" + std::to_string(k) + " dims=" +
                                               std::to_string(dims) + " seed=" +
                                               std::to_string(seed) + ": stratum " +
                                               std::to_string(s) + " holds " +
                                               std::to_string(counts[s]) + " samples"};
                }
            }
        }
    }
    return {true, "one sample per stratum for k in 1..64, dims 1..6, 100 seeds"};
}

// HVS allocation arithmetic.
Outcome criterion_6() {
    auto alloc = allocate_proportional({0.5 * 4.0, 0.5 * 1.0}, 10);
    if (alloc != std::vector<std::size_t>{8, 2})
        return {false, "two-leaf fixture gave " + std::to_string(alloc[0]) + ":" +
                           std::to_string(alloc[1]) + ", expected 8:2"};

    Rng rng(606);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t m = 1 + rng.below(16);
        std::vector<double> priorities;
        for (std::size_t i = 0; i < m; ++i)
            priorities.push_back(rng.below(5) == 0 ? 0.0 : rng.uniform01());
        const std::size_t k = rng.below(200);
        auto a = allocate_proportional(priorities, k);
        std::size_t total = 0;
        for (std::size_t i = 0; i < m; ++i) total += a[i];
        if (total != k) return {false, "allocation does not sum to k"};
        // largest-remainder shares never differ from the exact share by >= 1
        double sum_p = 0.0;
        for (double p : priorities) sum_p += p;
        if (sum_p > 0.0) {
            for (std::size_t i = 0; i < m; ++i) {
                const double share = static_cast<double>(k) * priorities[i] / sum_p;
                if (static_cast<double>(a[i]) < std::floor(share) ||
                    static_cast<double>(a[i]) > std::ceil(share))
                    return {false, "allocation outside the floor/ceil of its share"};
            }
        }
    }
    return {true, "fixture 8:2 plus 300 random share checks"};
}

// GBDT training behavior: monotone L2 loss and 2-point interpolation.
Outcome criterion_7() {
    Rng rng(707);
    for (int trial = 0; trial < 50; ++trial) {
        Dataset data;
        const std::size_t n = 20 + rng.below(150);
        const std::size_t d = 1 + rng.below(4);
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> row;
            for (std::size_t j = 0; j < d; ++j) row.push_back(rng.uniform(-5, 5));
            data.rows.push_back(row);
            data.targets.push_back(rng.uniform(-10, 10));
        }
        TrainConfig cfg;
        cfg.n_trees = 25;
        cfg.max_depth = 1 + static_cast<int>(rng.below(5));
        cfg.min_leaf = 1 + static_cast<int>(rng.below(4));
        cfg.learning_rate = 0.05 + 0.5 * rng.uniform01();
        auto model = fit(data, cfg);
        double prev = std::numeric_limits<double>::infinity();
        for (double loss : model.stage_train_loss) {
            if (loss > prev + 1e-12)
                return {false, "stage loss increased on trial " + std::to_string(trial)};
            prev = loss;
        }
    }

    for (int trial = 0; trial < 10; ++trial) {
        const double x0 = rng.uniform(-3, 3);
        const double x1 = x0 + 0.5 + rng.uniform01();
        Dataset data;
        data.rows = {{x0}, {x1}};
        data.targets = {rng.uniform(-4, 4), rng.uniform(-4, 4)};
        TrainConfig cfg;
        cfg.n_trees = 80;
        cfg.max_depth = 1;
        cfg.min_leaf = 1;
        cfg.learning_rate = 0.5;
        auto model = fit(data, cfg);
        double mse = 0.0;
        for (int i = 0; i < 2; ++i) {
            const double e = model.predict(data.rows[static_cast<std::size_t>(i)]) -
                             data.targets[static_cast<std::size_t>(i)];
            mse += 0.5 * e * e;
        }
        if (!(mse < 1e-6))
            return {false, "2-point MSE " + format_g17(mse) + " not below 1e-6"};
    }
    return {true, "50 random datasets monotone; 2-point MSE < 1e-6"};
}

// GA behavior: sphere optimum, transform invariance, brute-force match.
Outcome criterion_8() {
    ParameterSpace sphere_space({
        ParameterSpec::real("x", ParamRole::Input, 0, 1),
        ParameterSpec::real("d0", ParamRole::Design, 0, 1),
        ParameterSpec::real("d1", ParamRole::Design, 0, 1),
        ParameterSpec::real("d2", ParamRole::Design, 0, 1),
    });
    auto sphere = [](const std::vector<Value>& design) {
        double acc = 0.0;
        for (const auto& v : design) {
            const double dd = std::get<double>(v) - 0.3;
            acc += dd * dd;
        }
        return acc;
    };
    GaConfig cfg;
    cfg.population = 64;
    cfg.generations = 100;
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
        cfg.rng_seed = seed;
        auto result = ga_minimize(sphere, sphere_space, cfg);
        if (!(result.value < 1e-3))
            return {false, "sphere best " + format_g17(result.value) + " not below 1e-3"};
        auto transformed = ga_minimize(
            [&](const std::vector<Value>& d) { return std::exp(sphere(d)); }, sphere_space, cfg);
        if (!(transformed.design_values == result.design_values))
            return {false, "argmin changed under the exp transform"};
    }

    ParameterSpace lattice({
        ParameterSpec::real("x", ParamRole::Input, 0, 1),
        ParameterSpec::integer("a", ParamRole::Design, 1, 16),
        ParameterSpec::integer("b", ParamRole::Design, 1, 16),
    });
    auto objective = [](const std::vector<Value>& design) {
        const auto a = static_cast<double>(std::get<long long>(design[0]));
        const auto b = static_cast<double>(std::get<long long>(design[1]));
        const std::uint64_t h =
            splitmix64(0x88ull ^ splitmix64(static_cast<std::uint64_t>(a * 131 + b)));
        return 0.04 * (a - 5) * (a - 5) + 0.04 * (b - 13) * (b - 13) +
               0.6 * (static_cast<double>(h >> 11) * 0x1.0p-53);
    };
    double best = std::numeric_limits<double>::infinity();
    for (long long a = 1; a <= 16; ++a)
        for (long long b = 1; b <= 16; ++b) best = std::min(best, objective({a, b}));

    GaConfig small;
    small.population = 32;
    small.generations = 50;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        small.rng_seed = seed;
        auto result = ga_minimize(objective, lattice, small);
        if (result.value != best)
            return {false, "seed " + std::to_string(seed) + " missed the brute-force optimum"};
    }
    return {true, "sphere < 1e-3; exp-transform invariant; 5/5 brute-force matches"};
}

// Emitted C agrees bit-exactly with predict_config over a dense input sweep
// for 20 randomly generated tree sets.
Outcome criterion_9() {
    Rng rng(909);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<ParameterSpec> params;
        params.push_back(rng.below(2)
                             ? ParameterSpec::real("u", ParamRole::Input, 0, 100)
                             : ParameterSpec::integer("u", ParamRole::Input, 0, 1000));
        params.push_back(rng.below(2)
                             ? ParameterSpec::real("v", ParamRole::Input, -50, 50)
                             : ParameterSpec::integer("v", ParamRole::Input, -500, 500));
        params.push_back(ParameterSpec::real("dr", ParamRole::Design, -1, 1));
        params.push_back(ParameterSpec::integer("di", ParamRole::Design, 1, 97));
        if (rng.below(2))
            params.push_back(
                ParameterSpec::categorical("dc", ParamRole::Design, {"aa", "bb", "cc", "dd"}));
        ParameterSpace space(params);

        std::vector<OptimizedPoint> points;
        const std::size_t n_points = 20 + rng.below(60);
        for (std::size_t i = 0; i < n_points; ++i) {
            OptimizedPoint p;
            for (std::size_t dim : space.input_dims()) {
                const auto& spec = space.param(dim);
                p.input_values.push_back(
                    spec.kind == ParamKind::Real
                        ? Value(rng.uniform(spec.low, spec.high))
                        : Value(rng.uniform_int(static_cast<long long>(spec.low),
                                                static_cast<long long>(spec.high))));
            }
            for (std::size_t dim : space.design_dims()) {
                const auto& spec = space.param(dim);
                if (spec.kind == ParamKind::Real)
                    p.design_values.emplace_back(rng.uniform(spec.low, spec.high));
                else if (spec.kind == ParamKind::Integer)
                    p.design_values.emplace_back(rng.uniform_int(
                        static_cast<long long>(spec.low), static_cast<long long>(spec.high)));
                else
                    p.design_values.emplace_back(
                        spec.categories[rng.below(spec.categories.size())]);
            }
            points.push_back(std::move(p));
        }
        auto trees = build_trees(points, space, 1 + static_cast<int>(rng.below(8)));

        auto grid = input_grid(space, {100, 100});
        std::vector<std::vector<double>> sweep;
        for (const auto& input : grid.points)
            sweep.push_back(encode_subspace(space, space.input_dims(), input));

        TempDir tmp;
        auto compiled = run_compiled_sweep(trees, space, sweep, tmp);
        for (std::size_t i = 0; i < grid.points.size(); ++i) {
            auto design = predict_config(trees, space, grid.points[i]);
            for (std::size_t j = 0; j < design.size(); ++j) {
                const auto& spec = space.param(space.design_dims()[j]);
                if (compiled[i][j] != design_value_as_double(spec, design[j]))
                    return {false, "trial " + std::to_string(trial) + ": mismatch at sweep row " +
                                       std::to_string(i)};
            }
        }
    }
    return {true, "20 random tree sets, dense sweeps bit-exact"};
}

// Expert merge on the cliff kernel: the merged tree never loses to either
// source on the label inputs, and never regresses against the reference.
Outcome criterion_10() {
    TempDir tmp;
    auto config = cliff_experiment(5, tmp.file("out"));
    config.schedule.total = 800;
    config.schedule.per_iteration = 80;
    config.optimization_grid = {24};
    auto result = run_pipeline(config, g_jobs, true);

    auto space = config.space;
    auto kernel = make_kernel(config);
    auto grid = input_grid(space, {16});
    std::vector<std::vector<Value>> inputs = grid.points;
    std::vector<std::vector<Value>> reference(inputs.size(), builtin_baseline("cliff"));

    auto outcome = expert_merge(inputs, result.trees, reference, *kernel, space, config.eval,
                                g_jobs);
    if (outcome.dropped != 0) return {false, "merge dropped inputs on a deterministic kernel"};

    std::size_t regressions = 0;
    double worst_ratio = 0.0;
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        auto cand_design = predict_config(result.trees, space, inputs[i]);
        auto merged_design = predict_config(outcome.merged, space, inputs[i]);
        const double cand =
            builtin_objective("cliff", space, combine(space, inputs[i], cand_design));
        const double ref =
            builtin_objective("cliff", space, combine(space, inputs[i], reference[i]));
        const double merged =
            builtin_objective("cliff", space, combine(space, inputs[i], merged_design));
        worst_ratio = std::max(worst_ratio, merged / std::min(cand, ref));
        if (merged > ref) ++regressions;
    }
    std::ostringstream detail;
    detail << "worst merged/min ratio " << worst_ratio << " (threshold 1.02), regressions "
           << regressions;
    return {worst_ratio <= 1.02 && regressions == 0, detail.str()};
}

// Bound reformulation endpoints and monotonicity over random contexts.
Outcome criterion_11() {
    ParameterSpace space({
        ParameterSpec::integer("m", ParamRole::Input, 1000, 10000),
        ParameterSpec::integer("n", ParamRole::Input, 1000, 10000),
        ParameterSpec::integer("p", ParamRole::Input, 1, 16),
        ParameterSpec::integer("np", ParamRole::Input, 256, 4096),
        ParameterSpec::real("mb", ParamRole::Design, 1, 16),
        ParameterSpec::real("npernode", ParamRole::Design, 1, 30),
        ParameterSpec::real("nb", ParamRole::Design, 1, 16),
    });

    BoundReformulation mb;
    mb.target = "mb";
    mb.alpha_name = "alpha";
    mb.lower_expr = BoundExpr::parse("1");
    mb.upper_expr = BoundExpr::parse("min(m / (8 * p), 16)");

    BoundReformulation npernode;
    npernode.target = "npernode";
    npernode.alpha_name = "beta";
    npernode.lower_expr = BoundExpr::parse("p");
    npernode.upper_expr = BoundExpr::parse("30");

    BoundReformulation nb;
    nb.target = "nb";
    nb.alpha_name = "gamma";
    nb.lower_expr = BoundExpr::parse("1");
    nb.upper_expr = BoundExpr::parse("min(np / (8 * npernode), 16)");

    Rng rng(1111);
    const double tol = 1e-12;
    for (int trial = 0; trial < 1000; ++trial) {
        Configuration ctx{{rng.uniform_int(1000, 10000), rng.uniform_int(1000, 10000),
                           rng.uniform_int(1, 16), rng.uniform_int(256, 4096), 1.0, 1.0, 1.0}};

        const double m = static_cast<double>(std::get<long long>(ctx.values[0]));
        const double p = static_cast<double>(std::get<long long>(ctx.values[2]));
        const double np_total = static_cast<double>(std::get<long long>(ctx.values[3]));

        const double mb0 = std::get<double>(apply_reformulation(mb, 0.0, space, ctx));
        const double mb1 = std::get<double>(apply_reformulation(mb, 1.0, space, ctx));
        const double mb_ub = std::min(m / (8.0 * p), 16.0);
        if (mb0 != 1.0) return {false, "mb alpha=0 endpoint is not lb"};
        if (std::fabs(mb1 - mb_ub) > tol * std::max(1.0, std::fabs(mb_ub)))
            return {false, "mb alpha=1 endpoint is not ub"};

        const double pn0 = std::get<double>(apply_reformulation(npernode, 0.0, space, ctx));
        const double pn1 = std::get<double>(apply_reformulation(npernode, 1.0, space, ctx));
        if (pn0 != p || pn1 != 30.0) return {false, "npernode endpoints wrong"};

        // npernode feeds nb's upper bound; pick it at a random beta
        const double beta = rng.uniform01();
        ctx.values[5] = std::get<double>(apply_reformulation(npernode, beta, space, ctx));
        const double nb0 = std::get<double>(apply_reformulation(nb, 0.0, space, ctx));
        const double nb1 = std::get<double>(apply_reformulation(nb, 1.0, space, ctx));
        const double nb_ub = std::min(np_total / (8.0 * std::get<double>(ctx.values[5])), 16.0);
        if (nb0 != 1.0) return {false, "nb alpha=0 endpoint is not lb"};
        if (std::fabs(nb1 - nb_ub) > tol * std::max(1.0, std::fabs(nb_ub)))
            return {false, "nb alpha=1 endpoint is not ub"};

        // monotonicity in alpha
        double prev = -1.0;
        for (int step = 0; step <= 10; ++step) {
            const double alpha = static_cast<double>(step) / 10.0;
            const double v = std::get<double>(apply_reformulation(mb, alpha, space, ctx));
            if (v < prev) return {false, "mb not monotone in alpha"};
            prev = v;
        }
    }
    return {true, "1000 random contexts: endpoints exact, monotone in alpha"};
}

// Two serial CLI runs with the same config and seed produce byte-identical
// artifacts.
Outcome criterion_12() {
    if (g_tune_bin.empty()) return {false, "path to the tune binary not provided (--tune)"};
    TempDir tmp;
    const std::string config_text = std::string("{\n")
        + "  \"kernel\": {\"builtin\": \"quad\"},\n"
        + "  \"sampler\": {\"name\": \"ga-adaptive\", \"b\": 0.2, \"s\": 80, \"n\": 400},\n"
        + "  \"surrogate\": {\"n_trees\": 50, \"max_depth\": 5, \"min_leaf\": 3},\n"
        + "  \"ga\": {\"population\": 16, \"generations\": 12},\n"
        + "  \"optimization_grid\": [6, 6],\n"
        + "  \"tree_depth\": 6,\n"
        + "  \"validation\": {\"grid\": [5, 5]},\n"
        + "  \"seed\": 20260301\n"
        + "}\n";
    write_text(tmp.file("config.json"), config_text);

    for (const char* dir : {"a", "b"}) {
        const std::string cmd = g_tune_bin + " --quiet --jobs 1 run " + tmp.file("config.json") +
                                " --output " + tmp.file(dir) + " > /dev/null 2>&1";
        if (std::system(cmd.c_str()) != 0)
            return {false, std::string("tune run failed for dir ") + dir};
    }
    for (const char* name : {"samples.csv", "model.txt", "optimized_points.csv", "trees.c"}) {
        if (read_text(tmp.file(std::string("a/") + name)) !=
            read_text(tmp.file(std::string("b/") + name)))
            return {false, std::string(name) + " differs between the two runs"};
    }
    return {true, "samples.csv, model.txt, optimized_points.csv, trees.c byte-identical"};
}

struct Criterion {
    int id;
    const char* title;
    std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
    static const std::vector<Criterion> all = {
        {1, "oracle optimality on the discrete kernel (budget 3000, 5 seeds)", criterion_1},
        {2, "local accuracy ordering on cliff (ga-adaptive best, 5 seeds)", criterion_2},
        {3, "global accuracy ordering on cliff (hvs <= lhs <= ga-adaptive, 5 seeds)",
         criterion_3},
        {4, "adaptive schedule accounting (totals, bootstrap, epsilon)", criterion_4},
        {5, "LHS marginal stratification (k 1..64, dims 1..6, 100 seeds)", criterion_5},
        {6, "HVS largest-remainder allocation", criterion_6},
        {7, "GBDT monotone training loss and 2-point interpolation", criterion_7},
        {8, "GA sphere optimum, transform invariance, brute-force match", criterion_8},
        {9, "emitted C conformance on 100x100 sweeps (20 tree sets)", criterion_9},
        {10, "expert merge never loses on label inputs", criterion_10},
        {11, "bound reformulation endpoints and monotonicity", criterion_11},
        {12, "serial determinism of the CLI artifacts", criterion_12},
    };
    return all;
}

} // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        else if (std::strcmp(argv[i], "--jobs") == 0 && i + 1 < argc)
            g_jobs = static_cast<unsigned>(std::atoi(argv[++i]));
        else if (std::strcmp(argv[i], "--tune") == 0 && i + 1 < argc)
            g_tune_bin = argv[++i];
        else {
            std::fprintf(stderr, "usage: acceptance [--only N] [--jobs J] [--tune PATH]\n");
            return 2;
        }
    }
    if (g_tune_bin.empty() && std::getenv("TUNE_BIN")) g_tune_bin = std::getenv("TUNE_BIN");

    int failures = 0;
    for (const auto& criterion : criteria()) {
        if (only != 0 && criterion.id != only) continue;
        Outcome outcome;
        try {
            outcome = criterion.run();
        } catch (const std::exception& e) {
            outcome = {false, std::string("exception: ") + e.what()};
        }
        std::printf("[%s] criterion %d: %s — %s\n", outcome.pass ? "PASS" : "FAIL", criterion.id,
                    criterion.title, outcome.detail.c_str());
        std::fflush(stdout);
        if (!outcome.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}
