// Command-line front end for the tuning pipeline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "ktune/pipeline.hpp"
#include "ktune/util.hpp"

namespace fs = std::filesystem;
using namespace ktune;

namespace {

std::vector<std::size_t> parse_grid(const std::string& text) {
    std::vector<std::size_t> dims;
    std::string cur;
    auto flush = [&] {
        if (cur.empty()) throw ConfigError("--grid: expected counts like 16x16");
        dims.push_back(static_cast<std::size_t>(parse_int(cur, "--grid")));
        cur.clear();
    };
    for (char c : text) {
        if (c == 'x' || c == 'X')
            flush();
        else
            cur.push_back(c);
    }
    flush();
    return dims;
}

ExperimentConfig load_config_for(const std::string& config_path, std::optional<long long> seed,
                                 std::optional<std::string> output_dir) {
    ExperimentConfig config = load_experiment(config_path);
    if (seed) config.seed = static_cast<std::uint64_t>(*seed);
    if (output_dir) config.output_dir = *output_dir;
    return config;
}

void print_report(const ValidationReport& report) {
    std::printf("validation points: %zu (excluded: %zu)\n", report.rows.size(), report.failures);
    std::printf("geomean speedup:   %.4f\n", report.geomean_speedup);
    std::printf("progressions:      %.1f%% (mean speedup %.4f)\n", report.pct_progressions,
                report.mean_progression_speedup);
    std::printf("regressions:       %.1f%% (mean slowdown %.4f)\n", report.pct_regressions,
                report.mean_regression_slowdown);
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Black-box kernel auto-tuner: adaptive sampling, boosted-tree surrogate, "
                 "per-region GA optimization and decision-tree C code generation"};
    app.require_subcommand(1);
    app.fallthrough(); // global --seed/--jobs/--quiet may follow the subcommand

    std::optional<long long> seed;
    unsigned jobs = 1;
    bool quiet = false;
    app.add_option("--seed", seed, "Override the config seed")->group("Global");
    app.add_option("--jobs", jobs, "Worker threads (1 = fully reproducible)")->group("Global");
    app.add_flag("--quiet", quiet, "Suppress progress output")->group("Global");

    // run
    auto* run = app.add_subcommand("run", "Run the full pipeline from a config file");
    std::string run_config;
    std::optional<std::string> run_output;
    run->add_option("config", run_config, "Experiment config (JSON)")->required();
    run->add_option("--output", run_output, "Override the config output_dir");

    // resume
    auto* resume = app.add_subcommand("resume", "Complete a partial run from its output dir");
    std::string resume_dir;
    resume->add_option("dir", resume_dir, "Output directory of the run")->required();

    // validate
    auto* validate = app.add_subcommand("validate", "Re-validate the trees of a finished run");
    std::string validate_dir, validate_grid;
    validate->add_option("dir", validate_dir, "Output directory of the run")->required();
    validate->add_option("--grid", validate_grid, "Validation grid, e.g. 46x46");

    // emit-c
    auto* emit = app.add_subcommand("emit-c", "Emit the tuning trees as C source");
    std::string emit_dir, emit_prefix = "tuned";
    std::optional<std::string> emit_out;
    emit->add_option("dir", emit_dir, "Output directory of the run")->required();
    emit->add_option("--prefix", emit_prefix, "Function name prefix");
    emit->add_option("--out", emit_out, "Write to a file instead of stdout");

    // merge
    auto* merge = app.add_subcommand("merge", "Merge the tuned trees with reference expert "
                                              "configurations (pointwise best-of)");
    std::string merge_dir, merge_reference;
    merge->add_option("dir", merge_dir, "Output directory of the run")->required();
    merge->add_option("--reference", merge_reference,
                      "Per-input reference CSV (input columns then design columns)")
        ->required();

    // bench-samplers
    auto* bench = app.add_subcommand("bench-samplers",
                                     "Compare sampling strategies on one experiment");
    std::string bench_config;
    std::vector<std::string> bench_samplers_list = {"random", "lhs", "hvs", "ga-adaptive"};
    std::size_t bench_holdout = 5000;
    bench->add_option("config", bench_config, "Experiment config (JSON)")->required();
    bench->add_option("--samplers", bench_samplers_list, "Samplers to compare");
    bench->add_option("--holdout", bench_holdout, "Random holdout size for global accuracy");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            auto config = load_config_for(run_config, seed, run_output);
            auto result = run_pipeline(config, jobs, quiet);
            if (!quiet && !result.validation.rows.empty()) print_report(result.validation);
            return 0;
        }

        if (*resume) {
            resume_pipeline(resume_dir, jobs, quiet);
            return 0;
        }

        if (*validate) {
            ArtifactPaths paths{validate_dir};
            ExperimentConfig config = load_experiment(paths.config());
            config.output_dir = validate_dir;
            if (seed) config.seed = static_cast<std::uint64_t>(*seed);
            auto grid = validate_grid.empty() ? config.validation_grid : parse_grid(validate_grid);
            auto trees = load_trees(paths.trees());
            auto kernel = make_kernel(config);
            auto report = validate_trees(trees, config, *kernel, grid, jobs);
            save_validation(report, config.space, paths.validation(), paths.report());
            print_report(report);
            return 0;
        }

        if (*emit) {
            ArtifactPaths paths{emit_dir};
            ExperimentConfig config = load_experiment(paths.config());
            auto trees = load_trees(paths.trees());
            std::string source = emit_c(trees, config.space, emit_prefix);
            if (emit_out) {
                std::ofstream out(*emit_out, std::ios::trunc);
                if (!out) throw std::runtime_error("cannot open '" + *emit_out + "'");
                out << source;
            } else {
                std::fputs(source.c_str(), stdout);
            }
            return 0;
        }

        if (*merge) {
            ArtifactPaths paths{merge_dir};
            ExperimentConfig config = load_experiment(paths.config());
            config.output_dir = merge_dir;
            if (seed) config.seed = static_cast<std::uint64_t>(*seed);
            auto trees = load_trees(paths.trees());
            auto kernel = make_kernel(config);
            auto table = load_reference_table(merge_reference, config.space);
            std::vector<std::vector<Value>> inputs, designs;
            for (auto& [in_vals, d_vals] : table) {
                inputs.push_back(in_vals);
                designs.push_back(d_vals);
            }
            auto outcome =
                expert_merge(inputs, trees, designs, *kernel, config.space, config.eval, jobs);

            save_trees(outcome.merged, merge_dir + "/merged_trees.txt");
            std::ofstream c_out(merge_dir + "/merged_trees.c", std::ios::trunc);
            c_out << emit_c(outcome.merged, config.space, "tuned");

            std::ofstream report(merge_dir + "/merge_report.csv", std::ios::trunc);
            std::vector<std::string> header;
            for (std::size_t dim : config.space.input_dims())
                header.push_back(config.space.param(dim).name);
            header.insert(header.end(), {"candidate_objective", "reference_objective", "winner"});
            report << join_csv(header) << "\n";
            std::size_t candidate_wins = 0;
            for (const auto& row : outcome.rows) {
                std::vector<std::string> fields;
                for (const auto& v : row.input_values) fields.push_back(value_to_string(v));
                fields.push_back(format_g17(row.candidate_objective));
                fields.push_back(format_g17(row.reference_objective));
                fields.push_back(row.dropped ? "dropped"
                                             : (row.candidate_won ? "candidate" : "reference"));
                if (row.candidate_won) ++candidate_wins;
                report << join_csv(fields) << "\n";
            }
            if (!quiet)
                std::printf("merged %zu inputs: candidate won %zu, reference %zu, dropped %zu\n",
                            outcome.rows.size(), candidate_wins,
                            outcome.rows.size() - candidate_wins - outcome.dropped,
                            outcome.dropped);
            return 0;
        }

        if (*bench) {
            auto config = load_config_for(bench_config, seed, std::nullopt);
            auto rows = bench_samplers(config, bench_samplers_list, bench_holdout, jobs, quiet);
            fs::create_directories(config.output_dir);
            std::ofstream csv(config.output_dir + "/bench.csv", std::ios::trunc);
            csv << "sampler,global_mae,global_rmse,local_mae,geomean_speedup\n";
            std::printf("%-12s %12s %12s %12s %10s\n", "sampler", "global_mae", "global_rmse",
                        "local_mae", "geomean");
            for (const auto& row : rows) {
                csv << row.sampler << "," << format_g17(row.global_mae) << ","
                    << format_g17(row.global_rmse) << "," << format_g17(row.local_mae) << ","
                    << format_g17(row.geomean_speedup) << "\n";
                std::printf("%-12s %12.6f %12.6f %12.6f %10.4f\n", row.sampler.c_str(),
                            row.global_mae, row.global_rmse, row.local_mae, row.geomean_speedup);
            }
            return 0;
        }
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
