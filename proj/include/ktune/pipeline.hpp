#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ktune/builtin.hpp"
#include "ktune/codegen.hpp"
#include "ktune/driver.hpp"
#include "ktune/optimize.hpp"
#include "ktune/sampling.hpp"
#include "ktune/space.hpp"
#include "ktune/surrogate.hpp"

namespace ktune {

// Validation baseline: a fixed design configuration, or a per-input table
// loaded from CSV (input columns then design columns, space order).
struct BaselineSpec {
    std::vector<Value> fixed_design;                   // used when reference_csv empty
    std::string reference_csv;
    bool from_builtin_default = false;

    bool is_table() const { return !reference_csv.empty(); }
};

struct SamplerChoice {
    std::string name = "ga-adaptive"; // ga-adaptive | hvs | hvs-cv | lhs | random
    Subsampler subsampler = Subsampler::HvsCv; // ga-adaptive exploration sampler
};

struct ExperimentConfig {
    ParameterSpace space;

    std::string builtin;            // builtin kernel name, empty for subprocess
    double builtin_noise_sd = 0.0;
    KernelCommand command;          // used when builtin is empty

    EvalOptions eval; // repeats/aggregate copied from command for subprocess runs

    SamplerChoice sampler;
    ScheduleParams schedule;
    HvsParams hvs;

    TrainConfig surrogate;
    GaConfig ga;

    std::vector<std::size_t> optimization_grid;
    int tree_depth = 8;

    std::vector<std::size_t> validation_grid;
    BaselineSpec baseline;

    std::uint64_t seed = 0;
    std::string output_dir = "tune-out";

    void validate() const;
};

// Parses and validates the JSON experiment document; error messages carry the
// offending path (e.g. "sampler.b: must be in (0,1)").
ExperimentConfig parse_experiment(const std::string& json_text);
ExperimentConfig load_experiment(const std::string& path);
std::string experiment_to_json(const ExperimentConfig& config);

// The kernel named by the config (builtin or subprocess).
std::unique_ptr<Kernel> make_kernel(const ExperimentConfig& config);

struct ValidationRow {
    std::vector<Value> input_values;
    std::vector<Value> tuned_design;
    std::vector<Value> baseline_design;
    double tuned_objective = 0.0;
    double baseline_objective = 0.0;
    double speedup = 0.0; // baseline / tuned
    bool ok = true;
};

struct ValidationReport {
    std::vector<ValidationRow> rows;
    std::size_t failures = 0; // rows excluded from the aggregates
    double geomean_speedup = 1.0;
    double pct_progressions = 0.0; // speedup > 1
    double pct_regressions = 0.0;  // speedup < 1
    double mean_progression_speedup = 0.0;
    double mean_regression_slowdown = 0.0;
};

// Measures the tree-tuned and baseline configurations on every input of a
// regular validation grid.
ValidationReport validate_trees(const TuningTrees& trees, const ExperimentConfig& config,
                                const Kernel& kernel,
                                const std::vector<std::size_t>& grid_dims, unsigned jobs = 1);

void save_validation(const ValidationReport& report, const ParameterSpace& space,
                     const std::string& csv_path, const std::string& report_path);

// Output directory layout.
struct ArtifactPaths {
    std::string dir;
    std::string config() const { return dir + "/config.json"; }
    std::string samples() const { return dir + "/samples.csv"; }
    std::string model() const { return dir + "/model.txt"; }
    std::string optimized_points() const { return dir + "/optimized_points.csv"; }
    std::string trees() const { return dir + "/trees.txt"; }
    std::string trees_c() const { return dir + "/trees.c"; }
    std::string validation() const { return dir + "/validation.csv"; }
    std::string report() const { return dir + "/report.txt"; }
};

struct PipelineResult {
    SampleStore store;
    GbdtModel model;
    std::vector<OptimizedPoint> optimized_points;
    TuningTrees trees;
    ValidationReport validation;
};

// Runs the staged pipeline (sample -> model -> optimize -> trees -> emit ->
// validate), persisting each artifact before the next stage starts. Stages
// whose artifact already exists in the output directory are loaded instead of
// recomputed, which makes interrupted runs resumable; with jobs=1 and a fixed
// seed the artifacts are byte-reproducible.
PipelineResult run_pipeline(const ExperimentConfig& config, unsigned jobs = 1,
                            bool quiet = false);

// Reloads the config stored in an output directory and completes the run.
PipelineResult resume_pipeline(const std::string& output_dir, unsigned jobs = 1,
                               bool quiet = false);

// Per-input reference table (CSV: input columns then design columns).
std::vector<std::pair<std::vector<Value>, std::vector<Value>>> load_reference_table(
    const std::string& path, const ParameterSpace& space);

struct SamplerBenchRow {
    std::string sampler;
    double global_mae = 0.0;
    double global_rmse = 0.0;
    double local_mae = 0.0;
    double geomean_speedup = 0.0;
};

// Runs each sampler at the configured budget, then reports surrogate global
// accuracy on a shared random holdout, local accuracy on each sampler's
// predicted-best points, and the tuned-tree geomean speedup.
std::vector<SamplerBenchRow> bench_samplers(const ExperimentConfig& config,
                                            const std::vector<std::string>& samplers,
                                            std::size_t holdout_size, unsigned jobs = 1,
                                            bool quiet = false);

} // namespace ktune
