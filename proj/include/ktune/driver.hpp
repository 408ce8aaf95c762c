#pragma once

#include <optional>
#include <string>
#include <vector>

#include "ktune/space.hpp"

namespace ktune {

enum class ArgStyle { NamedFlags, Positional, EnvVars };
enum class Aggregate { Min, Median, Mean };
enum class SampleStatus { Ok, Failed, Timeout, Clipped };

std::string to_string(SampleStatus s);
SampleStatus status_from_string(const std::string& s);

// How to invoke a black-box kernel executable. The protocol: parameters are
// passed per arg_style (default `--name=value` flags in space order), exit
// code 0 means success, and the last stdout line is the objective value.
struct KernelCommand {
    std::string executable;
    std::vector<std::string> base_args; // prepended before parameter args
    ArgStyle arg_style = ArgStyle::NamedFlags;
    double timeout_sec = 60.0;
    int repeats = 1;
    Aggregate aggregate = Aggregate::Min;
};

// One measured kernel execution.
struct SampleRecord {
    Configuration config;
    double objective = 0.0;
    SampleStatus status = SampleStatus::Ok;
    double wall_time = 0.0;
};

// Anything that can produce an objective value for a configuration. The
// subprocess runner and the builtin synthetic kernels both implement this.
// run_once must be safe to call from multiple threads.
class Kernel {
public:
    virtual ~Kernel() = default;

    struct RunResult {
        double value = 0.0;
        SampleStatus status = SampleStatus::Ok; // Ok, Failed or Timeout
        // Self-reported wall time. Negative means "not reported": evaluate
        // then records its own measurement. Synthetic kernels report 0 so
        // their sample stores are byte-reproducible.
        double wall_time = -1.0;
    };
    virtual RunResult run_once(const ParameterSpace& space, const Configuration& config) const = 0;
};

// Runs `cmd.executable` as a child process with a hard timeout.
class SubprocessKernel : public Kernel {
public:
    explicit SubprocessKernel(KernelCommand cmd);
    RunResult run_once(const ParameterSpace& space, const Configuration& config) const override;

private:
    KernelCommand cmd_;
};

struct EvalOptions {
    int repeats = 1;
    Aggregate aggregate = Aggregate::Min;
    std::optional<double> clip;
    // Objective recorded for failed/timeout runs when no clip is set.
    double penalty = 1e9;
};

// Runs the kernel `repeats` times and aggregates. Values above the clip bound
// are recorded as status=clipped with objective=clip; failed/timeout runs get
// the clip value (or the penalty when no clip is set).
SampleRecord evaluate(const Kernel& kernel, const ParameterSpace& space,
                      const Configuration& config, const EvalOptions& opts);

SampleRecord evaluate(const KernelCommand& cmd, const ParameterSpace& space,
                      const Configuration& config, std::optional<double> clip);

// Results are aligned with the input order and identical for any parallelism
// on a deterministic kernel.
std::vector<SampleRecord> evaluate_batch(const Kernel& kernel, const ParameterSpace& space,
                                         const std::vector<Configuration>& configs,
                                         unsigned parallelism, const EvalOptions& opts);

// Append-only record of all measurements taken for one parameter space.
class SampleStore {
public:
    explicit SampleStore(const ParameterSpace& space);

    void append(SampleRecord record);
    void append(const std::vector<SampleRecord>& records);

    const std::vector<SampleRecord>& records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    const ParameterSpace& space() const { return space_; }
    std::uint64_t fingerprint() const { return fingerprint_; }

    // Records usable for model fitting / partitioning.
    std::size_t count_with_status(SampleStatus a, SampleStatus b) const;

    bool operator==(const SampleStore& other) const;

private:
    ParameterSpace space_;
    std::uint64_t fingerprint_;
    std::vector<SampleRecord> records_;
};

// CSV with a `# space_fingerprint=<hex>` comment line, then a header of
// parameter names plus objective,status,wall_time. Reals use 17 significant
// digits so the round-trip is bit-exact.
void persist(const SampleStore& store, const std::string& path);
SampleStore load_store(const std::string& path, const ParameterSpace& space);

} // namespace ktune
