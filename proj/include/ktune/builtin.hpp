#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ktune/driver.hpp"
#include "ktune/space.hpp"

namespace ktune {

// Synthetic kernels used for tests, demos and sampler benchmarks. All three
// are pure functions of the configuration; an optional hash-derived noise
// field can perturb them deterministically.
//
//   quad     2 real inputs, 2 real designs; smooth bowl with an
//            input-dependent optimum of 0.1.
//   cliff    1 integer input n, integer design T and categorical design b;
//            a 1/T ramp that flattens at the thread-saturation cliff
//            T >= ceil(n/128), plus a 0.2 penalty when b misses the
//            block size that matches n.
//   discrete tiny lattice (2 integer inputs, 3 integer designs, 512 designs
//            per input) whose objective is a seeded hash table, so the true
//            optimum is brute-force enumerable.
bool is_builtin_kernel(const std::string& name);
ParameterSpace builtin_space(const std::string& name);
double builtin_objective(const std::string& name, const ParameterSpace& space,
                         const Configuration& config);

// Default baseline design used by validation when the experiment does not
// provide one explicitly.
std::vector<Value> builtin_baseline(const std::string& name);

class BuiltinKernel : public Kernel {
public:
    explicit BuiltinKernel(std::string name, double noise_sd = 0.0,
                           std::uint64_t noise_seed = 0);
    RunResult run_once(const ParameterSpace& space, const Configuration& config) const override;

    const std::string& name() const { return name_; }

private:
    std::string name_;
    double noise_sd_;
    std::uint64_t noise_seed_;
};

// Enumerates every design configuration for `input_values` and returns the
// best (used as the brute-force oracle on the discrete kernel).
struct BruteForceBest {
    std::vector<Value> design_values;
    double objective = 0.0;
};
BruteForceBest brute_force_best(const std::string& name, const ParameterSpace& space,
                                const std::vector<Value>& input_values);

} // namespace ktune
