#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ktune/driver.hpp"
#include "ktune/space.hpp"
#include "ktune/surrogate.hpp"

namespace ktune {

struct GaConfig {
    int population = 64; // even, >= 4
    int generations = 100;
    double crossover_prob = 0.9;
    std::optional<double> mutation_prob; // default 1 / |design dims|
    double eta_crossover = 15.0;
    double eta_mutation = 20.0;
    int tournament_size = 2;
    std::uint64_t rng_seed = 0;

    void validate() const;
};

// One GA run per input-grid point produces one of these.
struct OptimizedPoint {
    std::vector<Value> input_values;  // input_dims order
    std::vector<Value> design_values; // design_dims order
    double predicted_objective = 0.0;
};

using DesignObjective = std::function<double(const std::vector<Value>&)>;

struct GaResult {
    std::vector<Value> design_values;
    double value = 0.0;
    std::size_t evaluations = 0;
    // Best-ever value after initialization and after each generation;
    // non-increasing because the best individual always survives.
    std::vector<double> best_history;
};

// Minimizes the objective over the design subspace. LHS-initialized
// population, tournament selection, SBX crossover and polynomial mutation on
// numeric genes (integers rounded half-to-even and clamped), uniform crossover
// and random-reset mutation on categorical genes. The best individual always
// survives and the best ever evaluated is returned. Selection compares
// objective values only, so any strictly increasing transform of the
// objective yields the identical run. Non-finite objective values are treated
// as +inf and never win.
GaResult ga_minimize(const DesignObjective& objective, const ParameterSpace& space,
                     const GaConfig& config);

// One ga_minimize per grid point with the input dims frozen and
// objective(d) = model.predict(encode(input + d)). Point seeds derive from
// config.rng_seed by grid index, so results are reproducible for any `jobs`.
std::vector<OptimizedPoint> optimize_grid(const GbdtModel& model, const ParameterSpace& space,
                                          const std::vector<std::vector<Value>>& grid,
                                          const GaConfig& config, unsigned jobs = 1);

// Measures every optimized configuration and returns the MAE between the
// surrogate predictions carried by the points and the measurements.
double local_accuracy(const Kernel& kernel, const ParameterSpace& space,
                      const std::vector<OptimizedPoint>& points, const EvalOptions& opts,
                      unsigned jobs = 1);

void save_optimized_points(const std::vector<OptimizedPoint>& points, const ParameterSpace& space,
                           const std::string& path);
std::vector<OptimizedPoint> load_optimized_points(const std::string& path,
                                                  const ParameterSpace& space);

} // namespace ktune
