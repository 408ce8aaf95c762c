#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ktune/driver.hpp"
#include "ktune/optimize.hpp"
#include "ktune/space.hpp"
#include "ktune/surrogate.hpp"

namespace ktune {

// Schedule of the adaptive sampler: bootstrap_ratio*total LHS samples first,
// then iterations of per_iteration samples split between GA exploitation and
// the sub-sampler, with the GA share ramping linearly from initial_ga_ratio
// to final_ga_ratio as the budget fills.
struct ScheduleParams {
    double bootstrap_ratio = 0.1;  // b in (0,1)
    double initial_ga_ratio = 0.0; // i in [0,1]
    double final_ga_ratio = 1.0;   // f in [0,1]
    std::size_t per_iteration = 100; // s >= 1
    std::size_t total = 1000;        // n >= s

    std::size_t bootstrap_count() const; // round(b * n), half away from zero
    void validate() const;
};

// One leaf of the space-partition tree used by HVS.
struct Partition {
    struct Side {
        bool categorical = false;
        double low = 0.0, high = 0.0; // numeric interval (closed)
        std::vector<int> codes;       // categorical subset
    };
    std::vector<Side> box; // one side per space dimension
    std::vector<std::size_t> member_indices;
    double mean = 0.0;
    double variance = 0.0; // unbiased; 0 when fewer than 2 members
    double measure = 0.0;  // product of normalized side lengths
};

enum class HvsMode { Variance, CV };

struct HvsParams {
    HvsMode mode = HvsMode::CV;
    int max_depth = 6;
    int min_leaf = 10;
};

// I.i.d. uniform per dimension (uniform over categories), deterministic for a
// given seed.
std::vector<Configuration> random_sample(const ParameterSpace& space, std::size_t k,
                                         std::uint64_t rng_seed);

// Latin hypercube: each numeric dimension is cut into k equal strata holding
// exactly one sample (integer kinds stratify the continuous range, then
// round); categorical dimensions get labels round-robin from a shuffled
// repetition of the category list. Stratum pairings across dimensions are
// independent permutations.
std::vector<Configuration> lhs_sample(const ParameterSpace& space, std::size_t k,
                                      std::uint64_t rng_seed);

// Partition tree over the store's ok/clipped records: CART variance-reduction
// splits on encoded configurations, bounded by params.max_depth/min_leaf.
std::vector<Partition> hvs_partitions(const ParameterSpace& space, const SampleStore& store,
                                      const HvsParams& params);

// Largest-remainder proportional allocation of k among non-negative
// priorities; all-zero priorities fall back to a uniform spread.
std::vector<std::size_t> allocate_proportional(const std::vector<double>& priorities,
                                               std::size_t k);

// Hierarchical variance sampling: leaf priority is measure*variance
// (mode=Variance) or measure*stdev/max(|mean|, 1e-12) (mode=CV); k points are
// allocated across leaves proportionally and drawn uniformly inside each box.
std::vector<Configuration> hvs_next_batch(const ParameterSpace& space, const SampleStore& store,
                                          std::size_t k, const HvsParams& params,
                                          std::uint64_t rng_seed);

enum class Subsampler { HvsCv, Hvs, Lhs, Random };

std::string to_string(Subsampler s);
Subsampler subsampler_from_string(const std::string& s);

struct IterationLog {
    std::size_t index = 0;
    std::size_t store_size_before = 0;
    double progress = 0.0; // p = |S| / n
    double epsilon = 0.0;  // i + (f - i) * p
    std::size_t ga_requested = 0;
    std::size_t ga_kept = 0; // winners not colliding with existing samples
    std::size_t sub_points = 0;
};

struct GaAdaptiveOptions {
    ScheduleParams schedule;
    Subsampler subsampler = Subsampler::HvsCv;
    HvsParams hvs;
    TrainConfig surrogate;
    GaConfig ga;
    unsigned jobs = 1;
    std::uint64_t rng_seed = 0;
    // Called after the bootstrap and after every iteration; used by the
    // pipeline to checkpoint the store to disk.
    std::function<void(const SampleStore&)> checkpoint;
    std::function<void(const IterationLog&)> on_iteration;
};

// The adaptive sampling loop. Bootstraps with LHS, then alternates GA
// exploitation (one surrogate-guided GA run per randomly picked input point,
// each winner measured once) with sub-sampler exploration until exactly
// schedule.total samples are in the store. A GA winner identical to an
// existing sample is replaced by an extra sub-sampler point. Every iteration
// derives its RNG streams from rng_seed and the iteration index, so a run
// resumed from a checkpointed store is bit-identical to an uninterrupted one.
// `resume_from` must be empty or sit on a bootstrap/iteration boundary.
SampleStore ga_adaptive(const ParameterSpace& space, const Kernel& kernel,
                        const EvalOptions& eval, const GaAdaptiveOptions& options,
                        const SampleStore* resume_from = nullptr);

// Budgeted runs of the non-adaptive samplers, with the same checkpoint
// contract as ga_adaptive. HVS modes bootstrap with LHS and then iterate.
SampleStore run_sampler(const ParameterSpace& space, const Kernel& kernel,
                        const EvalOptions& eval, Subsampler sampler,
                        const GaAdaptiveOptions& options, const SampleStore* resume_from = nullptr);

} // namespace ktune
