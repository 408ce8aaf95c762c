#include "ktune/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ktune/detail/split.hpp"
#include "ktune/rng.hpp"
#include "ktune/util.hpp"

namespace ktune {

namespace {

constexpr std::uint64_t kBootstrapStream = 0xb007;
constexpr std::uint64_t kSubsamplerStream = 0x5ab5;
constexpr std::uint64_t kInputPickStream = 0x16a0;
constexpr std::uint64_t kGaStream = 0x6a6a;
constexpr double kCvEpsilon = 1e-12;

} // namespace

std::size_t ScheduleParams::bootstrap_count() const {
    return static_cast<std::size_t>(std::llround(bootstrap_ratio * static_cast<double>(total)));
}

void ScheduleParams::validate() const {
    if (!(bootstrap_ratio > 0.0 && bootstrap_ratio < 1.0))
        throw ConfigError("schedule: bootstrap ratio b must be in (0,1)");
    if (initial_ga_ratio < 0.0 || initial_ga_ratio > 1.0)
        throw ConfigError("schedule: initial GA ratio i must be in [0,1]");
    if (final_ga_ratio < 0.0 || final_ga_ratio > 1.0)
        throw ConfigError("schedule: final GA ratio f must be in [0,1]");
    if (initial_ga_ratio > final_ga_ratio)
        throw ConfigError("schedule: i must be <= f (exploitation ramps up)");
    if (per_iteration < 1) throw ConfigError("schedule: s must be >= 1");
    if (total < per_iteration) throw ConfigError("schedule: n must be >= s");
    if (bootstrap_count() < 1) throw ConfigError("schedule: b*n must round to at least 1");
    if (bootstrap_count() >= total)
        throw ConfigError("schedule: bootstrap would consume the whole budget");
}

std::string to_string(Subsampler s) {
    switch (s) {
        case Subsampler::HvsCv: return "hvs-cv";
        case Subsampler::Hvs: return "hvs";
        case Subsampler::Lhs: return "lhs";
        case Subsampler::Random: return "random";
    }
    return "?";
}

Subsampler subsampler_from_string(const std::string& s) {
    if (s == "hvs-cv" || s == "hvsr") return Subsampler::HvsCv;
    if (s == "hvs") return Subsampler::Hvs;
    if (s == "lhs") return Subsampler::Lhs;
    if (s == "random") return Subsampler::Random;
    throw ConfigError("unknown sampler '" + s + "' (expected hvs-cv, hvs, lhs or random)");
}

// -----------------------------------------------------------------------------
// Space-filling samplers
// -----------------------------------------------------------------------------

std::vector<Configuration> random_sample(const ParameterSpace& space, std::size_t k,
                                         std::uint64_t rng_seed) {
    if (k < 1) throw ConfigError("random_sample: k must be >= 1");
    Rng rng(rng_seed);
    std::vector<Configuration> out;
    out.reserve(k);
    for (std::size_t s = 0; s < k; ++s) {
        Configuration config;
        config.values.reserve(space.size());
        for (const auto& p : space.params()) {
            switch (p.kind) {
                case ParamKind::Real:
                    config.values.emplace_back(rng.uniform(p.low, p.high));
                    break;
                case ParamKind::Integer:
                    config.values.emplace_back(rng.uniform_int(static_cast<long long>(p.low),
                                                               static_cast<long long>(p.high)));
                    break;
                default:
                    config.values.emplace_back(p.categories[rng.below(p.categories.size())]);
            }
        }
        out.push_back(std::move(config));
    }
    return out;
}

std::vector<Configuration> lhs_sample(const ParameterSpace& space, std::size_t k,
                                      std::uint64_t rng_seed) {
    if (k < 1) throw ConfigError("lhs_sample: k must be >= 1");
    Rng rng(rng_seed);
    const std::size_t d = space.size();
    std::vector<std::vector<double>> encoded(k, std::vector<double>(d));

    for (std::size_t j = 0; j < d; ++j) {
        const auto& p = space.param(j);
        if (p.is_numeric()) {
            auto strata = rng.permutation(k);
            for (std::size_t s = 0; s < k; ++s) {
                const double u = (static_cast<double>(strata[s]) + rng.uniform01()) /
                                 static_cast<double>(k);
                encoded[s][j] = p.low + u * (p.high - p.low);
            }
        } else {
            // round-robin over a shuffled category order, then shuffle the
            // assignment so pairings with other dimensions stay independent
            std::vector<std::size_t> order = rng.permutation(p.categories.size());
            std::vector<double> codes(k);
            for (std::size_t s = 0; s < k; ++s)
                codes[s] = static_cast<double>(order[s % order.size()]);
            rng.shuffle(codes);
            for (std::size_t s = 0; s < k; ++s) encoded[s][j] = codes[s];
        }
    }

    std::vector<Configuration> out;
    out.reserve(k);
    for (auto& row : encoded) out.push_back(decode(space, row));
    return out;
}

// -----------------------------------------------------------------------------
// HVS
// -----------------------------------------------------------------------------

namespace {

Partition::Side full_side(const ParameterSpec& p) {
    Partition::Side side;
    if (p.is_numeric()) {
        side.low = p.low;
        side.high = p.high;
    } else {
        side.categorical = true;
        for (std::size_t c = 0; c < p.categories.size(); ++c)
            side.codes.push_back(static_cast<int>(c));
    }
    return side;
}

double side_measure(const ParameterSpec& p, const Partition::Side& side) {
    if (side.categorical)
        return static_cast<double>(side.codes.size()) /
               static_cast<double>(p.categories.size());
    const double span = p.high - p.low;
    if (span <= 0.0) return 1.0; // degenerate axis contributes nothing
    return (side.high - side.low) / span;
}

struct PartitionBuilder {
    const ParameterSpace& space;
    const std::vector<std::vector<double>>& rows;
    const std::vector<double>& objectives;
    const HvsParams& params;
    std::vector<Partition> leaves;

    void grow(std::vector<std::size_t> idx, std::vector<Partition::Side> box, int depth) {
        const auto min_leaf = static_cast<std::size_t>(params.min_leaf);
        bool try_split = depth < params.max_depth && idx.size() >= 2 * min_leaf;

        detail::NumericSplit best;
        std::size_t best_dim = 0;
        if (try_split) {
            for (std::size_t j = 0; j < space.size(); ++j) {
                std::vector<std::pair<double, double>> pairs;
                pairs.reserve(idx.size());
                for (std::size_t i : idx) pairs.emplace_back(rows[i][j], objectives[i]);
                auto split = detail::best_numeric_split(pairs, min_leaf);
                if (split.valid && split.gain > best.gain) {
                    best = split;
                    best_dim = j;
                }
            }
        }

        if (!best.valid) {
            leaves.push_back(make_leaf(std::move(idx), std::move(box)));
            return;
        }

        std::vector<std::size_t> left_idx, right_idx;
        for (std::size_t i : idx)
            (rows[i][best_dim] <= best.threshold ? left_idx : right_idx).push_back(i);

        auto left_box = box;
        auto right_box = std::move(box);
        auto& spec = space.param(best_dim);
        if (spec.is_numeric()) {
            left_box[best_dim].high = best.threshold;
            right_box[best_dim].low = best.threshold;
        } else {
            std::vector<int> lo, hi;
            for (int c : left_box[best_dim].codes)
                (static_cast<double>(c) <= best.threshold ? lo : hi).push_back(c);
            left_box[best_dim].codes = std::move(lo);
            right_box[best_dim].codes = std::move(hi);
        }
        grow(std::move(left_idx), std::move(left_box), depth + 1);
        grow(std::move(right_idx), std::move(right_box), depth + 1);
    }

    Partition make_leaf(std::vector<std::size_t> idx, std::vector<Partition::Side> box) const {
        Partition leaf;
        leaf.member_indices = std::move(idx);
        leaf.box = std::move(box);
        std::vector<double> vals;
        vals.reserve(leaf.member_indices.size());
        for (std::size_t i : leaf.member_indices) vals.push_back(objectives[i]);
        std::sort(vals.begin(), vals.end());
        double sum = 0.0;
        for (double v : vals) sum += v;
        const auto n = static_cast<double>(vals.size());
        leaf.mean = vals.empty() ? 0.0 : sum / n;
        if (vals.size() >= 2) {
            double ss = 0.0;
            for (double v : vals) ss += (v - leaf.mean) * (v - leaf.mean);
            leaf.variance = ss / (n - 1.0);
        }
        leaf.measure = 1.0;
        for (std::size_t j = 0; j < space.size(); ++j)
            leaf.measure *= side_measure(space.param(j), leaf.box[j]);
        return leaf;
    }
};

} // namespace

std::vector<Partition> hvs_partitions(const ParameterSpace& space, const SampleStore& store,
                                      const HvsParams& params) {
    std::vector<std::vector<double>> rows;
    std::vector<double> objectives;
    for (const auto& r : store.records()) {
        if (r.status != SampleStatus::Ok && r.status != SampleStatus::Clipped) continue;
        rows.push_back(encode(space, r.config));
        objectives.push_back(r.objective);
    }
    if (rows.size() < 2 * static_cast<std::size_t>(params.min_leaf))
        throw ConfigError("hvs: need at least " + std::to_string(2 * params.min_leaf) +
                          " ok/clipped records, have " + std::to_string(rows.size()));

    PartitionBuilder builder{space, rows, objectives, params, {}};
    std::vector<std::size_t> all(rows.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    std::vector<Partition::Side> box;
    for (const auto& p : space.params()) box.push_back(full_side(p));
    builder.grow(std::move(all), std::move(box), 0);
    return std::move(builder.leaves);
}

std::vector<std::size_t> allocate_proportional(const std::vector<double>& priorities,
                                               std::size_t k) {
    if (priorities.empty()) throw ConfigError("allocate_proportional: no priorities");
    const std::size_t m = priorities.size();
    std::vector<std::size_t> alloc(m, 0);
    double total = 0.0;
    for (double p : priorities) {
        if (p < 0.0 || !std::isfinite(p))
            throw ConfigError("allocate_proportional: priorities must be finite and >= 0");
        total += p;
    }
    if (total <= 0.0) {
        // uniform fallback
        for (std::size_t i = 0; i < m; ++i) alloc[i] = k / m;
        for (std::size_t i = 0; i < k % m; ++i) ++alloc[i];
        return alloc;
    }
    std::vector<std::pair<double, std::size_t>> remainders; // (-fraction, index)
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < m; ++i) {
        const double share = static_cast<double>(k) * priorities[i] / total;
        alloc[i] = static_cast<std::size_t>(std::floor(share));
        assigned += alloc[i];
        remainders.emplace_back(-(share - std::floor(share)), i);
    }
    std::sort(remainders.begin(), remainders.end());
    for (std::size_t r = 0; r < k - assigned; ++r) ++alloc[remainders[r].second];
    return alloc;
}

std::vector<Configuration> hvs_next_batch(const ParameterSpace& space, const SampleStore& store,
                                          std::size_t k, const HvsParams& params,
                                          std::uint64_t rng_seed) {
    if (k < 1) throw ConfigError("hvs_next_batch: k must be >= 1");
    auto leaves = hvs_partitions(space, store, params);

    std::vector<double> priorities;
    priorities.reserve(leaves.size());
    for (const auto& leaf : leaves) {
        if (params.mode == HvsMode::Variance) {
            priorities.push_back(leaf.measure * leaf.variance);
        } else {
            const double stdev = std::sqrt(leaf.variance);
            priorities.push_back(leaf.measure * stdev / std::max(std::fabs(leaf.mean), kCvEpsilon));
        }
    }
    auto alloc = allocate_proportional(priorities, k);

    Rng rng(rng_seed);
    std::vector<Configuration> out;
    out.reserve(k);
    for (std::size_t leaf_i = 0; leaf_i < leaves.size(); ++leaf_i) {
        const auto& leaf = leaves[leaf_i];
        for (std::size_t c = 0; c < alloc[leaf_i]; ++c) {
            std::vector<double> x(space.size());
            for (std::size_t j = 0; j < space.size(); ++j) {
                const auto& side = leaf.box[j];
                if (side.categorical)
                    x[j] = static_cast<double>(side.codes[rng.below(side.codes.size())]);
                else
                    x[j] = rng.uniform(side.low, side.high);
            }
            out.push_back(decode(space, x));
        }
    }
    return out;
}

// -----------------------------------------------------------------------------
// GA-Adaptive
// -----------------------------------------------------------------------------

namespace {

Dataset store_dataset(const ParameterSpace& space, const SampleStore& store) {
    Dataset data;
    for (const auto& r : store.records()) {
        data.rows.push_back(encode(space, r.config));
        data.targets.push_back(r.objective);
    }
    for (std::size_t dim : space.categorical_dims())
        data.categorical_features.push_back(static_cast<int>(dim));
    return data;
}

std::vector<Value> random_input_point(const ParameterSpace& space, Rng& rng) {
    std::vector<double> x;
    for (std::size_t dim : space.input_dims()) {
        const auto& p = space.param(dim);
        if (p.is_numeric())
            x.push_back(rng.uniform(p.low, p.high));
        else
            x.push_back(static_cast<double>(rng.below(p.categories.size())));
    }
    return decode_subspace(space, space.input_dims(), x);
}

std::vector<Configuration> subsampler_batch(const ParameterSpace& space, const SampleStore& store,
                                            Subsampler kind, const HvsParams& hvs, std::size_t k,
                                            std::uint64_t seed) {
    if (k == 0) return {};
    switch (kind) {
        case Subsampler::Random: return random_sample(space, k, seed);
        case Subsampler::Lhs: return lhs_sample(space, k, seed);
        case Subsampler::Hvs:
        case Subsampler::HvsCv: {
            HvsParams p = hvs;
            p.mode = kind == Subsampler::Hvs ? HvsMode::Variance : HvsMode::CV;
            if (store.count_with_status(SampleStatus::Ok, SampleStatus::Clipped) <
                2 * static_cast<std::size_t>(p.min_leaf))
                return lhs_sample(space, k, seed); // not enough data to partition yet
            return hvs_next_batch(space, store, k, p, seed);
        }
    }
    throw ConfigError("unknown subsampler");
}

struct EncodedConfigLess {
    bool operator()(const std::vector<double>& a, const std::vector<double>& b) const {
        return a < b;
    }
};

} // namespace

SampleStore ga_adaptive(const ParameterSpace& space, const Kernel& kernel,
                        const EvalOptions& eval, const GaAdaptiveOptions& options,
                        const SampleStore* resume_from) {
    const ScheduleParams& schedule = options.schedule;
    schedule.validate();
    const std::size_t n = schedule.total;
    const std::size_t s = schedule.per_iteration;
    const std::size_t bootstrap = schedule.bootstrap_count();

    SampleStore store = resume_from ? *resume_from : SampleStore(space);
    if (resume_from && store.fingerprint() != space.fingerprint())
        throw ConfigError("ga_adaptive: resume store fingerprint mismatch");
    if (store.size() > n) throw ConfigError("ga_adaptive: resume store larger than budget");
    if (store.size() != 0 && (store.size() < bootstrap || (store.size() - bootstrap) % s != 0) &&
        store.size() != n)
        throw ConfigError("ga_adaptive: resume store is not at an iteration boundary (size " +
                          std::to_string(store.size()) + ")");

    // Existing configurations, for winner deduplication.
    std::set<std::vector<double>, EncodedConfigLess> seen;
    for (const auto& r : store.records()) seen.insert(encode(space, r.config));

    if (store.size() == 0) {
        auto configs = lhs_sample(space, bootstrap, derive_seed(options.rng_seed, kBootstrapStream));
        auto records = evaluate_batch(kernel, space, configs, options.jobs, eval);
        store.append(records);
        for (const auto& r : records) seen.insert(encode(space, r.config));
        if (options.checkpoint) options.checkpoint(store);
    }

    std::size_t iteration = (store.size() - bootstrap) / s;
    while (store.size() < n) {
        IterationLog log;
        log.index = iteration;
        log.store_size_before = store.size();
        log.progress = static_cast<double>(store.size()) / static_cast<double>(n);
        log.epsilon = schedule.initial_ga_ratio +
                      (schedule.final_ga_ratio - schedule.initial_ga_ratio) * log.progress;

        const std::size_t take = std::min(s, n - store.size());
        std::size_t ga_count = static_cast<std::size_t>(
            std::llround(log.epsilon * static_cast<double>(take)));
        ga_count = std::min(ga_count, take);
        log.ga_requested = ga_count;

        // Fit the surrogate on everything measured so far; degenerate data
        // falls back to pure exploration for this iteration.
        GbdtModel model;
        bool have_model = false;
        if (ga_count > 0) {
            try {
                model = fit(store_dataset(space, store), options.surrogate);
                have_model = true;
            } catch (const ConfigError&) {
                ga_count = 0;
            }
        }

        std::vector<Configuration> winners;
        if (ga_count > 0 && have_model) {
            Rng pick_rng(derive_seed(options.rng_seed, kInputPickStream, iteration));
            std::vector<std::vector<Value>> inputs;
            inputs.reserve(ga_count);
            for (std::size_t g = 0; g < ga_count; ++g)
                inputs.push_back(random_input_point(space, pick_rng));

            std::vector<Configuration> candidates(ga_count);
            parallel_for(ga_count, options.jobs, [&](std::size_t g) {
                std::vector<double> encoded(space.size());
                auto enc_in = encode_subspace(space, space.input_dims(), inputs[g]);
                for (std::size_t i = 0; i < enc_in.size(); ++i)
                    encoded[space.input_dims()[i]] = enc_in[i];
                DesignObjective objective = [&](const std::vector<Value>& design) {
                    std::vector<double> x = encoded;
                    auto enc_d = encode_subspace(space, space.design_dims(), design);
                    for (std::size_t i = 0; i < enc_d.size(); ++i)
                        x[space.design_dims()[i]] = enc_d[i];
                    return model.predict(x);
                };
                GaConfig ga = options.ga;
                ga.rng_seed = derive_seed(options.rng_seed, kGaStream + iteration, g);
                auto best = ga_minimize(objective, space, ga);
                candidates[g] = combine(space, inputs[g], best.design_values);
            });

            for (auto& c : candidates) {
                auto key = encode(space, c);
                if (seen.count(key)) continue; // already measured, spend elsewhere
                seen.insert(std::move(key));
                winners.push_back(std::move(c));
            }
        }
        log.ga_kept = winners.size();

        const std::size_t sub_count = take - winners.size();
        log.sub_points = sub_count;
        auto sub = subsampler_batch(space, store, options.subsampler, options.hvs, sub_count,
                                    derive_seed(options.rng_seed, kSubsamplerStream, iteration));
        for (const auto& c : sub) seen.insert(encode(space, c));

        std::vector<Configuration> batch = std::move(winners);
        batch.insert(batch.end(), sub.begin(), sub.end());
        auto records = evaluate_batch(kernel, space, batch, options.jobs, eval);
        store.append(records);

        if (options.on_iteration) options.on_iteration(log);
        if (options.checkpoint) options.checkpoint(store);
        ++iteration;
    }
    return store;
}

SampleStore run_sampler(const ParameterSpace& space, const Kernel& kernel,
                        const EvalOptions& eval, Subsampler sampler,
                        const GaAdaptiveOptions& options, const SampleStore* resume_from) {
    const ScheduleParams& schedule = options.schedule;
    schedule.validate();
    const std::size_t n = schedule.total;

    SampleStore store = resume_from ? *resume_from : SampleStore(space);
    if (resume_from && store.fingerprint() != space.fingerprint())
        throw ConfigError("run_sampler: resume store fingerprint mismatch");
    if (store.size() > n) throw ConfigError("run_sampler: resume store larger than budget");

    if (sampler == Subsampler::Lhs || sampler == Subsampler::Random) {
        // One deterministic list for the whole budget; resume just continues
        // down the list.
        auto configs = sampler == Subsampler::Lhs
                           ? lhs_sample(space, n, derive_seed(options.rng_seed, kBootstrapStream))
                           : random_sample(space, n,
                                           derive_seed(options.rng_seed, kBootstrapStream));
        while (store.size() < n) {
            const std::size_t take = std::min(schedule.per_iteration, n - store.size());
            std::vector<Configuration> chunk(configs.begin() + static_cast<long>(store.size()),
                                             configs.begin() +
                                                 static_cast<long>(store.size() + take));
            store.append(evaluate_batch(kernel, space, chunk, options.jobs, eval));
            if (options.checkpoint) options.checkpoint(store);
        }
        return store;
    }

    // HVS variants: LHS bootstrap, then iterative batches.
    const std::size_t bootstrap = schedule.bootstrap_count();
    const std::size_t s = schedule.per_iteration;
    if (store.size() != 0 && (store.size() < bootstrap || (store.size() - bootstrap) % s != 0) &&
        store.size() != n)
        throw ConfigError("run_sampler: resume store is not at an iteration boundary");

    if (store.size() == 0) {
        auto configs = lhs_sample(space, bootstrap, derive_seed(options.rng_seed, kBootstrapStream));
        store.append(evaluate_batch(kernel, space, configs, options.jobs, eval));
        if (options.checkpoint) options.checkpoint(store);
    }
    std::size_t iteration = (store.size() - bootstrap) / s;
    while (store.size() < n) {
        const std::size_t take = std::min(s, n - store.size());
        auto configs = subsampler_batch(space, store, sampler, options.hvs, take,
                                        derive_seed(options.rng_seed, kSubsamplerStream, iteration));
        store.append(evaluate_batch(kernel, space, configs, options.jobs, eval));
        if (options.checkpoint) options.checkpoint(store);
        ++iteration;
    }
    return store;
}

} // namespace ktune
