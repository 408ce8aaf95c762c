#include "ktune/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "ktune/rng.hpp"
#include "ktune/util.hpp"

namespace ktune {

void GaConfig::validate() const {
    if (population < 4 || population % 2 != 0)
        throw ConfigError("ga: population must be even and >= 4");
    if (generations < 1) throw ConfigError("ga: generations must be >= 1");
    if (crossover_prob < 0.0 || crossover_prob > 1.0)
        throw ConfigError("ga: crossover_prob must be in [0,1]");
    if (mutation_prob && (*mutation_prob < 0.0 || *mutation_prob > 1.0))
        throw ConfigError("ga: mutation_prob must be in [0,1]");
    if (!(eta_crossover > 0.0)) throw ConfigError("ga: eta_crossover must be > 0");
    if (!(eta_mutation > 0.0)) throw ConfigError("ga: eta_mutation must be > 0");
    if (tournament_size < 2) throw ConfigError("ga: tournament_size must be >= 2");
}

namespace {

struct Gene {
    bool categorical = false;
    bool integral = false;
    double low = 0.0;
    double high = 0.0; // categorical: number of codes - 1
};

std::vector<Gene> design_genes(const ParameterSpace& space) {
    std::vector<Gene> genes;
    for (std::size_t dim : space.design_dims()) {
        const auto& p = space.param(dim);
        Gene g;
        if (p.is_numeric()) {
            g.integral = p.kind == ParamKind::Integer;
            g.low = p.low;
            g.high = p.high;
        } else {
            g.categorical = true;
            g.low = 0.0;
            g.high = static_cast<double>(p.categories.size() - 1);
        }
        genes.push_back(g);
    }
    return genes;
}

double snap(const Gene& g, double v) {
    if (g.categorical || g.integral) v = round_half_even(v);
    return std::clamp(v, g.low, g.high);
}

// Deb & Agrawal simulated binary crossover, bounded form.
void sbx(const Gene& g, double eta, double& a, double& b, Rng& rng) {
    constexpr double kEps = 1e-14;
    if (rng.uniform01() > 0.5) return;
    if (std::fabs(a - b) <= kEps) return;
    double y1 = std::min(a, b), y2 = std::max(a, b);
    const double u = rng.uniform01();

    auto child = [&](double beta_bound) {
        const double alpha = 2.0 - std::pow(beta_bound, -(eta + 1.0));
        double betaq;
        if (u <= 1.0 / alpha)
            betaq = std::pow(u * alpha, 1.0 / (eta + 1.0));
        else
            betaq = std::pow(1.0 / (2.0 - u * alpha), 1.0 / (eta + 1.0));
        return betaq;
    };

    const double betaq1 = child(1.0 + 2.0 * (y1 - g.low) / (y2 - y1));
    double c1 = 0.5 * ((y1 + y2) - betaq1 * (y2 - y1));
    const double betaq2 = child(1.0 + 2.0 * (g.high - y2) / (y2 - y1));
    double c2 = 0.5 * ((y1 + y2) + betaq2 * (y2 - y1));

    c1 = std::clamp(c1, g.low, g.high);
    c2 = std::clamp(c2, g.low, g.high);
    if (rng.uniform01() <= 0.5) std::swap(c1, c2);
    a = c1;
    b = c2;
}

// Deb polynomial mutation, bounded form.
void polynomial_mutation(const Gene& g, double eta, double& y, Rng& rng) {
    const double span = g.high - g.low;
    if (span <= 0.0) return;
    const double delta1 = (y - g.low) / span;
    const double delta2 = (g.high - y) / span;
    const double r = rng.uniform01();
    const double mut_pow = 1.0 / (eta + 1.0);
    double deltaq;
    if (r <= 0.5) {
        const double xy = 1.0 - delta1;
        const double val = 2.0 * r + (1.0 - 2.0 * r) * std::pow(xy, eta + 1.0);
        deltaq = std::pow(val, mut_pow) - 1.0;
    } else {
        const double xy = 1.0 - delta2;
        const double val = 2.0 * (1.0 - r) + 2.0 * (r - 0.5) * std::pow(xy, eta + 1.0);
        deltaq = 1.0 - std::pow(val, mut_pow);
    }
    y = std::clamp(y + deltaq * span, g.low, g.high);
}

} // namespace

GaResult ga_minimize(const DesignObjective& objective, const ParameterSpace& space,
                     const GaConfig& config) {
    config.validate();
    const auto genes = design_genes(space);
    const std::size_t d = genes.size();
    if (d == 0) throw ConfigError("ga: space has no design dimensions");
    const auto pop_size = static_cast<std::size_t>(config.population);
    const double pm = config.mutation_prob ? *config.mutation_prob : 1.0 / static_cast<double>(d);

    Rng rng(config.rng_seed);

    auto decode_genes = [&](const std::vector<double>& genome) {
        return decode_subspace(space, space.design_dims(), genome);
    };

    GaResult result;
    result.value = std::numeric_limits<double>::infinity();

    auto fitness_of = [&](const std::vector<double>& genome) {
        double v = objective(decode_genes(genome));
        if (!std::isfinite(v)) v = std::numeric_limits<double>::infinity();
        ++result.evaluations;
        return v;
    };

    // LHS initialization: one stratum per individual and gene, independently
    // permuted per gene.
    std::vector<std::vector<double>> pop(pop_size, std::vector<double>(d));
    for (std::size_t j = 0; j < d; ++j) {
        auto order = rng.permutation(pop_size);
        for (std::size_t i = 0; i < pop_size; ++i) {
            const double u =
                (static_cast<double>(order[i]) + rng.uniform01()) / static_cast<double>(pop_size);
            pop[i][j] = snap(genes[j], genes[j].low + u * (genes[j].high - genes[j].low));
        }
    }

    std::vector<double> fitness(pop_size);
    std::vector<double> best_genome;
    for (std::size_t i = 0; i < pop_size; ++i) {
        fitness[i] = fitness_of(pop[i]);
        if (fitness[i] < result.value) {
            result.value = fitness[i];
            best_genome = pop[i];
        }
    }
    result.best_history.push_back(result.value);

    auto tournament = [&]() {
        std::size_t winner = static_cast<std::size_t>(rng.below(pop_size));
        for (int t = 1; t < config.tournament_size; ++t) {
            std::size_t challenger = static_cast<std::size_t>(rng.below(pop_size));
            if (fitness[challenger] < fitness[winner]) winner = challenger;
        }
        return winner;
    };

    for (int gen = 0; gen < config.generations; ++gen) {
        std::vector<std::vector<double>> next;
        next.reserve(pop_size);
        while (next.size() < pop_size) {
            auto child_a = pop[tournament()];
            auto child_b = pop[tournament()];
            if (rng.uniform01() <= config.crossover_prob) {
                for (std::size_t j = 0; j < d; ++j) {
                    if (genes[j].categorical) {
                        if (rng.uniform01() <= 0.5) std::swap(child_a[j], child_b[j]);
                    } else {
                        sbx(genes[j], config.eta_crossover, child_a[j], child_b[j], rng);
                        child_a[j] = snap(genes[j], child_a[j]);
                        child_b[j] = snap(genes[j], child_b[j]);
                    }
                }
            }
            for (auto* child : {&child_a, &child_b}) {
                for (std::size_t j = 0; j < d; ++j) {
                    if (rng.uniform01() > pm) continue;
                    if (genes[j].categorical) {
                        (*child)[j] = static_cast<double>(
                            rng.below(static_cast<std::uint64_t>(genes[j].high) + 1));
                    } else {
                        polynomial_mutation(genes[j], config.eta_mutation, (*child)[j], rng);
                        (*child)[j] = snap(genes[j], (*child)[j]);
                    }
                }
            }
            next.push_back(std::move(child_a));
            if (next.size() < pop_size) next.push_back(std::move(child_b));
        }
        next[0] = best_genome; // elitism

        pop = std::move(next);
        for (std::size_t i = 0; i < pop_size; ++i) {
            fitness[i] = fitness_of(pop[i]);
            if (fitness[i] < result.value) {
                result.value = fitness[i];
                best_genome = pop[i];
            }
        }
        result.best_history.push_back(result.value);
    }

    if (best_genome.empty())
        throw std::runtime_error("ga: objective returned no finite value for any individual");
    result.design_values = decode_genes(best_genome);
    return result;
}

std::vector<OptimizedPoint> optimize_grid(const GbdtModel& model, const ParameterSpace& space,
                                          const std::vector<std::vector<Value>>& grid,
                                          const GaConfig& config, unsigned jobs) {
    if (model.n_features != space.size())
        throw ConfigError("optimize_grid: model expects " + std::to_string(model.n_features) +
                          " features, space has " + std::to_string(space.size()));
    std::vector<OptimizedPoint> out(grid.size());
    std::vector<std::string> failures(grid.size());
    parallel_for(grid.size(), jobs, [&](std::size_t i) {
        try {
            const auto& input_values = grid[i];
            std::vector<double> encoded(space.size());
            auto input_encoded = encode_subspace(space, space.input_dims(), input_values);
            for (std::size_t k = 0; k < input_encoded.size(); ++k)
                encoded[space.input_dims()[k]] = input_encoded[k];

            DesignObjective objective = [&](const std::vector<Value>& design) {
                std::vector<double> x = encoded;
                auto design_encoded = encode_subspace(space, space.design_dims(), design);
                for (std::size_t k = 0; k < design_encoded.size(); ++k)
                    x[space.design_dims()[k]] = design_encoded[k];
                return model.predict(x);
            };

            GaConfig point_config = config;
            point_config.rng_seed = derive_seed(config.rng_seed, i);
            auto best = ga_minimize(objective, space, point_config);

            out[i].input_values = input_values;
            out[i].design_values = std::move(best.design_values);
            out[i].predicted_objective = best.value;
        } catch (const std::exception& e) {
            failures[i] = e.what();
        }
    });
    std::string report;
    for (std::size_t i = 0; i < failures.size(); ++i)
        if (!failures[i].empty())
            report += "\n  grid point " + std::to_string(i) + ": " + failures[i];
    if (!report.empty())
        throw std::runtime_error("optimize_grid failures:" + report);
    return out;
}

double local_accuracy(const Kernel& kernel, const ParameterSpace& space,
                      const std::vector<OptimizedPoint>& points, const EvalOptions& opts,
                      unsigned jobs) {
    if (points.empty()) throw ConfigError("local_accuracy: no optimized points");
    std::vector<Configuration> configs;
    configs.reserve(points.size());
    for (const auto& p : points)
        configs.push_back(combine(space, p.input_values, p.design_values));
    auto records = evaluate_batch(kernel, space, configs, jobs, opts);
    double acc = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        if (records[i].status == SampleStatus::Failed ||
            records[i].status == SampleStatus::Timeout)
            throw std::runtime_error("local_accuracy: measurement failed at point " +
                                     std::to_string(i));
        acc += std::fabs(points[i].predicted_objective - records[i].objective);
    }
    return acc / static_cast<double>(points.size());
}

void save_optimized_points(const std::vector<OptimizedPoint>& points, const ParameterSpace& space,
                           const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    std::vector<std::string> header;
    for (std::size_t dim : space.input_dims()) header.push_back(space.param(dim).name);
    for (std::size_t dim : space.design_dims()) header.push_back(space.param(dim).name);
    header.push_back("predicted_objective");
    out << join_csv(header) << "\n";
    for (const auto& p : points) {
        std::vector<std::string> fields;
        for (const auto& v : p.input_values) fields.push_back(value_to_string(v));
        for (const auto& v : p.design_values) fields.push_back(value_to_string(v));
        fields.push_back(format_g17(p.predicted_objective));
        out << join_csv(fields) << "\n";
    }
    if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<OptimizedPoint> load_optimized_points(const std::string& path,
                                                  const ParameterSpace& space) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    std::string line;
    std::size_t line_no = 1;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
    const auto& input_dims = space.input_dims();
    const auto& design_dims = space.design_dims();
    const std::size_t ncols = input_dims.size() + design_dims.size() + 1;
    if (split_csv_line(line).size() != ncols)
        throw ConfigError(path + ": header has wrong column count");

    auto parse_value = [&](const ParameterSpec& p, const std::string& field) -> Value {
        switch (p.kind) {
            case ParamKind::Real: return parse_double(field, p.name);
            case ParamKind::Integer: return parse_int(field, p.name);
            default: return field;
        }
    };

    std::vector<OptimizedPoint> points;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto fields = split_csv_line(line);
        if (fields.size() != ncols)
            throw ConfigError(path + ":" + std::to_string(line_no) + ": wrong field count");
        OptimizedPoint p;
        std::size_t c = 0;
        for (std::size_t dim : input_dims)
            p.input_values.push_back(parse_value(space.param(dim), fields[c++]));
        for (std::size_t dim : design_dims)
            p.design_values.push_back(parse_value(space.param(dim), fields[c++]));
        p.predicted_objective = parse_double(fields[c], "predicted_objective");
        points.push_back(std::move(p));
    }
    return points;
}

} // namespace ktune
