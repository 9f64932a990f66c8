#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <utility>
#include <vector>

#include "simex/clustering.hpp"
#include "simex/neural.hpp"
#include "simex/param_space.hpp"
#include "simex/simulator.hpp"

namespace simex {

/// Everything derived from one chromosome via simulator + model + relevance
/// propagation. Immutable and shared between populations.
struct Evaluation {
    RenderedSample sample;
    std::vector<double> probs;
    bool failing = false;
    double entropy = 0.0;
    Heatmap heatmap;                  // at the target cluster's layer
    double rcc = std::numeric_limits<double>::infinity();
};

struct Individual {
    Chromosome chromosome;
    std::shared_ptr<const Evaluation> eval;

    bool in_cluster() const { return eval && eval->rcc <= 1.0; }
    bool failing() const { return eval && eval->failing; }
};

/// Renders, classifies and heatmaps chromosomes against one target cluster.
/// Results are cached per distinct chromosome; the request counter is the
/// budget currency used for algorithm comparisons.
class ClusterEvaluator {
public:
    ClusterEvaluator(ScenarioConfig scenario, const DenseNet* net,
                     const RootCauseCluster* cluster, double lrp_epsilon = 1e-2)
        : scenario_(std::move(scenario)), net_(net), cluster_(cluster), eps_(lrp_epsilon) {}

    const ScenarioConfig& scenario() const { return scenario_; }
    const RootCauseCluster* cluster() const { return cluster_; }
    const DenseNet* net() const { return net_; }

    std::size_t requests() const { return requests_; }
    std::size_t distinct_evaluations() const { return misses_; }

    void ensure(Individual& ind) {
        ++requests_;
        if (ind.eval) return;
        auto it = cache_.find(ind.chromosome.values);
        if (it != cache_.end()) {
            ind.eval = it->second;
            return;
        }
        auto ev = std::make_shared<Evaluation>(evaluate_raw(ind.chromosome));
        cache_.emplace(ind.chromosome.values, ev);
        ++misses_;
        ind.eval = ev;
    }

    Individual make(Chromosome c) {
        Individual ind;
        ind.chromosome = std::move(c);
        ensure(ind);
        return ind;
    }

private:
    Evaluation evaluate_raw(const Chromosome& c) const {
        // integer parameters evolve as reals and are rounded only here
        Chromosome rounded = c;
        for (std::size_t p = 0; p < rounded.values.size(); ++p)
            if (rounded.space->spec(p).kind == ParamKind::Integer)
                rounded.values[p] = std::round(rounded.values[p]);
        Evaluation ev;
        ev.sample = render(rounded, scenario_);
        const auto fp = forward(*net_, ev.sample.input);
        ev.probs = fp.probs;
        ev.failing = ground_truth_failure(ev.sample, ev.probs, scenario_);
        ev.entropy = normalized_entropy(ev.probs);
        if (cluster_) {
            ev.heatmap = lrp(*net_, fp, cluster_->layer, eps_);
            ev.rcc = rcc_distance(*cluster_, ev.heatmap);
        }
        return ev;
    }

    ScenarioConfig scenario_;
    const DenseNet* net_;
    const RootCauseCluster* cluster_;
    double eps_;
    std::map<std::vector<double>, std::shared_ptr<const Evaluation>> cache_;
    std::size_t requests_ = 0;
    std::size_t misses_ = 0;
};

// --- variation operators ---------------------------------------------------

struct VariationConfig {
    double crossover_prob = 0.7; // per offspring pair
    double mutation_prob = 0.3;  // per gene
    double eta_c = 15.0;         // SBX distribution index
    double eta_m = 20.0;         // polynomial mutation distribution index
    std::size_t tournament_size = 2;
};

namespace detail {

inline double sbx_one(double p1, double p2, double lo, double hi, double eta, Rng& rng, bool first) {
    const double u = uniform_real(rng, 0.0, 1.0);
    const double beta = (u <= 0.5) ? std::pow(2.0 * u, 1.0 / (eta + 1.0))
                                   : std::pow(1.0 / (2.0 * (1.0 - u)), 1.0 / (eta + 1.0));
    const double c = first ? 0.5 * ((1.0 + beta) * p1 + (1.0 - beta) * p2)
                           : 0.5 * ((1.0 - beta) * p1 + (1.0 + beta) * p2);
    return std::clamp(c, lo, hi);
}

inline double polynomial_mutate_one(double x, double lo, double hi, double eta, Rng& rng) {
    const double range = hi - lo;
    const double u = uniform_real(rng, 0.0, 1.0);
    double delta;
    if (u < 0.5) {
        const double d1 = (x - lo) / range;
        delta = std::pow(2.0 * u + (1.0 - 2.0 * u) * std::pow(1.0 - d1, eta + 1.0),
                         1.0 / (eta + 1.0)) - 1.0;
    } else {
        const double d2 = (hi - x) / range;
        delta = 1.0 - std::pow(2.0 * (1.0 - u) + 2.0 * (u - 0.5) * std::pow(1.0 - d2, eta + 1.0),
                               1.0 / (eta + 1.0));
    }
    return std::clamp(x + delta * range, lo, hi);
}

} // namespace detail

/// Simulated binary crossover; categorical genes swap uniformly.
inline std::pair<Chromosome, Chromosome> sbx_crossover(const Chromosome& a, const Chromosome& b,
                                                       double eta_c, Rng& rng) {
    Chromosome c1 = a, c2 = b;
    for (std::size_t p = 0; p < a.values.size(); ++p) {
        const auto& s = a.space->spec(p);
        if (uniform_real(rng, 0.0, 1.0) > 0.5) continue; // gene untouched
        if (s.kind == ParamKind::Categorical) {
            std::swap(c1.values[p], c2.values[p]);
        } else if (std::abs(a.values[p] - b.values[p]) > 1e-14) {
            c1.values[p] = detail::sbx_one(a.values[p], b.values[p], s.lower, s.upper, eta_c, rng, true);
            c2.values[p] = detail::sbx_one(a.values[p], b.values[p], s.lower, s.upper, eta_c, rng, false);
        }
    }
    return {c1, c2};
}

/// Polynomial mutation applied per gene with probability mutation_prob;
/// categorical genes resample a uniform level.
inline void mutate(Chromosome& c, const VariationConfig& cfg, Rng& rng) {
    for (std::size_t p = 0; p < c.values.size(); ++p) {
        if (uniform_real(rng, 0.0, 1.0) >= cfg.mutation_prob) continue;
        const auto& s = c.space->spec(p);
        if (s.kind == ParamKind::Categorical)
            c.values[p] = static_cast<double>(uniform_index(rng, s.level_count()));
        else
            c.values[p] = detail::polynomial_mutate_one(c.values[p], s.lower, s.upper, cfg.eta_m, rng);
    }
}

/// Tournament over indices 0..n-1; better(i, j) returns true when i wins.
inline std::size_t tournament_select(std::size_t n, std::size_t tournament, Rng& rng,
                                     const std::function<bool(std::size_t, std::size_t)>& better) {
    std::size_t best = uniform_index(rng, n);
    for (std::size_t k = 1; k < tournament; ++k) {
        const std::size_t challenger = uniform_index(rng, n);
        if (better(challenger, best)) best = challenger;
    }
    return best;
}

// --- nondominated sorting and crowding -------------------------------------

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool strictly = false;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (a[k] > b[k]) return false;
        if (a[k] < b[k]) strictly = true;
    }
    return strictly;
}

/// Deb's fast nondominated sort over a minimized objective matrix.
inline std::vector<std::vector<std::size_t>> fast_nondominated_sort(
    const std::vector<std::vector<double>>& values) {
    const std::size_t n = values.size();
    for (const auto& row : values)
        for (double v : row)
            if (std::isnan(v)) throw contract_error("fast_nondominated_sort: NaN objective");

    std::vector<std::vector<std::size_t>> dominated(n);
    std::vector<std::size_t> counter(n, 0);
    std::vector<std::vector<std::size_t>> fronts(1);
    for (std::size_t p = 0; p < n; ++p) {
        for (std::size_t q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(values[p], values[q]))
                dominated[p].push_back(q);
            else if (dominates(values[q], values[p]))
                ++counter[p];
        }
        if (counter[p] == 0) fronts[0].push_back(p);
    }
    std::size_t f = 0;
    while (f < fronts.size() && !fronts[f].empty()) {
        std::vector<std::size_t> next;
        for (auto p : fronts[f])
            for (auto q : dominated[p])
                if (--counter[q] == 0) next.push_back(q);
        if (!next.empty()) fronts.push_back(std::move(next));
        ++f;
    }
    return fronts;
}

enum class CrowdingVariant { Original, Modified };

/// Crowding distance over one front. Original: best and worst individual per
/// objective get infinity. Modified: only one minimum-fitness individual per
/// objective gets infinity (random pick among ties), so each objective's best
/// value is what survives truncation. Interior individuals accumulate the
/// normalized neighbour gap; objectives with zero range contribute nothing.
inline std::vector<double> crowding_assign(const std::vector<std::vector<double>>& front_values,
                                           CrowdingVariant variant, Rng& rng) {
    const std::size_t n = front_values.size();
    if (n == 0) throw contract_error("crowding_assign: empty front");
    const std::size_t q = front_values.front().size();
    std::vector<double> dist(n, 0.0);
    const double inf = std::numeric_limits<double>::infinity();
    if (n <= 2 && variant == CrowdingVariant::Original) {
        std::fill(dist.begin(), dist.end(), inf);
        return dist;
    }

    std::vector<std::size_t> order(n);
    for (std::size_t m = 0; m < q; ++m) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return front_values[a][m] < front_values[b][m];
        });
        const double lo = front_values[order.front()][m];
        const double hi = front_values[order.back()][m];
        if (variant == CrowdingVariant::Original) {
            if (hi - lo == 0.0) continue;
            dist[order.front()] = inf;
            dist[order.back()] = inf;
        } else {
            std::vector<std::size_t> minimal;
            for (auto idx : order)
                if (front_values[idx][m] == lo) minimal.push_back(idx);
            dist[minimal[minimal.size() == 1 ? 0 : uniform_index(rng, minimal.size())]] = inf;
            if (hi - lo == 0.0) continue;
        }
        for (std::size_t k = 1; k + 1 < n; ++k) {
            const double gap = front_values[order[k + 1]][m] - front_values[order[k - 1]][m];
            if (dist[order[k]] != inf) dist[order[k]] += gap / (hi - lo);
        }
    }
    return dist;
}

// --- elitist engine (used for the modified variant and for the plain one) --

struct EvolveConfig {
    std::size_t population_size = 25;
    std::size_t iterations = 100;
    VariationConfig variation{0.3, 0.3, 15.0, 20.0, 2};
    CrowdingVariant variant = CrowdingVariant::Modified;
    std::uint64_t seed = 1;
    // offspring generated by variation per iteration; 0 means population_size.
    // A generation hook may add the difference back (e.g. random immigrants).
    std::size_t offspring_count = 0;
};

struct GenerationStats {
    std::vector<double> min_objective;
    std::vector<double> max_objective;
};

struct EvolveResult {
    std::vector<Individual> population;
    std::vector<GenerationStats> trace;
};

using ObjectiveFn = std::function<double(const Individual&)>;
using EvaluateFn = std::function<void(Individual&)>;
// recomputed every generation so objectives may depend on external state
// (e.g. an archive); returns one row per individual
using ObjectiveMatrixFn =
    std::function<std::vector<std::vector<double>>(const std::vector<Individual>&)>;
// optional per-generation hook: runs right after offspring evaluation with
// the merged parent+offspring population
using GenerationHook = std::function<void(std::size_t iteration, std::vector<Individual>&)>;

namespace detail {

struct RankedPopulation {
    std::vector<std::size_t> rank;
    std::vector<double> crowding;
};

inline RankedPopulation rank_population(const std::vector<std::vector<double>>& values,
                                        CrowdingVariant variant, Rng& rng) {
    RankedPopulation rp;
    rp.rank.resize(values.size());
    rp.crowding.resize(values.size());
    const auto fronts = fast_nondominated_sort(values);
    for (std::size_t f = 0; f < fronts.size(); ++f) {
        std::vector<std::vector<double>> sub;
        sub.reserve(fronts[f].size());
        for (auto idx : fronts[f]) sub.push_back(values[idx]);
        const auto cd = crowding_assign(sub, variant, rng);
        for (std::size_t k = 0; k < fronts[f].size(); ++k) {
            rp.rank[fronts[f][k]] = f;
            rp.crowding[fronts[f][k]] = cd[k];
        }
    }
    return rp;
}

} // namespace detail

/// Elitist mu+lambda loop: offspring by tournament + SBX + polynomial
/// mutation, survivors by nondominated rank with crowding on the boundary
/// front. The modified crowding variant preserves, for each objective, an
/// individual attaining its minimum, so per-objective minima never increase.
/// Requires objective count <= population size for that guarantee.
inline EvolveResult evolve(std::vector<Individual> population, const ObjectiveMatrixFn& objectives,
                           const EvaluateFn& evaluate, const EvolveConfig& cfg,
                           const GenerationHook& hook = {}) {
    Rng rng = make_rng(cfg.seed);
    const std::size_t s = cfg.population_size;
    if (population.size() != s) throw contract_error("evolve: wrong initial population size");
    for (auto& ind : population) evaluate(ind);

    EvolveResult result;
    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        auto values = objectives(population);
        const auto ranked = detail::rank_population(values, cfg.variant, rng);

        auto better = [&](std::size_t a, std::size_t b) {
            if (ranked.rank[a] != ranked.rank[b]) return ranked.rank[a] < ranked.rank[b];
            return ranked.crowding[a] > ranked.crowding[b];
        };

        const std::size_t lambda = cfg.offspring_count == 0 ? s : cfg.offspring_count;
        std::vector<Individual> offspring;
        offspring.reserve(lambda);
        while (offspring.size() < lambda) {
            const auto pa = tournament_select(s, cfg.variation.tournament_size, rng, better);
            const auto pb = tournament_select(s, cfg.variation.tournament_size, rng, better);
            Chromosome c1 = population[pa].chromosome;
            Chromosome c2 = population[pb].chromosome;
            if (uniform_real(rng, 0.0, 1.0) < cfg.variation.crossover_prob)
                std::tie(c1, c2) = sbx_crossover(c1, c2, cfg.variation.eta_c, rng);
            mutate(c1, cfg.variation, rng);
            mutate(c2, cfg.variation, rng);
            offspring.push_back(Individual{std::move(c1), nullptr});
            if (offspring.size() < lambda) offspring.push_back(Individual{std::move(c2), nullptr});
        }
        for (auto& ind : offspring) evaluate(ind);

        std::vector<Individual> merged = population;
        merged.insert(merged.end(), std::make_move_iterator(offspring.begin()),
                      std::make_move_iterator(offspring.end()));
        if (hook) hook(iter, merged);

        auto merged_values = objectives(merged);
        const auto fronts = fast_nondominated_sort(merged_values);

        std::vector<Individual> next;
        next.reserve(s);
        for (const auto& front : fronts) {
            if (next.size() == s) break;
            if (next.size() + front.size() <= s) {
                for (auto idx : front) next.push_back(merged[idx]);
                continue;
            }
            std::vector<std::vector<double>> sub;
            sub.reserve(front.size());
            for (auto idx : front) sub.push_back(merged_values[idx]);
            const auto cd = crowding_assign(sub, cfg.variant, rng);
            std::vector<std::size_t> order(front.size());
            std::iota(order.begin(), order.end(), 0);
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return cd[a] > cd[b]; });
            for (auto k : order) {
                if (next.size() == s) break;
                next.push_back(merged[front[k]]);
            }
        }
        population = std::move(next);

        auto final_values = objectives(population);
        GenerationStats gs;
        const std::size_t q = final_values.front().size();
        gs.min_objective.assign(q, std::numeric_limits<double>::infinity());
        gs.max_objective.assign(q, -std::numeric_limits<double>::infinity());
        for (const auto& row : final_values)
            for (std::size_t m = 0; m < q; ++m) {
                gs.min_objective[m] = std::min(gs.min_objective[m], row[m]);
                gs.max_objective[m] = std::max(gs.max_objective[m], row[m]);
            }
        result.trace.push_back(std::move(gs));
    }
    result.population = std::move(population);
    return result;
}

/// Fixed per-individual objectives (the common case).
inline EvolveResult nsga2_prime(std::vector<Individual> population,
                                const std::vector<ObjectiveFn>& objectives,
                                const EvaluateFn& evaluate, EvolveConfig cfg) {
    if (objectives.empty()) throw contract_error("nsga2_prime: no objectives");
    cfg.variant = CrowdingVariant::Modified;
    auto matrix = [&objectives](const std::vector<Individual>& pop) {
        std::vector<std::vector<double>> values(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) {
            values[i].reserve(objectives.size());
            for (const auto& f : objectives) values[i].push_back(f(pop[i]));
        }
        return values;
    };
    return evolve(std::move(population), matrix, evaluate, cfg);
}

} // namespace simex
