#pragma once

#include <algorithm>
#include <cstddef>
#include <deque>
#include <set>
#include <string>
#include <vector>

#include "simex/evolution.hpp"
#include "simex/fitness.hpp"

namespace simex {

// --- PaiR: pairwise-replacement search for diverse in-cluster individuals --

struct PairSearchConfig {
    std::size_t population_size = 25;  // s
    std::size_t iterations = 100;      // b
    std::size_t random_populations = 4; // r
    VariationConfig variation{0.7, 0.3, 15.0, 20.0, 2};
    std::uint64_t seed = 1;
};

struct PairSearchTrace {
    // in-cluster parent count recorded after every accepted replacement
    std::vector<std::size_t> in_cluster_after_replacement;
    std::vector<std::size_t> in_cluster_per_iteration;
    std::vector<double> best_fitness_per_iteration;
    std::vector<double> diversity_per_iteration;
};

struct PairSearchResult {
    std::vector<Individual> in_cluster;  // the returned population P1
    std::vector<Individual> final_population;
    PairSearchTrace trace;
};

namespace detail {

inline std::vector<double> parent_fitness(const std::vector<Individual>& pop) {
    std::vector<double> fit(pop.size());
    for (std::size_t k = 0; k < pop.size(); ++k) fit[k] = fitness_f1_parent(pop, k);
    return fit;
}

inline std::size_t count_in_cluster(const std::vector<Individual>& pop) {
    std::size_t n = 0;
    for (const auto& ind : pop) n += ind.in_cluster() ? 1 : 0;
    return n;
}

inline double mean_pairwise_distance(const std::vector<Individual>& pop) {
    if (pop.size() < 2) return 0.0;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < pop.size(); ++i)
        for (std::size_t j = i + 1; j < pop.size(); ++j) {
            acc += chromosome_distance(pop[i].chromosome, pop[j].chromosome);
            ++pairs;
        }
    return acc / static_cast<double>(pairs);
}

} // namespace detail

/// Evolves one population towards full cluster membership first, diversity
/// second. Starts from the best of r random populations; every iteration the
/// offspring are merged one at a time, best first, each replacing either the
/// worst parent (while any parent is still outside the cluster) or its
/// nearest parent, and only on strict fitness improvement. Fitness of both
/// populations is recomputed after every accepted replacement. Returns the
/// in-cluster members of the final population.
inline PairSearchResult pair_search(ClusterEvaluator& eval, const SpacePtr& space,
                                    const PairSearchConfig& cfg) {
    Rng rng = make_rng(cfg.seed);
    const std::size_t s = cfg.population_size;
    if (s < 2) throw contract_error("pair_search: population size must be >= 2");

    // pick the random population containing the overall best individual
    std::vector<Individual> population;
    double best_seen = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < std::max<std::size_t>(1, cfg.random_populations); ++r) {
        std::vector<Individual> candidate;
        candidate.reserve(s);
        for (std::size_t k = 0; k < s; ++k) candidate.push_back(eval.make(random_chromosome(space, rng)));
        const auto fit = detail::parent_fitness(candidate);
        const double lowest = *std::min_element(fit.begin(), fit.end());
        if (lowest < best_seen) {
            best_seen = lowest;
            population = std::move(candidate);
        }
    }

    PairSearchResult result;
    auto fit_p = detail::parent_fitness(population);

    for (std::size_t iter = 0; iter < cfg.iterations; ++iter) {
        // offspring via tournament selection + SBX + polynomial mutation
        std::vector<Individual> offspring;
        offspring.reserve(s);
        auto better = [&](std::size_t a, std::size_t b) { return fit_p[a] < fit_p[b]; };
        while (offspring.size() < s) {
            const auto pa = tournament_select(s, cfg.variation.tournament_size, rng, better);
            const auto pb = tournament_select(s, cfg.variation.tournament_size, rng, better);
            Chromosome c1 = population[pa].chromosome;
            Chromosome c2 = population[pb].chromosome;
            if (uniform_real(rng, 0.0, 1.0) < cfg.variation.crossover_prob)
                std::tie(c1, c2) = sbx_crossover(c1, c2, cfg.variation.eta_c, rng);
            mutate(c1, cfg.variation, rng);
            mutate(c2, cfg.variation, rng);
            offspring.push_back(eval.make(std::move(c1)));
            if (offspring.size() < s) offspring.push_back(eval.make(std::move(c2)));
        }

        std::vector<double> fit_o(offspring.size());
        auto refresh_offspring = [&] {
            for (std::size_t k = 0; k < offspring.size(); ++k)
                fit_o[k] = fitness_f1_offspring(offspring[k], population);
        };
        refresh_offspring();

        while (!offspring.empty()) {
            // process the best offspring first
            std::size_t pick = 0;
            for (std::size_t k = 1; k < offspring.size(); ++k)
                if (fit_o[k] < fit_o[pick]) pick = k;
            Individual candidate = std::move(offspring[pick]);
            offspring.erase(offspring.begin() + static_cast<std::ptrdiff_t>(pick));
            fit_o.erase(fit_o.begin() + static_cast<std::ptrdiff_t>(pick));

            std::size_t target;
            if (detail::count_in_cluster(population) < s) {
                target = static_cast<std::size_t>(
                    std::max_element(fit_p.begin(), fit_p.end()) - fit_p.begin());
            } else {
                target = closest_index(candidate, population);
            }
            const double candidate_fitness = fitness_f1_offspring(candidate, population, target);
            if (candidate_fitness < fit_p[target]) {
                population[target] = std::move(candidate);
                fit_p = detail::parent_fitness(population);
                refresh_offspring();
                result.trace.in_cluster_after_replacement.push_back(
                    detail::count_in_cluster(population));
            }
        }

        result.trace.in_cluster_per_iteration.push_back(detail::count_in_cluster(population));
        result.trace.best_fitness_per_iteration.push_back(
            *std::min_element(fit_p.begin(), fit_p.end()));
        std::vector<Individual> members;
        for (const auto& ind : population)
            if (ind.in_cluster()) members.push_back(ind);
        result.trace.diversity_per_iteration.push_back(detail::mean_pairwise_distance(members));
    }

    for (const auto& ind : population)
        if (ind.in_cluster()) result.in_cluster.push_back(ind);
    result.final_population = std::move(population);
    return result;
}

// --- step 2: three searches per cluster -------------------------------------

struct Step2Config {
    PairSearchConfig pair;                       // step 2.1
    EvolveConfig unsafe_search{25, 100, {0.3, 0.3, 15.0, 20.0, 2}, CrowdingVariant::Modified, 1};
    EvolveConfig safe_search{25, 100, {0.3, 0.3, 15.0, 20.0, 2}, CrowdingVariant::Modified, 1};
};

enum class Step2Status { Ok, Uncoverable, NoUnsafe };

struct Step2Result {
    Step2Status status = Step2Status::Ok;
    std::vector<Individual> p1; // diverse in-cluster
    std::vector<Individual> p2; // failing, in-cluster
    std::vector<Individual> p3; // passing
    PairSearchTrace pair_trace;
    std::vector<GenerationStats> unsafe_trace, safe_trace;
};

namespace detail {

inline std::vector<Individual> cycle_to_size(const std::vector<Individual>& base, std::size_t s) {
    std::vector<Individual> out;
    out.reserve(s);
    for (std::size_t k = 0; k < s; ++k) out.push_back(base[k % base.size()]);
    return out;
}

inline std::vector<Individual> distinct(const std::vector<Individual>& pop) {
    std::vector<Individual> out;
    std::set<std::vector<double>> seen;
    for (const auto& ind : pop)
        if (seen.insert(ind.chromosome.values).second) out.push_back(ind);
    return out;
}

} // namespace detail

/// Runs steps 2.1-2.3 for one cluster: the diverse population P1, the unsafe
/// population P2 (failing individuals of the cluster, one near each P1
/// member) and the safe population P3 (passing individuals near each P2
/// member, seeded from P2 itself).
inline Step2Result step2(ClusterEvaluator& eval, const SpacePtr& space, const Step2Config& cfg) {
    Step2Result result;
    auto pair = pair_search(eval, space, cfg.pair);
    result.p1 = std::move(pair.in_cluster);
    result.pair_trace = std::move(pair.trace);
    if (result.p1.empty()) {
        result.status = Step2Status::Uncoverable;
        return result;
    }

    const auto& p1 = result.p1;
    std::vector<ObjectiveFn> unsafe_objectives;
    for (std::size_t t = 0; t < p1.size(); ++t)
        unsafe_objectives.push_back(
            [&p1, t](const Individual& i) { return fitness_f2(i, p1, t); });
    auto evaluate = [&eval](Individual& ind) { eval.ensure(ind); };

    auto unsafe_run = nsga2_prime(detail::cycle_to_size(p1, cfg.unsafe_search.population_size),
                                  unsafe_objectives, evaluate, cfg.unsafe_search);
    result.unsafe_trace = std::move(unsafe_run.trace);
    std::vector<Individual> p2_raw;
    for (const auto& ind : unsafe_run.population)
        if (ind.failing() && ind.in_cluster()) p2_raw.push_back(ind);
    result.p2 = detail::distinct(p2_raw);
    if (result.p2.empty()) {
        result.status = Step2Status::NoUnsafe;
        return result;
    }

    const auto& p2 = result.p2;
    std::vector<ObjectiveFn> safe_objectives;
    for (std::size_t t = 0; t < p2.size(); ++t)
        safe_objectives.push_back(
            [&p2, t](const Individual& i) { return fitness_f3(i, p2, t); });
    auto safe_run = nsga2_prime(detail::cycle_to_size(p2, cfg.safe_search.population_size),
                                safe_objectives, evaluate, cfg.safe_search);
    result.safe_trace = std::move(safe_run.trace);
    std::vector<Individual> p3_raw;
    for (const auto& ind : safe_run.population)
        if (!ind.failing()) p3_raw.push_back(ind);
    result.p3 = detail::distinct(p3_raw);
    return result;
}

// --- comparison baselines ---------------------------------------------------

/// Plain NSGA-II on the single objective "normalized distance to the cluster
/// medoid", original crowding. Returns the final population.
inline EvolveResult nsga2_distance_baseline(ClusterEvaluator& eval, const SpacePtr& space,
                                            EvolveConfig cfg) {
    cfg.variant = CrowdingVariant::Original;
    Rng rng = make_rng(split_seed(cfg.seed, 101));
    std::vector<Individual> init;
    init.reserve(cfg.population_size);
    for (std::size_t k = 0; k < cfg.population_size; ++k)
        init.push_back(eval.make(random_chromosome(space, rng)));
    auto matrix = [](const std::vector<Individual>& pop) {
        std::vector<std::vector<double>> values(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) values[i] = {pop[i].eval->rcc};
        return values;
    };
    auto evaluate = [&eval](Individual& ind) { eval.ensure(ind); };
    return evolve(std::move(init), matrix, evaluate, cfg);
}

struct DeepNsga2Result {
    std::vector<Individual> selected; // top-s archive members by sparseness
    std::vector<Individual> archive;
    std::vector<Individual> population;
};

/// Archive-based diversity baseline: NSGA-II over (1 - sparseness, medoid
/// distance) with a zero sparseness threshold (any distinct in-cluster
/// chromosome joins the archive) and repopulation of the most dominated
/// parents. Repopulated randoms are injected into the offspring slot so all
/// algorithms spend the same number of evaluations per generation.
inline DeepNsga2Result deep_nsga2_baseline(ClusterEvaluator& eval, const SpacePtr& space,
                                           EvolveConfig cfg) {
    cfg.variant = CrowdingVariant::Original;
    Rng rng = make_rng(split_seed(cfg.seed, 202));
    std::vector<Individual> init;
    init.reserve(cfg.population_size);
    for (std::size_t k = 0; k < cfg.population_size; ++k)
        init.push_back(eval.make(random_chromosome(space, rng)));

    DeepNsga2Result result;
    std::set<std::vector<double>> archived;
    auto admit = [&](const std::vector<Individual>& pop) {
        for (const auto& ind : pop)
            if (ind.in_cluster() && archived.insert(ind.chromosome.values).second)
                result.archive.push_back(ind);
    };
    admit(init);

    auto sparseness = [&](const Individual& ind) {
        double best = 1.0; // empty archive: maximally sparse
        bool any = false;
        for (const auto& member : result.archive) {
            if (member.chromosome.values == ind.chromosome.values) continue;
            best = any ? std::min(best, chromosome_distance(ind.chromosome, member.chromosome))
                       : chromosome_distance(ind.chromosome, member.chromosome);
            any = true;
        }
        return best;
    };
    auto matrix = [&](const std::vector<Individual>& pop) {
        std::vector<std::vector<double>> values(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i)
            values[i] = {1.0 - sparseness(pop[i]), pop[i].eval->rcc};
        return values;
    };
    auto evaluate = [&eval](Individual& ind) { eval.ensure(ind); };

    const std::size_t replace = std::max<std::size_t>(1, (cfg.population_size + 9) / 10);
    cfg.offspring_count = cfg.population_size - replace; // immigrants fill the gap
    auto hook = [&](std::size_t, std::vector<Individual>& merged) {
        // merged = parents followed by offspring; swap the most dominated
        // parents for random immigrants, keeping evaluations per generation
        // at exactly population_size
        const std::size_t s = cfg.population_size;
        auto values = matrix(merged);
        std::vector<std::size_t> dominated_count(s, 0);
        for (std::size_t p = 0; p < s; ++p)
            for (std::size_t q = 0; q < merged.size(); ++q)
                if (p != q && dominates(values[q], values[p])) ++dominated_count[p];
        std::vector<std::size_t> order(s);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return dominated_count[a] > dominated_count[b];
        });
        for (std::size_t k = 0; k < replace; ++k)
            merged[order[k]] = eval.make(random_chromosome(space, rng));
        admit(merged);
    };

    auto run = evolve(std::move(init), matrix, evaluate, cfg, hook);
    result.population = std::move(run.population);

    std::vector<std::size_t> order(result.archive.size());
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> sp(result.archive.size());
    for (std::size_t k = 0; k < result.archive.size(); ++k) sp[k] = sparseness(result.archive[k]);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sp[a] > sp[b]; });
    for (std::size_t k = 0; k < std::min(cfg.population_size, order.size()); ++k)
        result.selected.push_back(result.archive[order[k]]);
    return result;
}

} // namespace simex
