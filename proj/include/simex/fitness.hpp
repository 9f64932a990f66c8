#pragma once

#include <cstddef>
#include <limits>
#include <optional>
#include <vector>

#include "simex/evolution.hpp"

namespace simex {

/// Index of the reference individual closest to i by chromosome distance;
/// ties resolved to the lowest index.
inline std::size_t closest_index(const Individual& i, const std::vector<Individual>& refs) {
    if (refs.empty()) throw contract_error("closest_index: empty reference set");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < refs.size(); ++m) {
        const double d = chromosome_distance(i.chromosome, refs[m].chromosome);
        if (d < best_d) {
            best_d = d;
            best = m;
        }
    }
    return best;
}

namespace detail {

inline double nearest_distance(const Individual& i, const std::vector<Individual>& pop,
                               std::optional<std::size_t> skip_index, const Individual* skip_self) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m < pop.size(); ++m) {
        if (skip_index && *skip_index == m) continue;
        if (skip_self && &pop[m] == skip_self) continue;
        best = std::min(best, chromosome_distance(i.chromosome, pop[m].chromosome));
    }
    return best;
}

} // namespace detail

/// Cluster-membership-first fitness: inside the cluster it is one minus the
/// distance to the nearest population neighbour (minimizing it spreads the
/// population); outside it is the normalized medoid distance itself, which is
/// > 1 exactly when the individual is out, so membership always wins.
/// Parent role: the neighbour is taken in P excluding the individual itself.
inline double fitness_f1_parent(const std::vector<Individual>& population, std::size_t index) {
    if (population.size() < 2) throw contract_error("fitness_f1: population too small");
    const Individual& i = population[index];
    if (i.eval->rcc > 1.0) return i.eval->rcc;
    return 1.0 - detail::nearest_distance(i, population, index, nullptr);
}

/// Offspring role: the neighbour is taken in P minus the candidate
/// replacement parent (when one has been chosen).
inline double fitness_f1_offspring(const Individual& i, const std::vector<Individual>& population,
                                   std::optional<std::size_t> replaced_parent = std::nullopt) {
    if (population.size() < 2) throw contract_error("fitness_f1: population too small");
    if (i.eval->rcc > 1.0) return i.eval->rcc;
    return 1.0 - detail::nearest_distance(i, population, replaced_parent, nullptr);
}

/// Step 2.2 objective t: find, close to the t-th reference individual, an
/// input that stays in the cluster and makes the model fail. Piecewise by
/// decreasing urgency: out of the cluster (3 + medoid distance), wrong
/// reference (2 + distance to t), in place but correct (1 + one minus output
/// entropy), in place and failing (distance to t).
inline double fitness_f2(const Individual& i, const std::vector<Individual>& p1, std::size_t t) {
    if (p1.empty()) throw contract_error("fitness_f2: empty reference population");
    if (t >= p1.size()) throw contract_error("fitness_f2: reference index out of range");
    const double rcc = i.eval->rcc;
    if (rcc > 1.0) return 3.0 + rcc;
    if (closest_index(i, p1) != t)
        return 2.0 + chromosome_distance(i.chromosome, p1[t].chromosome);
    if (!i.eval->failing) return 1.0 + (1.0 - i.eval->entropy);
    return chromosome_distance(i.chromosome, p1[t].chromosome);
}

/// Step 2.3 objective t: find, close to the t-th unsafe individual, an input
/// the model gets right. Failing candidates score by output entropy plus the
/// distance to the cluster border; the second and third branch codomains
/// overlap on purpose (far-from-border failures are as useless as candidates
/// chasing the wrong reference).
inline double fitness_f3(const Individual& i, const std::vector<Individual>& p2, std::size_t t) {
    if (p2.empty()) throw contract_error("fitness_f3: empty reference population");
    if (t >= p2.size()) throw contract_error("fitness_f3: reference index out of range");
    if (closest_index(i, p2) != t)
        return 2.0 + chromosome_distance(i.chromosome, p2[t].chromosome);
    if (!i.eval->failing) return chromosome_distance(i.chromosome, p2[t].chromosome);
    return 1.0 + i.eval->entropy + std::abs(1.0 - i.eval->rcc);
}

} // namespace simex
