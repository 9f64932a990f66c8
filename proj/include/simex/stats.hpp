#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "simex/errors.hpp"
#include "simex/evolution.hpp"

namespace simex {

/// Mean pairwise chromosome distance of the given (in-cluster) individuals;
/// fewer than two members count as zero diversity.
inline double population_diversity(const std::vector<Individual>& members) {
    if (members.size() < 2) return 0.0;
    double acc = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < members.size(); ++i)
        for (std::size_t j = i + 1; j < members.size(); ++j) {
            acc += chromosome_distance(members[i].chromosome, members[j].chromosome);
            ++pairs;
        }
    return acc / static_cast<double>(pairs);
}

namespace detail {

inline double population_variance(const std::vector<double>& xs) {
    if (xs.empty()) return 0.0;
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (double x : xs) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(xs.size());
}

} // namespace detail

/// Variance reduction rate: 1 - var(cluster values) / var(random values).
/// Close to 1 when the cluster pins the parameter to a narrow range.
inline double vrr(const std::vector<double>& cluster_values,
                  const std::vector<double>& random_values) {
    const double denom = detail::population_variance(random_values);
    if (denom <= 0.0) throw domain_error("vrr: random sample has zero variance");
    return 1.0 - detail::population_variance(cluster_values) / denom;
}

namespace detail {

// ranks with midpoint tie handling; returns (ranks of a within a++b, tie flag)
inline std::pair<double, bool> rank_sum(const std::vector<double>& a,
                                        const std::vector<double>& b) {
    std::vector<std::pair<double, int>> all;
    for (double x : a) all.emplace_back(x, 0);
    for (double x : b) all.emplace_back(x, 1);
    std::stable_sort(all.begin(), all.end(),
                     [](const auto& l, const auto& r) { return l.first < r.first; });
    double ra = 0.0;
    bool ties = false;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1].first == all[i].first) ++j;
        if (j > i) ties = true;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0; // average rank
        for (std::size_t k = i; k <= j; ++k)
            if (all[k].second == 0) ra += rank;
        i = j + 1;
    }
    return {ra, ties};
}

// P(U <= u) for the exact null distribution of the Mann-Whitney statistic
// without ties: count partitions via the standard recurrence.
inline double exact_u_cdf(double u, std::size_t n, std::size_t m) {
    const std::size_t umax = n * m;
    // c[k][v] = #ways to interleave k a-values among mm b-values with U = v,
    // via c_{k,mm}(v) = c_{k-1,mm}(v-mm) + c_{k,mm-1}(v)
    std::vector<std::vector<double>> g(n + 1, std::vector<double>(umax + 1, 0.0));
    for (std::size_t k = 0; k <= n; ++k) g[k][0] = 1.0; // mm = 0
    for (std::size_t mm = 1; mm <= m; ++mm) {
        std::vector<std::vector<double>> h(n + 1, std::vector<double>(umax + 1, 0.0));
        h[0][0] = 1.0;
        for (std::size_t k = 1; k <= n; ++k)
            for (std::size_t v = 0; v <= umax; ++v)
                h[k][v] = (v >= mm ? h[k - 1][v - mm] : 0.0) + g[k][v];
        g = std::move(h);
    }
    double total = 0.0, below = 0.0;
    for (std::size_t v = 0; v <= umax; ++v) {
        total += g[n][v];
        if (static_cast<double>(v) <= u + 1e-12) below += g[n][v];
    }
    return below / total;
}

} // namespace detail

/// Two-sided Mann-Whitney U test. Uses the exact null distribution for small
/// tie-free samples (|a|*|b| <= 400) and the normal approximation with tie
/// and continuity corrections otherwise.
inline double mann_whitney_u(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 3 || b.size() < 3) throw contract_error("mann_whitney_u: samples too small");
    const double n = static_cast<double>(a.size());
    const double m = static_cast<double>(b.size());
    const auto [ra, ties] = detail::rank_sum(a, b);
    const double ua = ra - n * (n + 1.0) / 2.0;
    const double ub = n * m - ua;
    const double u = std::min(ua, ub);

    if (!ties && a.size() * b.size() <= 400) {
        double p = 2.0 * detail::exact_u_cdf(u, a.size(), b.size());
        return std::min(1.0, p);
    }

    // tie-corrected variance
    std::vector<double> all = a;
    all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j + 1 < all.size() && all[j + 1] == all[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double nm = n + m;
    const double var = n * m / 12.0 * ((nm + 1.0) - tie_term / (nm * (nm - 1.0)));
    if (var <= 0.0) return 1.0; // everything tied
    const double mu = n * m / 2.0;
    const double z = (u - mu + 0.5) / std::sqrt(var); // continuity-corrected
    const double p = std::erfc(-z / std::sqrt(2.0));  // P(Z <= z) * 2, z <= 0
    return std::min(1.0, p);
}

/// Vargha-Delaney effect size: probability that a value drawn from a exceeds
/// one drawn from b, ties counted half.
inline double vargha_delaney_a12(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw contract_error("vargha_delaney_a12: empty sample");
    double wins = 0.0;
    for (double x : a)
        for (double y : b) {
            if (x > y) wins += 1.0;
            else if (x == y) wins += 0.5;
        }
    return wins / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

/// Two-sided Fisher's exact test on a 2x2 table (rows: groups, columns:
/// outcomes): sum of hypergeometric probabilities not exceeding the observed
/// table's probability.
inline double fisher_exact(long a, long b, long c, long d) {
    if (a < 0 || b < 0 || c < 0 || d < 0) throw contract_error("fisher_exact: negative count");
    const long r1 = a + b, r2 = c + d, c1 = a + c, c2 = b + d, n = r1 + r2;
    if (r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0) return 1.0; // degenerate margins

    auto log_choose = [](long nn, long kk) {
        return std::lgamma(static_cast<double>(nn) + 1.0) -
               std::lgamma(static_cast<double>(kk) + 1.0) -
               std::lgamma(static_cast<double>(nn - kk) + 1.0);
    };
    auto log_prob = [&](long x) {
        return log_choose(r1, x) + log_choose(r2, c1 - x) - log_choose(n, c1);
    };
    const double observed = log_prob(a);
    const long lo = std::max(0L, c1 - r2);
    const long hi = std::min(r1, c1);
    double p = 0.0;
    for (long x = lo; x <= hi; ++x) {
        const double lp = log_prob(x);
        if (lp <= observed + 1e-9) p += std::exp(lp);
    }
    return std::min(1.0, p);
}

} // namespace simex
