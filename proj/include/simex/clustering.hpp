#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <vector>

#include "simex/errors.hpp"
#include "simex/neural.hpp"

namespace simex {

/// Euclidean norm of the entrywise heatmap difference.
inline double heatmap_distance(const Heatmap& a, const Heatmap& b) {
    if (a.layer_index != b.layer_index || a.values.size() != b.values.size())
        throw contract_error("heatmap_distance: layer or dimension mismatch");
    double acc = 0.0;
    for (std::size_t k = 0; k < a.values.size(); ++k) {
        const double d = a.values[k] - b.values[k];
        acc += d * d;
    }
    return std::sqrt(acc);
}

/// Cluster of failure-inducing inputs whose heatmaps are mutually close.
struct RootCauseCluster {
    std::vector<long> member_ids;
    std::vector<Heatmap> members;
    std::size_t medoid = 0;
    double radius = 0.0;
    std::size_t layer = 0;
    bool degenerate = false; // all members identical; skipped downstream

    const Heatmap& medoid_heatmap() const { return members[medoid]; }
};

/// Heatmap distance to the cluster medoid, normalized by the cluster radius;
/// <= 1 means the heatmap belongs to the cluster.
inline double rcc_distance(const RootCauseCluster& c, const Heatmap& h) {
    if (h.layer_index != c.layer) throw contract_error("rcc_distance: wrong layer");
    if (c.degenerate) throw degenerate_cluster_error("rcc_distance on zero-radius cluster");
    return heatmap_distance(h, c.medoid_heatmap()) / c.radius;
}

struct ClusteringResult {
    std::vector<RootCauseCluster> clusters;
    std::size_t layer = 0;
    double weighted_icd = 0.0;
    std::vector<double> icd_curve; // weighted icd for k = 1..max_k on the chosen layer
};

namespace detail {

inline std::vector<std::vector<double>> pairwise_heatmap_distances(const std::vector<Heatmap>& hs) {
    const std::size_t n = hs.size();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            d[i][j] = d[j][i] = heatmap_distance(hs[i], hs[j]);
    return d;
}

// Average-linkage agglomeration; returns the flat assignment for every cut
// k = 1..max_k (assignments[k-1][i] = cluster id of item i at k clusters).
inline std::vector<std::vector<int>> average_linkage_cuts(
    const std::vector<std::vector<double>>& dist, std::size_t max_k) {
    const std::size_t n = dist.size();
    std::vector<std::vector<std::size_t>> groups(n);
    for (std::size_t i = 0; i < n; ++i) groups[i] = {i};
    std::vector<std::vector<double>> link = dist; // between active groups
    std::vector<bool> active(n, true);

    std::vector<std::vector<int>> cuts(max_k);
    auto snapshot = [&](std::size_t k) {
        std::vector<int> assign(n, -1);
        int next = 0;
        for (std::size_t g = 0; g < n; ++g)
            if (active[g]) {
                for (auto item : groups[g]) assign[item] = next;
                ++next;
            }
        cuts[k - 1] = std::move(assign);
    };

    std::size_t remaining = n;
    if (remaining <= max_k) snapshot(remaining);
    while (remaining > 1) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < n; ++i) {
            if (!active[i]) continue;
            for (std::size_t j = i + 1; j < n; ++j) {
                if (!active[j]) continue;
                if (link[i][j] < best) {
                    best = link[i][j];
                    bi = i;
                    bj = j;
                }
            }
        }
        // Lance-Williams update for average linkage
        const double wi = static_cast<double>(groups[bi].size());
        const double wj = static_cast<double>(groups[bj].size());
        for (std::size_t m = 0; m < n; ++m) {
            if (!active[m] || m == bi || m == bj) continue;
            link[bi][m] = link[m][bi] = (wi * link[bi][m] + wj * link[bj][m]) / (wi + wj);
        }
        groups[bi].insert(groups[bi].end(), groups[bj].begin(), groups[bj].end());
        active[bj] = false;
        --remaining;
        if (remaining <= max_k) snapshot(remaining);
    }
    return cuts;
}

// sum over clusters of (relative size) * (mean pairwise distance inside);
// singletons contribute zero
inline double weighted_intra_cluster_distance(const std::vector<int>& assign,
                                              const std::vector<std::vector<double>>& dist) {
    const std::size_t n = assign.size();
    const int k = *std::max_element(assign.begin(), assign.end()) + 1;
    std::vector<double> sum(static_cast<std::size_t>(k), 0.0);
    std::vector<std::size_t> count(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) ++count[static_cast<std::size_t>(assign[i])];
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (assign[i] == assign[j]) sum[static_cast<std::size_t>(assign[i])] += dist[i][j];
    double icd = 0.0;
    for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
        if (count[c] < 2) continue;
        const double pairs = 0.5 * static_cast<double>(count[c]) * static_cast<double>(count[c] - 1);
        icd += (static_cast<double>(count[c]) / static_cast<double>(n)) * (sum[c] / pairs);
    }
    return icd;
}

// Kneedle-style knee: normalize the curve to the unit square and take the
// point farthest (perpendicular) from the chord between the endpoints.
inline std::size_t knee_point(const std::vector<double>& curve) {
    const std::size_t m = curve.size();
    if (m < 3) return m; // nothing to bend; take the last cut
    const double y0 = curve.front(), y1 = curve.back();
    if (std::abs(y0 - y1) < 1e-300) return 1;
    std::size_t best = 1;
    double best_d = -1.0;
    for (std::size_t k = 0; k < m; ++k) {
        const double x = static_cast<double>(k) / static_cast<double>(m - 1);
        const double y = (curve[k] - y1) / (y0 - y1); // 1 at k=1, 0 at k=max
        const double d = (1.0 - x - y) / std::numbers::sqrt2; // signed dist to the diagonal
        if (d > best_d) {
            best_d = d;
            best = k + 1;
        }
    }
    return best;
}

} // namespace detail

/// Builds clusters from a flat assignment, computing medoid and radius.
inline std::vector<RootCauseCluster> build_clusters(const std::vector<Heatmap>& heatmaps,
                                                    const std::vector<long>& ids,
                                                    const std::vector<int>& assign,
                                                    const std::vector<std::vector<double>>& dist,
                                                    std::size_t layer) {
    const int k = *std::max_element(assign.begin(), assign.end()) + 1;
    std::vector<RootCauseCluster> clusters(static_cast<std::size_t>(k));
    std::vector<std::vector<std::size_t>> idx(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < assign.size(); ++i)
        idx[static_cast<std::size_t>(assign[i])].push_back(i);

    for (std::size_t c = 0; c < clusters.size(); ++c) {
        auto& rcc = clusters[c];
        rcc.layer = layer;
        for (auto i : idx[c]) {
            rcc.member_ids.push_back(ids[i]);
            rcc.members.push_back(heatmaps[i]);
        }
        // medoid: minimizes the average pairwise distance to the rest
        const auto& mem = idx[c];
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mem.size(); ++a) {
            double acc = 0.0;
            for (std::size_t b = 0; b < mem.size(); ++b)
                if (a != b) acc += dist[mem[a]][mem[b]];
            if (acc < best) {
                best = acc;
                rcc.medoid = a;
            }
        }
        double radius = 0.0;
        for (std::size_t a = 0; a < mem.size(); ++a)
            radius = std::max(radius, dist[mem[rcc.medoid]][mem[a]]);
        if (radius <= 0.0) {
            rcc.degenerate = true;
            rcc.radius = std::numeric_limits<double>::epsilon();
        } else {
            rcc.radius = radius;
        }
    }
    return clusters;
}

/// HUDD core step: per layer, agglomerate the failure heatmaps, pick the
/// cluster count at the knee of the weighted intra-cluster distance curve,
/// then keep the layer whose knee configuration has the smallest weighted
/// intra-cluster distance. Layers whose heatmaps are all identical carry no
/// structure and are skipped.
inline ClusteringResult cluster_failures(const std::vector<std::vector<Heatmap>>& heatmaps_per_layer,
                                         const std::vector<long>& ids, std::size_t max_k = 10) {
    if (heatmaps_per_layer.empty() || heatmaps_per_layer.front().size() < 3)
        throw insufficient_failures_error("clustering needs at least 3 failing inputs");
    const std::size_t n = heatmaps_per_layer.front().size();
    max_k = std::min(max_k, n - 1);

    ClusteringResult best;
    bool found = false;
    for (std::size_t layer = 0; layer < heatmaps_per_layer.size(); ++layer) {
        const auto& hs = heatmaps_per_layer[layer];
        if (hs.size() != n) throw contract_error("uneven heatmap counts across layers");
        const auto dist = detail::pairwise_heatmap_distances(hs);
        double max_d = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) max_d = std::max(max_d, dist[i][j]);
        if (max_d <= 0.0) continue; // constant layer

        const auto cuts = detail::average_linkage_cuts(dist, max_k);
        std::vector<double> curve;
        for (std::size_t k = 1; k <= max_k; ++k)
            curve.push_back(detail::weighted_intra_cluster_distance(cuts[k - 1], dist));
        const std::size_t k = detail::knee_point(curve);
        const double icd = curve[k - 1];
        if (!found || icd < best.weighted_icd) {
            found = true;
            best.layer = layer;
            best.weighted_icd = icd;
            best.icd_curve = curve;
            best.clusters = build_clusters(hs, ids, cuts[k - 1], dist, layer);
        }
    }
    if (!found)
        throw insufficient_failures_error("all layers produced constant heatmaps");
    return best;
}

} // namespace simex
