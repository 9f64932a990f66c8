#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "simex/errors.hpp"
#include "simex/param_space.hpp"

namespace simex {

enum class CmpOp { Lt, Le, Gt, Ge, Eq, Ne };

/// Atomic comparison over one parameter. Numeric ops use the threshold;
/// Eq/Ne compare a categorical level.
struct Atom {
    std::string param;
    CmpOp op = CmpOp::Le;
    double threshold = 0.0;
    std::string level;

    static Atom cmp(std::string param, CmpOp op, double threshold) {
        Atom a;
        a.param = std::move(param);
        a.op = op;
        a.threshold = threshold;
        return a;
    }
    static Atom is_level(std::string param, std::string level, bool negated = false) {
        Atom a;
        a.param = std::move(param);
        a.op = negated ? CmpOp::Ne : CmpOp::Eq;
        a.level = std::move(level);
        return a;
    }
};

inline bool eval_atom(const Atom& a, const Chromosome& c) {
    const int p = c.space->index_of(a.param);
    if (p < 0) throw domain_error("unknown parameter in expression: " + a.param);
    const auto& spec = c.space->spec(static_cast<std::size_t>(p));
    const double v = c.values[static_cast<std::size_t>(p)];
    switch (a.op) {
        case CmpOp::Lt: return v < a.threshold;
        case CmpOp::Le: return v <= a.threshold;
        case CmpOp::Gt: return v > a.threshold;
        case CmpOp::Ge: return v >= a.threshold;
        case CmpOp::Eq:
        case CmpOp::Ne: {
            if (spec.kind != ParamKind::Categorical)
                throw domain_error("level comparison on non-categorical parameter: " + a.param);
            const auto it = std::find(spec.levels.begin(), spec.levels.end(), a.level);
            if (it == spec.levels.end())
                throw domain_error("unknown level " + a.level + " for " + a.param);
            const bool eq = static_cast<std::size_t>(it - spec.levels.begin()) ==
                            static_cast<std::size_t>(v);
            return a.op == CmpOp::Eq ? eq : !eq;
        }
    }
    return false;
}

/// IF condition THEN class; an empty condition is the default rule.
struct Rule {
    std::vector<Atom> condition;
    bool predicts_error = false;

    bool matches(const Chromosome& c) const {
        for (const auto& a : condition)
            if (!eval_atom(a, c)) return false;
        return true;
    }
};

/// Ordered rules, first match wins; the last rule is the catch-all default.
struct DecisionList {
    std::vector<Rule> rules;
    bool single_class = false; // degenerate training input

    bool predicts_error(const Chromosome& c) const {
        for (const auto& r : rules)
            if (r.matches(c)) return r.predicts_error;
        throw contract_error("decision list without default rule");
    }
};

struct LabeledPoint {
    Chromosome chromosome;
    bool error = false;
};

struct PartConfig {
    double pruning_confidence = 0.25;
    std::size_t min_leaf_support = 2;
};

namespace part_detail {

inline double entropy2(std::size_t err, std::size_t total) {
    if (total == 0 || err == 0 || err == total) return 0.0;
    const double p = static_cast<double>(err) / static_cast<double>(total);
    return -p * std::log2(p) - (1.0 - p) * std::log2(1.0 - p);
}

// C4.5 pessimistic error: N times the upper confidence bound of the observed
// error rate (z fixed by the confidence factor).
inline double pessimistic_errors(std::size_t errors, std::size_t total, double z) {
    if (total == 0) return 0.0;
    const double nd = static_cast<double>(total);
    const double f = static_cast<double>(errors) / nd;
    const double z2 = z * z;
    const double u =
        (f + z2 / (2.0 * nd) + z * std::sqrt(f / nd - f * f / nd + z2 / (4.0 * nd * nd))) /
        (1.0 + z2 / nd);
    return nd * u;
}

inline double z_for_confidence(double cf) {
    // inverse normal upper-tail via bisection; cf in (0, 0.5]
    double lo = 0.0, hi = 8.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        const double tail = 0.5 * std::erfc(mid / std::sqrt(2.0));
        (tail > cf ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

struct Node {
    Atom split;                  // valid when !leaf; matches -> left child
    std::unique_ptr<Node> left;  // split true
    std::unique_ptr<Node> right; // split false
    bool leaf = true;
    bool predicts_error = false;
    std::size_t support = 0;       // training points reaching this node
    std::size_t misclassified = 0; // under the majority class
};

struct Builder {
    const std::vector<LabeledPoint>& points;
    PartConfig cfg;
    double z;

    std::size_t count_errors(const std::vector<std::size_t>& idx) const {
        std::size_t e = 0;
        for (auto i : idx) e += points[i].error ? 1 : 0;
        return e;
    }

    std::unique_ptr<Node> make_leaf(const std::vector<std::size_t>& idx) const {
        auto node = std::make_unique<Node>();
        const std::size_t err = count_errors(idx);
        node->predicts_error = 2 * err >= idx.size(); // majority, error wins ties
        node->support = idx.size();
        node->misclassified = node->predicts_error ? idx.size() - err : err;
        return node;
    }

    // negation of an atom used for the "right" branch
    static Atom negate(const Atom& a) {
        Atom n = a;
        switch (a.op) {
            case CmpOp::Le: n.op = CmpOp::Gt; break;
            case CmpOp::Gt: n.op = CmpOp::Le; break;
            case CmpOp::Lt: n.op = CmpOp::Ge; break;
            case CmpOp::Ge: n.op = CmpOp::Lt; break;
            case CmpOp::Eq: n.op = CmpOp::Ne; break;
            case CmpOp::Ne: n.op = CmpOp::Eq; break;
        }
        return n;
    }

    bool best_split(const std::vector<std::size_t>& idx, Atom& out) const {
        const SpacePtr& space = points[idx.front()].chromosome.space;
        const std::size_t total = idx.size();
        const double base = entropy2(count_errors(idx), total);
        double best_ratio = 0.0;
        bool found = false;

        auto consider = [&](const Atom& atom) {
            std::size_t nl = 0, el = 0, er = 0;
            for (auto i : idx) {
                const bool hit = eval_atom(atom, points[i].chromosome);
                if (hit) {
                    ++nl;
                    el += points[i].error ? 1 : 0;
                } else {
                    er += points[i].error ? 1 : 0;
                }
            }
            const std::size_t nr = total - nl;
            if (nl < cfg.min_leaf_support || nr < cfg.min_leaf_support) return;
            const double pl = static_cast<double>(nl) / static_cast<double>(total);
            const double gain = base - pl * entropy2(el, nl) - (1.0 - pl) * entropy2(er, nr);
            if (gain <= 1e-12) return;
            const double split_info = -pl * std::log2(pl) - (1.0 - pl) * std::log2(1.0 - pl);
            if (split_info <= 1e-12) return;
            const double ratio = gain / split_info;
            if (!found || ratio > best_ratio) {
                found = true;
                best_ratio = ratio;
                out = atom;
            }
        };

        for (std::size_t p = 0; p < space->size(); ++p) {
            const auto& spec = space->spec(p);
            if (spec.kind == ParamKind::Categorical) {
                for (const auto& level : spec.levels)
                    consider(Atom::is_level(spec.name, level));
                continue;
            }
            std::vector<double> vals;
            vals.reserve(total);
            for (auto i : idx) vals.push_back(points[i].chromosome.values[p]);
            std::sort(vals.begin(), vals.end());
            vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
            for (std::size_t k = 0; k + 1 < vals.size(); ++k)
                consider(Atom::cmp(spec.name, CmpOp::Le, 0.5 * (vals[k] + vals[k + 1])));
        }
        return found;
    }

    std::unique_ptr<Node> build(const std::vector<std::size_t>& idx) const {
        const std::size_t err = count_errors(idx);
        if (err == 0 || err == idx.size() || idx.size() < 2 * cfg.min_leaf_support)
            return make_leaf(idx);
        Atom split;
        if (!best_split(idx, split)) return make_leaf(idx);

        std::vector<std::size_t> left, right;
        for (auto i : idx)
            (eval_atom(split, points[i].chromosome) ? left : right).push_back(i);
        auto node = std::make_unique<Node>();
        node->leaf = false;
        node->split = split;
        node->support = idx.size();
        node->left = build(left);
        node->right = build(right);
        prune(*node, idx);
        return node;
    }

    // subtree replacement with the C4.5 pessimistic error estimate
    void prune(Node& node, const std::vector<std::size_t>& idx) const {
        if (node.leaf) return;
        double subtree = subtree_errors(node);
        const std::size_t err = count_errors(idx);
        const std::size_t as_leaf_mis = std::min(err, idx.size() - err);
        const double as_leaf = pessimistic_errors(as_leaf_mis, idx.size(), z);
        if (as_leaf <= subtree + 0.1) {
            auto leaf = make_leaf(idx);
            node = std::move(*leaf);
        }
    }

    double subtree_errors(const Node& node) const {
        if (node.leaf) return pessimistic_errors(node.misclassified, node.support, z);
        return subtree_errors(*node.left) + subtree_errors(*node.right);
    }
};

struct LeafRef {
    const Node* node;
    std::vector<Atom> path;
};

inline void collect_leaves(const Node& node, std::vector<Atom>& path, std::vector<LeafRef>& out) {
    if (node.leaf) {
        out.push_back({&node, path});
        return;
    }
    path.push_back(node.split);
    collect_leaves(*node.left, path, out);
    path.back() = Builder::negate(node.split);
    collect_leaves(*node.right, path, out);
    path.pop_back();
}

// leaf with the largest support; ties go to the first in DFS order
inline LeafRef largest_leaf(const Node& root) {
    std::vector<Atom> path;
    std::vector<LeafRef> leaves;
    collect_leaves(root, path, leaves);
    std::size_t best = 0;
    for (std::size_t k = 1; k < leaves.size(); ++k)
        if (leaves[k].node->support > leaves[best].node->support) best = k;
    return leaves[best];
}

} // namespace part_detail

/// Separate-and-conquer PART: repeatedly grow a pruned C4.5 tree on the
/// remaining points, turn the largest-support leaf into a rule, drop the
/// covered points. Whatever is left feeds the default rule.
inline DecisionList learn_part(const std::vector<LabeledPoint>& points,
                               const PartConfig& cfg = {}) {
    if (points.size() < 10) throw contract_error("learn_part: need at least 10 points");
    DecisionList list;
    const double z = part_detail::z_for_confidence(cfg.pruning_confidence);

    std::vector<std::size_t> remaining(points.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    std::size_t global_errors = 0;
    for (const auto& p : points) global_errors += p.error ? 1 : 0;
    const bool global_majority_error = 2 * global_errors >= points.size();
    if (global_errors == 0 || global_errors == points.size()) {
        list.single_class = true;
        list.rules.push_back(Rule{{}, global_errors > 0});
        return list;
    }

    part_detail::Builder builder{points, cfg, z};
    while (remaining.size() >= cfg.min_leaf_support) {
        const std::size_t err = builder.count_errors(remaining);
        if (err == 0 || err == remaining.size()) break; // pure leftover -> default
        auto tree = builder.build(remaining);
        if (tree->leaf) break; // nothing separable anymore

        const auto leaf = part_detail::largest_leaf(*tree);
        Rule rule;
        rule.condition = leaf.path;
        rule.predicts_error = leaf.node->predicts_error;
        list.rules.push_back(rule);

        std::vector<std::size_t> kept;
        for (auto i : remaining)
            if (!list.rules.back().matches(points[i].chromosome)) kept.push_back(i);
        if (kept.size() == remaining.size()) {
            list.rules.pop_back(); // rule covers nothing; avoid looping
            break;
        }
        remaining = std::move(kept);
        if (remaining.empty()) break;
    }

    Rule def;
    if (!remaining.empty()) {
        const std::size_t err = builder.count_errors(remaining);
        def.predicts_error = 2 * err >= remaining.size();
    } else {
        def.predicts_error = global_majority_error;
    }
    list.rules.push_back(def);
    return list;
}

/// Training accuracy of a decision list.
inline double list_accuracy(const DecisionList& list, const std::vector<LabeledPoint>& points) {
    std::size_t hits = 0;
    for (const auto& p : points)
        if (list.predicts_error(p.chromosome) == p.error) ++hits;
    return static_cast<double>(hits) / static_cast<double>(points.size());
}

} // namespace simex
