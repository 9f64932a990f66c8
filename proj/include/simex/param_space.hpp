#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "simex/errors.hpp"
#include "simex/rng.hpp"

namespace simex {

enum class ParamKind { Continuous, Integer, Categorical };

/// One named simulator parameter with box bounds (or a finite level set).
struct ParameterSpec {
    std::string name;
    ParamKind kind = ParamKind::Continuous;
    double lower = 0.0;
    double upper = 1.0;
    std::vector<std::string> levels; // categorical only

    std::size_t level_count() const { return levels.size(); }

    static ParameterSpec continuous(std::string name, double lo, double hi) {
        return {std::move(name), ParamKind::Continuous, lo, hi, {}};
    }
    static ParameterSpec integer(std::string name, double lo, double hi) {
        return {std::move(name), ParamKind::Integer, lo, hi, {}};
    }
    static ParameterSpec categorical(std::string name, std::vector<std::string> levels) {
        ParameterSpec s;
        s.name = std::move(name);
        s.kind = ParamKind::Categorical;
        s.lower = 0.0;
        s.upper = static_cast<double>(levels.size() - 1);
        s.levels = std::move(levels);
        return s;
    }
};

/// Ordered list of parameter specs; the order fixes chromosome component
/// positions. Immutable after construction, shared by reference.
class ParameterSpace {
public:
    explicit ParameterSpace(std::vector<ParameterSpec> specs) : specs_(std::move(specs)) {
        std::set<std::string> names;
        for (const auto& s : specs_) {
            if (!names.insert(s.name).second)
                throw domain_error("duplicate parameter name: " + s.name);
            if (s.kind == ParamKind::Categorical) {
                if (s.level_count() < 2)
                    throw domain_error("categorical parameter needs >= 2 levels: " + s.name);
            } else if (!(s.lower < s.upper)) {
                throw domain_error("parameter needs lower < upper: " + s.name);
            }
        }
        unit_dim_ = 0;
        for (const auto& s : specs_)
            unit_dim_ += (s.kind == ParamKind::Categorical) ? s.level_count() : 1;
    }

    std::size_t size() const { return specs_.size(); }
    const ParameterSpec& spec(std::size_t p) const { return specs_[p]; }
    const std::vector<ParameterSpec>& specs() const { return specs_; }

    // dimension of the unit-range vector produced by normalize()
    // (categoricals expand to one-hot blocks)
    std::size_t unit_dim() const { return unit_dim_; }

    int index_of(const std::string& name) const {
        for (std::size_t p = 0; p < specs_.size(); ++p)
            if (specs_[p].name == name) return static_cast<int>(p);
        return -1;
    }

private:
    std::vector<ParameterSpec> specs_;
    std::size_t unit_dim_ = 0;
};

using SpacePtr = std::shared_ptr<const ParameterSpace>;

/// One concrete simulator configuration: a raw value per parameter, in
/// declaration order. Categoricals hold the level index; integers may hold
/// fractional values during search and are rounded at the simulator boundary.
struct Chromosome {
    std::vector<double> values;
    SpacePtr space;

    bool operator==(const Chromosome& o) const { return values == o.values; }
};

inline void check_valid(const Chromosome& c) {
    if (!c.space) throw contract_error("chromosome without parameter space");
    if (c.values.size() != c.space->size())
        throw contract_error("chromosome dimension mismatch");
    for (std::size_t p = 0; p < c.values.size(); ++p) {
        const auto& s = c.space->spec(p);
        const double v = c.values[p];
        if (s.kind == ParamKind::Categorical) {
            if (v != std::floor(v) || v < 0.0 || v >= static_cast<double>(s.level_count()))
                throw domain_error("categorical level out of range for " + s.name);
        } else if (v < s.lower || v > s.upper) {
            throw domain_error("value out of bounds for " + s.name);
        }
    }
}

/// Maps every component affinely to [0, 1]; categoricals expand to one-hot
/// blocks. This is the representation used by distances and by rule-free
/// diagnostics, not the evolved representation.
inline std::vector<double> normalize(const Chromosome& c) {
    check_valid(c);
    std::vector<double> out;
    out.reserve(c.space->unit_dim());
    for (std::size_t p = 0; p < c.values.size(); ++p) {
        const auto& s = c.space->spec(p);
        if (s.kind == ParamKind::Categorical) {
            const auto hot = static_cast<std::size_t>(c.values[p]);
            for (std::size_t l = 0; l < s.level_count(); ++l)
                out.push_back(l == hot ? 1.0 : 0.0);
        } else {
            out.push_back((c.values[p] - s.lower) / (s.upper - s.lower));
        }
    }
    return out;
}

/// Inverse of normalize(); one-hot blocks collapse to the argmax level.
inline Chromosome denormalize(const std::vector<double>& unit, const SpacePtr& space) {
    if (unit.size() != space->unit_dim())
        throw contract_error("unit vector dimension mismatch");
    Chromosome c;
    c.space = space;
    c.values.reserve(space->size());
    std::size_t k = 0;
    for (std::size_t p = 0; p < space->size(); ++p) {
        const auto& s = space->spec(p);
        if (s.kind == ParamKind::Categorical) {
            std::size_t best = 0;
            for (std::size_t l = 1; l < s.level_count(); ++l)
                if (unit[k + l] > unit[k + best]) best = l;
            c.values.push_back(static_cast<double>(best));
            k += s.level_count();
        } else {
            c.values.push_back(s.lower + unit[k] * (s.upper - s.lower));
            ++k;
        }
    }
    return c;
}

/// 1 - cosine similarity of two raw vectors.
inline double cosine_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw contract_error("cosine_distance dimension mismatch");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        dot += a[k] * b[k];
        na += a[k] * a[k];
        nb += b[k] * b[k];
    }
    if (na == 0.0 || nb == 0.0) throw domain_error("cosine_distance on zero-norm vector");
    double cosv = dot / (std::sqrt(na) * std::sqrt(nb));
    cosv = std::clamp(cosv, -1.0, 1.0);
    return 1.0 - cosv;
}

/// Scale-free distance between two configurations in [0, 1]: cosine distance
/// of the unit-range vectors, padded with a constant 1.0 component so the
/// all-lower-bound configuration is not a zero vector.
inline double chromosome_distance(const Chromosome& i, const Chromosome& j) {
    if (i.space.get() != j.space.get() && !(i.space && j.space && i.space->specs().size() == j.space->specs().size()))
        throw contract_error("chromosome_distance across spaces");
    std::vector<double> a = normalize(i);
    std::vector<double> b = normalize(j);
    a.push_back(1.0);
    b.push_back(1.0);
    return cosine_distance(a, b);
}

/// Uniform draw over the box; categoricals draw a uniform level.
inline Chromosome random_chromosome(const SpacePtr& space, Rng& rng) {
    Chromosome c;
    c.space = space;
    c.values.reserve(space->size());
    for (std::size_t p = 0; p < space->size(); ++p) {
        const auto& s = space->spec(p);
        if (s.kind == ParamKind::Categorical)
            c.values.push_back(static_cast<double>(uniform_index(rng, s.level_count())));
        else
            c.values.push_back(uniform_real(rng, s.lower, s.upper));
    }
    return c;
}

} // namespace simex
