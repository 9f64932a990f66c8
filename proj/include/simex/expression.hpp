#pragma once

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "simex/rules.hpp"
#include "simex/rng.hpp"

namespace simex {

/// One possibly-negated conjunction of atoms (a rule condition or its
/// negation).
struct Term {
    bool negated = false;
    std::vector<Atom> atoms;

    bool holds(const Chromosome& c) const {
        bool all = true;
        for (const auto& a : atoms)
            if (!eval_atom(a, c)) {
                all = false;
                break;
            }
        return negated ? !all : all;
    }
};

using Disjunct = std::vector<Term>; // conjunction of terms

/// Disjunction of mutually exclusive conjunctions plus a bounding box for
/// parameters the rules never mention. A chromosome satisfies the expression
/// iff it satisfies every box atom and at least one disjunct.
struct UnsafeExpression {
    std::vector<Atom> box;
    std::vector<Disjunct> disjuncts;
};

inline bool evaluate_expression(const UnsafeExpression& e, const Chromosome& c) {
    for (const auto& a : e.box)
        if (!eval_atom(a, c)) return false;
    if (e.disjuncts.empty()) return true; // box-only expression
    for (const auto& d : e.disjuncts) {
        bool all = true;
        for (const auto& t : d)
            if (!t.holds(c)) {
                all = false;
                break;
            }
        if (all) return true;
    }
    return false;
}

// --- compilation ------------------------------------------------------------

/// For every error-predicting rule, emit the conjunction of the negations of
/// all preceding rules with the rule's own condition; correct-predicting
/// rules only contribute their negations downstream. Parameters mentioned by
/// no rule are constrained to their [min, max] over the unsafe points.
inline UnsafeExpression compile_expression(const DecisionList& list,
                                           const std::vector<Chromosome>& unsafe_points) {
    UnsafeExpression expr;
    std::vector<Term> preceding;
    bool any_error_rule = false;
    for (const auto& rule : list.rules) {
        if (rule.predicts_error) {
            any_error_rule = true;
            Disjunct d = preceding;
            if (!rule.condition.empty()) d.push_back(Term{false, rule.condition});
            expr.disjuncts.push_back(std::move(d));
        }
        if (!rule.condition.empty()) preceding.push_back(Term{true, rule.condition});
    }
    if (!any_error_rule)
        throw unsatisfiable_expression_error("decision list predicts no errors");

    // a default error rule with no preceding conditions yields an empty
    // conjunction (always true); the whole disjunction collapses to it
    for (const auto& d : expr.disjuncts)
        if (d.empty()) {
            expr.disjuncts.clear();
            break;
        }

    if (!unsafe_points.empty()) {
        const SpacePtr& space = unsafe_points.front().space;
        std::set<std::string> mentioned;
        for (const auto& rule : list.rules)
            for (const auto& a : rule.condition) mentioned.insert(a.param);
        for (std::size_t p = 0; p < space->size(); ++p) {
            const auto& spec = space->spec(p);
            if (mentioned.count(spec.name)) continue;
            if (spec.kind == ParamKind::Categorical) continue; // no range to bound
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& c : unsafe_points) {
                lo = std::min(lo, c.values[p]);
                hi = std::max(hi, c.values[p]);
            }
            expr.box.push_back(Atom::cmp(spec.name, CmpOp::Ge, lo));
            expr.box.push_back(Atom::cmp(spec.name, CmpOp::Le, hi));
        }
    }
    return expr;
}

// --- printing ---------------------------------------------------------------

/// Shortest decimal that round-trips to the same double.
inline std::string format_number(double v) {
    for (int prec = 1; prec <= 17; ++prec) {
        std::ostringstream os;
        os.precision(prec);
        os << v;
        if (std::stod(os.str()) == v) return os.str();
    }
    return std::to_string(v);
}

inline std::string to_string(const Atom& a) {
    switch (a.op) {
        case CmpOp::Lt: return a.param + " < " + format_number(a.threshold);
        case CmpOp::Le: return a.param + " <= " + format_number(a.threshold);
        case CmpOp::Gt: return a.param + " > " + format_number(a.threshold);
        case CmpOp::Ge: return a.param + " >= " + format_number(a.threshold);
        case CmpOp::Eq: return a.param + " = " + a.level;
        case CmpOp::Ne: return "!(" + a.param + " = " + a.level + ")";
    }
    return {};
}

inline std::string to_string(const Term& t) {
    std::string body;
    for (std::size_t k = 0; k < t.atoms.size(); ++k) {
        if (k) body += " & ";
        body += to_string(t.atoms[k]);
    }
    return (t.negated ? "!(" : "(") + body + ")";
}

inline std::string to_string(const Disjunct& d) {
    if (d.size() == 1) return to_string(d.front());
    std::string out = "(";
    for (std::size_t k = 0; k < d.size(); ++k) {
        if (k) out += " & ";
        out += to_string(d[k]);
    }
    return out + ")";
}

inline std::string to_string(const UnsafeExpression& e) {
    std::string disj;
    for (std::size_t k = 0; k < e.disjuncts.size(); ++k) {
        if (k) disj += " || ";
        disj += to_string(e.disjuncts[k]);
    }
    if (e.box.empty()) return disj;
    std::string out;
    for (std::size_t k = 0; k < e.box.size(); ++k) {
        if (k) out += " & ";
        out += to_string(e.box[k]);
    }
    if (!disj.empty()) out += " & (" + disj + ")";
    return out;
}

/// Decision list in the one-rule-per-line style.
inline std::string to_string(const DecisionList& list) {
    std::string out;
    for (const auto& r : list.rules) {
        if (r.condition.empty()) {
            out += "(default)";
        } else {
            for (std::size_t k = 0; k < r.condition.size(); ++k) {
                if (k) out += " & ";
                out += to_string(r.condition[k]);
            }
        }
        out += " : class=";
        out += r.predicts_error ? "DNN-error" : "DNN-correct";
        out += "\n";
    }
    return out;
}

// --- parsing ----------------------------------------------------------------

namespace expr_detail {

struct Lexer {
    std::string src;
    std::size_t pos = 0;

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }
    bool eof() {
        skip_ws();
        return pos >= src.size();
    }
    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }
    bool consume(const std::string& tok) {
        skip_ws();
        if (src.compare(pos, tok.size(), tok) == 0) {
            pos += tok.size();
            return true;
        }
        return false;
    }
    void expect(const std::string& tok) {
        if (!consume(tok))
            throw io_error("expression parse error at position " + std::to_string(pos) +
                           ": expected '" + tok + "'");
    }
    std::string identifier() {
        skip_ws();
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        if (pos == start) throw io_error("expression parse error: identifier expected");
        return src.substr(start, pos - start);
    }
    double number() {
        skip_ws();
        std::size_t parsed = 0;
        const double v = std::stod(src.substr(pos), &parsed);
        pos += parsed;
        return v;
    }
};

inline Atom parse_cmp(Lexer& lx) {
    Atom a;
    a.param = lx.identifier();
    if (lx.consume("<=")) a.op = CmpOp::Le;
    else if (lx.consume(">=")) a.op = CmpOp::Ge;
    else if (lx.consume("<")) a.op = CmpOp::Lt;
    else if (lx.consume(">")) a.op = CmpOp::Gt;
    else if (lx.consume("=")) a.op = CmpOp::Eq;
    else throw io_error("expression parse error: comparison operator expected");
    if (a.op == CmpOp::Eq) a.level = lx.identifier();
    else a.threshold = lx.number();
    return a;
}

// atom inside a group: a comparison, or a negated level test
inline Atom parse_group_atom(Lexer& lx) {
    if (lx.consume("!")) {
        lx.expect("(");
        Atom a = parse_cmp(lx);
        lx.expect(")");
        if (a.op != CmpOp::Eq) throw io_error("expression parse error: only level atoms negate inline");
        a.op = CmpOp::Ne;
        return a;
    }
    return parse_cmp(lx);
}

inline Term parse_term(Lexer& lx) {
    Term t;
    t.negated = lx.consume("!");
    lx.expect("(");
    t.atoms.push_back(parse_group_atom(lx));
    while (lx.consume("&")) t.atoms.push_back(parse_group_atom(lx));
    lx.expect(")");
    return t;
}

inline Disjunct parse_disjunct(Lexer& lx) {
    Disjunct d;
    // a parenthesized list of terms starts "((" or "(!"; a bare term "(name"
    if (lx.peek() == '(') {
        const std::size_t mark = lx.pos;
        lx.expect("(");
        const char c = lx.peek();
        if (c == '(' || c == '!') {
            d.push_back(parse_term(lx));
            while (lx.consume("&")) d.push_back(parse_term(lx));
            lx.expect(")");
            return d;
        }
        lx.pos = mark; // plain term after all
    }
    d.push_back(parse_term(lx));
    return d;
}

} // namespace expr_detail

/// Parses the textual expression grammar emitted by to_string().
inline UnsafeExpression parse_expression(const std::string& text) {
    expr_detail::Lexer lx{text, 0};
    UnsafeExpression e;
    // leading bare comparisons are box atoms
    while (!lx.eof() && lx.peek() != '(' && lx.peek() != '!') {
        e.box.push_back(expr_detail::parse_cmp(lx));
        if (!lx.consume("&")) {
            if (!lx.eof()) throw io_error("expression parse error: trailing input after box");
            return e;
        }
    }
    if (lx.eof()) {
        if (e.box.empty()) throw io_error("expression parse error: empty expression");
        return e;
    }
    const bool wrapped = !e.box.empty();
    if (wrapped) {
        lx.expect("(");
    }
    e.disjuncts.push_back(expr_detail::parse_disjunct(lx));
    while (lx.consume("||")) e.disjuncts.push_back(expr_detail::parse_disjunct(lx));
    if (wrapped) lx.expect(")");
    if (!lx.eof()) throw io_error("expression parse error: trailing input");
    return e;
}

// --- sampling ---------------------------------------------------------------

namespace expr_detail {

struct Intervals {
    std::vector<double> lo, hi;              // per parameter
    std::vector<int> forced_level;           // -1 when free
    std::vector<std::set<std::size_t>> banned_levels;

    explicit Intervals(const ParameterSpace& space)
        : forced_level(space.size(), -1), banned_levels(space.size()) {
        for (std::size_t p = 0; p < space.size(); ++p) {
            lo.push_back(space.spec(p).lower);
            hi.push_back(space.spec(p).upper);
        }
    }

    bool apply(const Atom& a, const ParameterSpace& space) {
        const int pi = space.index_of(a.param);
        if (pi < 0) throw domain_error("unknown parameter in expression: " + a.param);
        const auto p = static_cast<std::size_t>(pi);
        const auto& spec = space.spec(p);
        switch (a.op) {
            case CmpOp::Lt:
            case CmpOp::Le: hi[p] = std::min(hi[p], a.threshold); break;
            case CmpOp::Gt:
            case CmpOp::Ge: lo[p] = std::max(lo[p], a.threshold); break;
            case CmpOp::Eq: {
                const auto it = std::find(spec.levels.begin(), spec.levels.end(), a.level);
                if (it == spec.levels.end()) return false;
                const int level = static_cast<int>(it - spec.levels.begin());
                if (forced_level[p] >= 0 && forced_level[p] != level) return false;
                forced_level[p] = level;
                break;
            }
            case CmpOp::Ne: {
                const auto it = std::find(spec.levels.begin(), spec.levels.end(), a.level);
                if (it != spec.levels.end())
                    banned_levels[p].insert(static_cast<std::size_t>(it - spec.levels.begin()));
                break;
            }
        }
        return lo[p] <= hi[p];
    }
};

} // namespace expr_detail

/// Deterministic stratified rejection sampler: cycles over the satisfiable
/// disjuncts, drawing uniformly inside the refined per-parameter ranges and
/// rejecting draws that break a negated term. Throws when acceptance falls
/// below one in 10^5.
inline std::vector<Chromosome> sample_expression(const UnsafeExpression& expr, std::size_t n,
                                                 const SpacePtr& space, Rng& rng) {
    const std::size_t n_disjuncts = std::max<std::size_t>(1, expr.disjuncts.size());
    std::vector<expr_detail::Intervals> boxes;
    std::vector<bool> feasible(n_disjuncts, true);
    for (std::size_t d = 0; d < n_disjuncts; ++d) {
        expr_detail::Intervals iv(*space);
        for (const auto& a : expr.box) feasible[d] = feasible[d] && iv.apply(a, *space);
        if (d < expr.disjuncts.size())
            for (const auto& term : expr.disjuncts[d])
                if (!term.negated)
                    for (const auto& a : term.atoms) feasible[d] = feasible[d] && iv.apply(a, *space);
        boxes.push_back(std::move(iv));
    }

    auto satisfies_disjunct = [&](const Chromosome& c, std::size_t d) {
        for (const auto& a : expr.box)
            if (!eval_atom(a, c)) return false;
        if (d >= expr.disjuncts.size()) return true;
        for (const auto& term : expr.disjuncts[d])
            if (!term.holds(c)) return false;
        return true;
    };

    std::vector<Chromosome> out;
    std::size_t attempts = 0, accepted = 0;
    const std::size_t attempt_limit = std::max<std::size_t>(200000, n * 100000);
    std::size_t d = 0;
    std::size_t consecutive_skips = 0;
    while (out.size() < n) {
        if (!feasible[d]) {
            d = (d + 1) % n_disjuncts;
            if (++consecutive_skips > n_disjuncts)
                throw unsatisfiable_expression_error("no satisfiable disjunct");
            continue;
        }
        consecutive_skips = 0;
        const auto& iv = boxes[d];
        Chromosome c;
        c.space = space;
        c.values.reserve(space->size());
        for (std::size_t p = 0; p < space->size(); ++p) {
            const auto& spec = space->spec(p);
            if (spec.kind == ParamKind::Categorical) {
                if (iv.forced_level[p] >= 0) {
                    c.values.push_back(static_cast<double>(iv.forced_level[p]));
                } else {
                    std::vector<std::size_t> allowed;
                    for (std::size_t l = 0; l < spec.level_count(); ++l)
                        if (!iv.banned_levels[p].count(l)) allowed.push_back(l);
                    if (allowed.empty()) {
                        c.values.push_back(0.0); // will be rejected
                    } else {
                        c.values.push_back(
                            static_cast<double>(allowed[uniform_index(rng, allowed.size())]));
                    }
                }
            } else {
                c.values.push_back(uniform_real(rng, iv.lo[p], iv.hi[p]));
            }
        }
        ++attempts;
        if (satisfies_disjunct(c, d)) {
            ++accepted;
            out.push_back(std::move(c));
            d = (d + 1) % n_disjuncts;
        } else if (attempts > 1000 && accepted * 100000 < attempts) {
            throw unsatisfiable_expression_error(
                "expression acceptance rate below 1e-5 after " + std::to_string(attempts) +
                " attempts (" + std::to_string(accepted) + " accepted)");
        } else if (attempts >= attempt_limit && accepted == 0) {
            throw unsatisfiable_expression_error("expression produced no samples in " +
                                                 std::to_string(attempts) + " attempts");
        }
    }
    return out;
}

} // namespace simex
