#pragma once

// Pseudo-Boolean formulas: integer-coefficient linear constraints and reified
// linear constraints over named 0/1 variables.

#include <algorithm>
#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/geometry.hpp"
#include "porogen/grid.hpp"

namespace porogen {

using Var = std::int32_t;

struct Lit {
    Var var = 0;
    bool negated = false;

    Lit operator~() const { return {var, !negated}; }
    friend auto operator<=>(const Lit&, const Lit&) = default;
};

inline Lit pos(Var v) { return {v, false}; }
inline Lit neg(Var v) { return {v, true}; }

struct Term {
    std::int64_t coef = 0;
    Lit lit;
};

enum class Relation { ge, le, eq };

inline const char* to_string(Relation r) {
    return r == Relation::ge ? ">=" : r == Relation::le ? "<=" : "=";
}

struct PbConstraint {
    std::vector<Term> terms;
    Relation rel = Relation::ge;
    std::int64_t bound = 0;
};

/// indicator <-> (sum of terms >= bound)
struct ReifiedConstraint {
    Lit indicator;
    std::vector<Term> terms;
    std::int64_t bound = 0;
};

using Assignment = std::vector<std::uint8_t>;  // indexed by Var, values 0/1

inline int value(const Assignment& a, Lit l) {
    const int v = a.at(static_cast<std::size_t>(l.var));
    return l.negated ? 1 - v : v;
}

inline std::int64_t evaluate(const std::vector<Term>& terms, const Assignment& a) {
    std::int64_t s = 0;
    for (const auto& t : terms) s += t.coef * value(a, t.lit);
    return s;
}

inline bool satisfied(const PbConstraint& c, const Assignment& a) {
    const auto s = evaluate(c.terms, a);
    switch (c.rel) {
    case Relation::ge: return s >= c.bound;
    case Relation::le: return s <= c.bound;
    case Relation::eq: return s == c.bound;
    }
    return false;
}

inline bool satisfied(const ReifiedConstraint& rc, const Assignment& a) {
    return (evaluate(rc.terms, a) >= rc.bound) == (value(a, rc.indicator) == 1);
}

/// Merges repeated variables (x and ~x included) and drops zero coefficients.
/// Returns the constant c with sum(original) == sum(merged) + c.
inline std::int64_t canonicalize(std::vector<Term>& terms) {
    struct Acc {
        std::int64_t on_pos = 0, on_neg = 0;
        bool seen_pos = false, seen_neg = false;
    };
    std::map<Var, Acc> by_var;
    for (const auto& t : terms) {
        auto& a = by_var[t.lit.var];
        if (t.lit.negated) {
            a.on_neg += t.coef;
            a.seen_neg = true;
        } else {
            a.on_pos += t.coef;
            a.seen_pos = true;
        }
    }
    std::int64_t constant = 0;
    std::vector<Term> out;
    out.reserve(by_var.size());
    for (const auto& [v, a] : by_var) {
        if (!a.seen_pos) {
            if (a.on_neg != 0) out.push_back({a.on_neg, neg(v)});
            continue;
        }
        // P x + N (1 - x) = N + (P - N) x
        constant += a.on_neg;
        if (a.on_pos - a.on_neg != 0) out.push_back({a.on_pos - a.on_neg, pos(v)});
    }
    terms = std::move(out);
    return constant;
}

inline PbConstraint make_constraint(std::vector<Term> terms, Relation rel, std::int64_t bound) {
    const auto k = canonicalize(terms);
    return {std::move(terms), rel, bound - k};
}

/// The two plain constraints equivalent to a reified one, using the tight
/// activity bounds L = min S and U = max S of S = sum of terms:
///   S + (k - L) * ~r >= k        (r = 1 forces S >= k)
///   S - (U - k + 1) * r <= k - 1 (r = 0 forces S <= k - 1)
inline std::array<PbConstraint, 2> linearize_reified(const ReifiedConstraint& rc) {
    std::int64_t lo = 0, hi = 0;
    for (const auto& t : rc.terms) (t.coef < 0 ? lo : hi) += t.coef;
    const std::int64_t k = rc.bound;
    PbConstraint a{rc.terms, Relation::ge, k};
    if (k - lo != 0) a.terms.push_back({k - lo, ~rc.indicator});
    PbConstraint b{rc.terms, Relation::le, k - 1};
    if (hi - k + 1 != 0) b.terms.push_back({-(hi - k + 1), rc.indicator});
    return {std::move(a), std::move(b)};
}

/// Structural metadata recorded by the encoder.
struct FormulaMeta {
    int t = 0;
    int w = 0;
    int slack = 1;
    std::vector<Cell> seeds;
    Cell void_seed{1, 1};
    std::string dag_mode = "manhattan";
    std::int64_t lo = 0, hi = 0;
    bool all_sides_boundary = true;
    Var cell_base = 0;    // c[i,j,r] = cell_base + ((i-1) t + (j-1)) (w+1) + (r-1)
    Var pixel_base = 0;   // I[i,j]   = pixel_base + (i-1) t + (j-1)
    std::vector<Var> layer_base;  // x[l,n] = layer_base[l-1] + (n-1)
    std::vector<int> layer_width;
    bool has_cells = false;
    bool has_pixels = false;
};

class PbFormula {
public:
    Var add_var(const std::string& name) {
        auto [it, fresh] = index_.try_emplace(name, static_cast<Var>(names_.size()));
        require(fresh, "PbFormula: duplicate variable name '" + name + "'");
        names_.push_back(name);
        return it->second;
    }

    std::optional<Var> find(const std::string& name) const {
        auto it = index_.find(name);
        if (it == index_.end()) return std::nullopt;
        return it->second;
    }

    Var var(const std::string& name) const {
        auto v = find(name);
        require(v.has_value(), "PbFormula: unknown variable '" + name + "'");
        return *v;
    }

    const std::string& name(Var v) const { return names_.at(static_cast<std::size_t>(v)); }
    std::size_t num_vars() const { return names_.size(); }

    void add(PbConstraint c) {
        c.bound -= canonicalize(c.terms);
        check_terms(c.terms);
        constraints_.push_back(std::move(c));
    }
    void add(std::vector<Term> terms, Relation rel, std::int64_t bound) {
        add(PbConstraint{std::move(terms), rel, bound});
    }
    /// Disjunction of literals.
    void add_clause(const std::vector<Lit>& lits) {
        std::vector<Term> terms;
        for (Lit l : lits) terms.push_back({1, l});
        add(std::move(terms), Relation::ge, 1);
    }
    void add_unit(Lit l) { add_clause({l}); }

    void add_reified(ReifiedConstraint rc) {
        const auto k = canonicalize(rc.terms);
        rc.bound -= k;
        check_terms(rc.terms);
        check_var(rc.indicator.var);
        reified_.push_back(std::move(rc));
    }

    const std::vector<PbConstraint>& constraints() const { return constraints_; }
    const std::vector<ReifiedConstraint>& reified() const { return reified_; }

    /// Linear expression (plus constant) that evaluates to the surrogate output d.
    std::vector<Term> output_terms;
    std::int64_t output_constant = 0;
    FormulaMeta meta;

    std::int64_t output_value(const Assignment& a) const { return evaluate(output_terms, a) + output_constant; }

    /// Copy with every reified constraint replaced by its two linear halves.
    PbFormula linearized() const {
        PbFormula f = *this;
        f.reified_.clear();
        for (const auto& rc : reified_)
            for (auto& c : linearize_reified(rc)) f.constraints_.push_back(std::move(c));
        return f;
    }

    bool is_linear() const { return reified_.empty(); }

    /// Index of the first violated constraint (plain constraints first, then
    /// reified ones offset by constraints().size()), or nullopt.
    std::optional<std::size_t> first_violation(const Assignment& a) const {
        if (a.size() != names_.size()) return std::size_t{0};
        for (std::size_t k = 0; k < constraints_.size(); ++k)
            if (!satisfied(constraints_[k], a)) return k;
        for (std::size_t k = 0; k < reified_.size(); ++k)
            if (!satisfied(reified_[k], a)) return constraints_.size() + k;
        return std::nullopt;
    }

    bool check(const Assignment& a) const { return !first_violation(a).has_value(); }

private:
    void check_var(Var v) const {
        require(v >= 0 && static_cast<std::size_t>(v) < names_.size(),
                "PbFormula: constraint references undeclared variable " + std::to_string(v));
    }
    void check_terms(const std::vector<Term>& terms) const {
        for (const auto& t : terms) {
            check_var(t.lit.var);
            require(t.coef != 0, "PbFormula: zero coefficient");
        }
    }

    std::vector<std::string> names_;
    std::unordered_map<std::string, Var> index_;
    std::vector<PbConstraint> constraints_;
    std::vector<ReifiedConstraint> reified_;
};

} // namespace porogen
