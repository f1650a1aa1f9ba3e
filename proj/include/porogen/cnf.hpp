#pragma once

// Pseudo-Boolean to CNF translation.
//
// Every constraint is normalized to sum a_i l_i >= k with a_i > 0, saturated
// and divided by the coefficient gcd, then translated by shape:
//   all a_i == k                     plain clause
//   all a_i equal                    sequential counter (at-most on negations)
//   equal a_i plus one odd literal   shared bidirectional totalizer
//   anything else                    generalized totalizer
// The third shape is what a linearized reified constraint looks like: both
// halves count the same literal set (the second over its negation), so one
// totalizer per neuron serves both.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/pb.hpp"

namespace porogen {

/// Clause set over DIMACS literals. PB variable v is DIMACS variable v + 1;
/// auxiliary variables follow.
struct Cnf {
    int num_vars = 0;
    int pb_vars = 0;
    std::vector<std::vector<int>> clauses;

    int new_var() { return ++num_vars; }
    void add(std::vector<int> c) { clauses.push_back(std::move(c)); }
    std::size_t num_aux() const { return std::size_t(num_vars - pb_vars); }
};

inline int dimacs(Lit l) { return l.negated ? -(l.var + 1) : l.var + 1; }

struct CnfOptions {
    bool share_counters = true;
    // Largest total coefficient mass accepted in one constraint.
    std::int64_t max_coef_sum = std::int64_t(1) << 40;
};

struct CnfStats {
    std::size_t clauses = 0, units = 0, sequential = 0, shared = 0, totalizers = 0, generalized = 0, trivial = 0;
};

namespace detail {

struct NormTerm {
    std::int64_t coef;
    int lit;  // DIMACS
};

struct NormConstraint {
    std::vector<NormTerm> terms;  // coef > 0, distinct vars
    std::int64_t k = 0;
    bool infeasible = false;
};

inline std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
    return a >= 0 ? (a + b - 1) / b : -((-a) / b);
}

/// sum(terms) >= k, terms over distinct variables.
inline NormConstraint normalize_ge(const std::vector<Term>& terms, std::int64_t k, std::int64_t max_sum) {
    NormConstraint n;
    std::int64_t mass = 0;
    for (const auto& t : terms) {
        const std::int64_t a = t.coef < 0 ? -t.coef : t.coef;
        if (a > max_sum || mass > max_sum - a)
            fail(ErrorKind::invalid_input, "pb_to_cnf: coefficient overflow (total exceeds " +
                                               std::to_string(max_sum) + ")");
        mass += a;
        if (t.coef > 0) {
            n.terms.push_back({t.coef, dimacs(t.lit)});
        } else if (t.coef < 0) {
            // c l = c - c ~l
            n.terms.push_back({-t.coef, -dimacs(t.lit)});
            k -= t.coef;
        }
    }
    if (k <= 0) {
        n.terms.clear();
        n.k = 0;
        return n;
    }
    if (mass < k) {
        n.infeasible = true;
        return n;
    }
    std::int64_t g = 0;
    for (auto& t : n.terms) {
        t.coef = std::min(t.coef, k);
        g = std::gcd(g, t.coef);
    }
    for (auto& t : n.terms) t.coef /= g;
    n.k = ceil_div(k, g);
    return n;
}

} // namespace detail

class CnfBuilder {
public:
    explicit CnfBuilder(int pb_vars, CnfOptions opt = {}) : opt_(opt) {
        cnf_.num_vars = cnf_.pb_vars = pb_vars;
    }

    /// Translates the constraints in two passes so that shared counters are
    /// built once with the largest threshold any user needs.
    void add_all(const std::vector<PbConstraint>& cs) {
        std::vector<detail::NormConstraint> norm;
        for (const auto& c : cs) split(c, norm);
        for (const auto& n : norm) plan(n);
        for (const auto& n : norm) emit(n);
    }

    void add(const PbConstraint& c) { add_all({c}); }

    Cnf& cnf() { return cnf_; }
    const CnfStats& stats() const { return stats_; }

private:
    struct Shape {
        enum Kind { trivial, infeasible, clause, cardinality, indicator, general } kind = general;
        std::int64_t a = 0;  // uniform coefficient
        std::size_t odd = 0; // index of the odd literal (indicator)
    };

    struct Counter {
        int cap = 0;
        std::vector<int> out;  // out[j-1] <-> count >= j, j <= cap
    };

    void split(const PbConstraint& c, std::vector<detail::NormConstraint>& out) const {
        std::vector<Term> terms = c.terms;
        const std::int64_t shift = canonicalize(terms);
        const std::int64_t bound = c.bound - shift;
        if (c.rel != Relation::le) out.push_back(detail::normalize_ge(terms, bound, opt_.max_coef_sum));
        if (c.rel != Relation::ge) {
            for (auto& t : terms) t.coef = -t.coef;
            out.push_back(detail::normalize_ge(terms, -bound, opt_.max_coef_sum));
        }
    }

    static Shape classify(const detail::NormConstraint& n) {
        Shape s;
        if (n.infeasible) return s.kind = Shape::infeasible, s;
        if (n.terms.empty() || n.k <= 0) return s.kind = Shape::trivial, s;
        const auto& ts = n.terms;
        if (std::all_of(ts.begin(), ts.end(), [&](auto& t) { return t.coef >= n.k; }))
            return s.kind = Shape::clause, s;
        if (std::all_of(ts.begin(), ts.end(), [&](auto& t) { return t.coef == ts[0].coef; })) {
            s.kind = Shape::cardinality;
            s.a = ts[0].coef;
            return s;
        }
        if (ts.size() >= 3) {
            // Majority coefficient with exactly one exception.
            const std::int64_t a = ts[0].coef == ts[1].coef ? ts[0].coef : ts[2].coef;
            std::size_t odd = ts.size(), misses = 0;
            for (std::size_t i = 0; i < ts.size(); ++i)
                if (ts[i].coef != a) odd = i, ++misses;
            if (misses == 1) {
                s.kind = Shape::indicator;
                s.a = a;
                s.odd = odd;
                return s;
            }
        }
        return s.kind = Shape::general, s;
    }

    // Canonical literal set (sorted by variable, first literal positive) and
    // whether the given set is its negation.
    static std::pair<std::vector<int>, bool> canonical_set(const detail::NormConstraint& n, std::size_t skip) {
        std::vector<int> lits;
        for (std::size_t i = 0; i < n.terms.size(); ++i)
            if (i != skip) lits.push_back(n.terms[i].lit);
        std::sort(lits.begin(), lits.end(), [](int x, int y) { return std::abs(x) < std::abs(y); });
        const bool flipped = lits.front() < 0;
        if (flipped)
            for (auto& l : lits) l = -l;
        return {std::move(lits), flipped};
    }

    // Thresholds (in canonical orientation) that an indicator constraint needs:
    // with z true, count >= m1; with z false, count >= m0.
    struct IndicatorNeed {
        std::int64_t m_true, m_false;
    };
    static IndicatorNeed indicator_need(const detail::NormConstraint& n, const Shape& s) {
        const std::int64_t b = n.terms[s.odd].coef;
        return {detail::ceil_div(n.k - b, s.a), detail::ceil_div(n.k, s.a)};
    }

    // Index into the canonical counter that answers "count(set) >= m".
    static std::int64_t oriented_index(std::int64_t m, bool flipped, std::int64_t n) {
        return flipped ? n - m + 1 : m;  // count(~L) >= m  <=>  not count(L) >= n - m + 1
    }

    void plan(const detail::NormConstraint& n) {
        const Shape s = classify(n);
        if (s.kind != Shape::indicator || !opt_.share_counters) return;
        auto [key, flipped] = canonical_set(n, s.odd);
        const std::int64_t size = static_cast<std::int64_t>(key.size());
        const auto need = indicator_need(n, s);
        int& cap = caps_[key];
        for (std::int64_t m : {need.m_true, need.m_false}) {
            if (m <= 0 || m > size) continue;
            cap = static_cast<int>(std::max<std::int64_t>(cap, oriented_index(m, flipped, size)));
        }
    }

    void clause(std::vector<int> c) {
        if (c.size() == 1) ++stats_.units;
        ++stats_.clauses;
        cnf_.add(std::move(c));
    }

    void emit(const detail::NormConstraint& n) {
        const Shape s = classify(n);
        switch (s.kind) {
        case Shape::trivial: ++stats_.trivial; return;
        case Shape::infeasible: clause({}); return;
        case Shape::clause: {
            std::vector<int> c;
            for (const auto& t : n.terms) c.push_back(t.lit);
            clause(std::move(c));
            return;
        }
        case Shape::cardinality: {
            std::vector<int> neg;
            for (const auto& t : n.terms) neg.push_back(-t.lit);
            const std::int64_t r = detail::ceil_div(n.k, s.a);
            at_most(neg, static_cast<std::int64_t>(neg.size()) - r);
            return;
        }
        case Shape::indicator:
            if (opt_.share_counters) {
                emit_indicator(n, s);
                return;
            }
            [[fallthrough]];
        case Shape::general: generalized(n); return;
        }
    }

    /// Sinz sequential counter for sum(lits) <= K.
    void at_most(const std::vector<int>& y, std::int64_t K) {
        const std::int64_t n = static_cast<std::int64_t>(y.size());
        if (K >= n) return;
        if (K < 0) return clause({});
        if (K == 0) {
            for (int l : y) clause({-l});
            return;
        }
        if (K == 1 && n <= 5) {
            for (std::size_t i = 0; i < y.size(); ++i)
                for (std::size_t j = i + 1; j < y.size(); ++j) clause({-y[i], -y[j]});
            return;
        }
        ++stats_.sequential;
        const int k = static_cast<int>(K);
        // s[i][j]: among y_1..y_{i+1}, at least j+1 are true (one direction).
        std::vector<std::vector<int>> s(y.size() - 1, std::vector<int>(k));
        for (auto& row : s)
            for (auto& v : row) v = cnf_.new_var();
        clause({-y[0], s[0][0]});
        for (int j = 1; j < k; ++j) clause({-s[0][j]});
        for (std::size_t i = 1; i + 1 < y.size(); ++i) {
            clause({-y[i], s[i][0]});
            clause({-s[i - 1][0], s[i][0]});
            for (int j = 1; j < k; ++j) {
                clause({-y[i], -s[i - 1][j - 1], s[i][j]});
                clause({-s[i - 1][j], s[i][j]});
            }
            clause({-y[i], -s[i - 1][k - 1]});
        }
        clause({-y.back(), -s[y.size() - 2][k - 1]});
    }

    /// Totalizer with both directions: out[j-1] <-> (count >= j) for j <= cap.
    std::vector<int> totalizer(const std::vector<int>& lits, std::size_t lo, std::size_t hi, int cap) {
        if (hi - lo == 1) return {lits[lo]};
        const std::size_t mid = lo + (hi - lo) / 2;
        const auto a = totalizer(lits, lo, mid, cap);
        const auto b = totalizer(lits, mid, hi, cap);
        const int size_a = static_cast<int>(mid - lo), size_b = static_cast<int>(hi - mid);
        const int p = static_cast<int>(a.size()), q = static_cast<int>(b.size());
        const int m = std::min(size_a + size_b, cap);
        std::vector<int> o(m);
        for (auto& v : o) v = cnf_.new_var();
        // Upward: a >= i and b >= j imply total >= i + j.
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j <= q; ++j) {
                if (i + j == 0) continue;
                std::vector<int> c;
                if (i > 0) c.push_back(-a[i - 1]);
                if (j > 0) c.push_back(-b[j - 1]);
                c.push_back(o[std::min(i + j, m) - 1]);
                clause(std::move(c));
            }
        // Downward: a < i + 1 and b < j + 1 imply total < i + j + 1.
        for (int i = 0; i <= p; ++i)
            for (int j = 0; j <= q; ++j) {
                if (i + j + 1 > m) continue;
                std::vector<int> c;
                if (i + 1 <= size_a) {
                    if (i + 1 > p) continue;
                    c.push_back(a[i]);
                }
                if (j + 1 <= size_b) {
                    if (j + 1 > q) continue;
                    c.push_back(b[j]);
                }
                c.push_back(-o[i + j]);
                clause(std::move(c));
            }
        return o;
    }

    void emit_indicator(const detail::NormConstraint& n, const Shape& s) {
        auto [key, flipped] = canonical_set(n, s.odd);
        const std::int64_t size = static_cast<std::int64_t>(key.size());
        auto it = counters_.find(key);
        if (it == counters_.end()) {
            const int cap = caps_.at(key);
            Counter c{cap, {}};
            if (cap > 0) {
                c.out = totalizer(key, 0, key.size(), cap);
                ++stats_.totalizers;
            }
            it = counters_.emplace(key, std::move(c)).first;
        } else {
            ++stats_.shared;
        }
        const Counter& ctr = it->second;
        // Literal equivalent to count(this set) >= m; 0 means constant true, nullopt constant false.
        auto count_at_least = [&](std::int64_t m) -> std::optional<int> {
            if (m <= 0) return 0;
            if (m > size) return std::nullopt;
            const std::int64_t idx = oriented_index(m, flipped, size);
            if (!flipped) return ctr.out.at(std::size_t(idx - 1));
            if (idx > size) return 0;  // not (count(L) >= size + 1) is true
            return -ctr.out.at(std::size_t(idx - 1));
        };
        const int z = n.terms[s.odd].lit;
        const auto need = indicator_need(n, s);
        auto imply = [&](int cond, std::int64_t m) {
            const auto o = count_at_least(m);
            if (!o) return clause({-cond});
            if (*o == 0) return;
            clause({-cond, *o});
        };
        imply(z, need.m_true);
        imply(-z, need.m_false);
    }

    /// Generalized totalizer for sum(a_i l_i) >= k, posed as sum(a_i ~l_i) <= A - k.
    void generalized(const detail::NormConstraint& n) {
        ++stats_.generalized;
        std::int64_t A = 0;
        for (const auto& t : n.terms) A += t.coef;
        const std::int64_t K = A - n.k;
        using Node = std::map<std::int64_t, int>;  // achievable sum -> output var
        std::vector<Node> level;
        for (const auto& t : n.terms) level.push_back(Node{{std::min(t.coef, K + 1), -t.lit}});
        auto merge = [&](const Node& a, const Node& b) {
            Node o;
            auto out = [&](std::int64_t v) {
                v = std::min(v, K + 1);
                auto [it, fresh] = o.try_emplace(v, 0);
                if (fresh) it->second = cnf_.new_var();
                return it->second;
            };
            for (const auto& [va, la] : a) clause({-la, out(va)});
            for (const auto& [vb, lb] : b) clause({-lb, out(vb)});
            for (const auto& [va, la] : a)
                for (const auto& [vb, lb] : b) clause({-la, -lb, out(va + vb)});
            return o;
        };
        while (level.size() > 1) {
            std::vector<Node> next;
            for (std::size_t i = 0; i + 1 < level.size(); i += 2) next.push_back(merge(level[i], level[i + 1]));
            if (level.size() % 2) next.push_back(std::move(level.back()));
            level = std::move(next);
        }
        for (const auto& [v, l] : level.front())
            if (v > K) clause({-l});
    }

    Cnf cnf_;
    CnfOptions opt_;
    CnfStats stats_;
    std::map<std::vector<int>, int> caps_;
    std::map<std::vector<int>, Counter> counters_;
};

/// Translates a formula without reified constraints (see PbFormula::linearized).
inline Cnf pb_to_cnf(const PbFormula& f, const CnfOptions& opt = {}, CnfStats* stats = nullptr) {
    require(f.is_linear(), "pb_to_cnf: formula has reified constraints; linearize first");
    CnfBuilder b(static_cast<int>(f.num_vars()), opt);
    b.add_all(f.constraints());
    if (stats) *stats = b.stats();
    return std::move(b.cnf());
}

inline void write_dimacs(std::ostream& os, const Cnf& cnf) {
    os << "p cnf " << cnf.num_vars << ' ' << cnf.clauses.size() << '\n';
    for (const auto& c : cnf.clauses) {
        for (int l : c) os << l << ' ';
        os << "0\n";
    }
}

/// Whether a full assignment (PB and auxiliary variables) satisfies the clauses.
inline bool cnf_satisfied(const Cnf& cnf, const std::vector<std::uint8_t>& full) {
    for (const auto& c : cnf.clauses) {
        bool ok = false;
        for (int l : c) {
            const auto v = full.at(std::size_t(std::abs(l) - 1));
            if ((l > 0) == (v != 0)) {
                ok = true;
                break;
            }
        }
        if (!ok) return false;
    }
    return true;
}

} // namespace porogen
