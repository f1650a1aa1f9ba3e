#pragma once

// Helpers shared by the unit suites and the acceptance runner.

#include <cstdlib>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "porogen/bnn.hpp"
#include "porogen/cnf.hpp"
#include "porogen/grid.hpp"
#include "porogen/pb.hpp"
#include "porogen/rng.hpp"

namespace porogen::testing {

inline Image from_rows(const std::vector<std::string>& rows) {
    const int t = static_cast<int>(rows.size());
    Image img(t);
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) img.set({i, j}, rows[i - 1][j - 1] == '#' ? 1 : 0);
    return img;
}

inline Image noise_image(int t, double p, Rng& rng) {
    Image img(t);
    std::bernoulli_distribution bit(p);
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) img.set({i, j}, bit(rng) ? 1 : 0);
    return img;
}

inline Image image_from_bits(int t, std::uint64_t bits) {
    Image img(t);
    for (std::size_t k = 0; k < img.size(); ++k) img.set(cell_at(k, t), (bits >> k) & 1u);
    return img;
}

/// Random deployment-form network. Thresholds are drawn around the middle of
/// the reachable pre-activation range so activations actually vary; a few
/// neurons are negative-polarity or constant.
inline IntBnnModel random_int_model(int t, const std::vector<int>& widths, Rng& rng, std::int64_t bias = 0) {
    IntBnnModel m;
    m.t = t;
    int in = t * t;
    std::uniform_int_distribution<int> coin(0, 1), kind(0, 9);
    for (int w : widths) {
        IntBlock b;
        b.n_in = in;
        std::uniform_int_distribution<int> thr(-in / 2 - 1, in / 2 + 1);
        for (int o = 0; o < w; ++o) {
            IntNeuron n;
            n.row.resize(in);
            for (auto& a : n.row) a = coin(rng) ? 1 : -1;
            const int k = kind(rng);
            if (k == 0) {
                n.polarity = Polarity::constant;
                n.constant_value = coin(rng) ? 1 : -1;
            } else {
                n.polarity = k < 3 ? Polarity::negative : Polarity::positive;
                n.threshold = thr(rng);
            }
            b.neurons.push_back(std::move(n));
        }
        m.blocks.push_back(std::move(b));
        in = w;
    }
    m.out_weights.resize(in);
    for (auto& w : m.out_weights) w = coin(rng) ? 1 : -1;
    m.out_bias = bias;
    return m;
}

/// Literal value under a 0/1 assignment built in test code.
inline bool lit_true(const std::vector<std::uint8_t>& a, Lit l) { return (a.at(l.var) != 0) != l.negated; }

/// Plain DPLL over a DIMACS clause list, kept deliberately simple so it can
/// serve as an oracle for the CDCL solver and the PB translation.
class Dpll {
public:
    Dpll(int num_vars, const std::vector<std::vector<int>>& clauses) : n_(num_vars), clauses_(clauses) {}

    bool solve(const std::vector<int>& assumptions = {}) {
        std::vector<std::int8_t> val(std::size_t(n_) + 1, 0);
        for (int l : assumptions) {
            const std::int8_t want = l > 0 ? 1 : -1;
            auto& v = val[std::size_t(std::abs(l))];
            if (v == -want) return false;
            v = want;
        }
        return search(val);
    }

private:
    // 1 satisfied, 0 open, -1 falsified; unit set to the single open literal.
    int status(const std::vector<int>& c, const std::vector<std::int8_t>& val, int& unit) const {
        int open = 0;
        for (int l : c) {
            const int v = val[std::size_t(std::abs(l))] * (l > 0 ? 1 : -1);
            if (v > 0) return 1;
            if (v == 0) ++open, unit = l;
        }
        return open == 0 ? -1 : (open == 1 ? 2 : 0);
    }

    bool search(std::vector<std::int8_t> val) {
        for (bool changed = true; changed;) {
            changed = false;
            for (const auto& c : clauses_) {
                int unit = 0;
                const int s = status(c, val, unit);
                if (s == -1) return false;
                if (s == 2) {
                    val[std::size_t(std::abs(unit))] = unit > 0 ? 1 : -1;
                    changed = true;
                }
            }
        }
        for (const auto& c : clauses_) {
            int unit = 0;
            if (status(c, val, unit) != 0) continue;
            for (int l : c)
                if (val[std::size_t(std::abs(l))] == 0) {
                    auto left = val;
                    left[std::size_t(std::abs(l))] = l > 0 ? 1 : -1;
                    if (search(left)) return true;
                    val[std::size_t(std::abs(l))] = l > 0 ? -1 : 1;
                    return search(val);
                }
        }
        return true;  // every clause satisfied
    }

    int n_;
    const std::vector<std::vector<int>>& clauses_;
};

/// Exhaustive agreement between a PB formula over n <= 12 variables and its
/// CNF translation: for every assignment of the PB variables, the CNF
/// restricted to it is satisfiable exactly when the formula holds.
inline bool cnf_agrees(const PbFormula& f, const CnfOptions& opt = {}, std::string* why = nullptr) {
    const Cnf cnf = pb_to_cnf(f, opt);
    Dpll oracle(cnf.num_vars, cnf.clauses);
    const std::size_t n = f.num_vars();
    Assignment a(n);
    std::vector<int> assume(n);
    for (std::uint64_t bits = 0; bits < (std::uint64_t(1) << n); ++bits) {
        for (std::size_t v = 0; v < n; ++v) {
            a[v] = (bits >> v) & 1u;
            assume[v] = a[v] ? int(v) + 1 : -(int(v) + 1);
        }
        const bool want = f.check(a), got = oracle.solve(assume);
        if (want != got) {
            if (why) *why = "assignment " + std::to_string(bits) + ": pb " + std::to_string(want) + " cnf " +
                            std::to_string(got);
            return false;
        }
    }
    return true;
}

/// Random constraint over variables 0..n-1 with the requested coefficient
/// flavour: 0 uniform, 1 one odd coefficient, 2 arbitrary, 3 with repeats.
inline PbConstraint random_pb_constraint(int n, int flavour, Rng& rng) {
    std::uniform_int_distribution<int> coin(0, 1), rel(0, 2), small(1, 4), big(-9, 9), var(0, n - 1);
    PbConstraint c;
    const int a = small(rng) * (coin(rng) ? 1 : -1);
    const int odd = std::uniform_int_distribution<int>(0, n - 1)(rng);
    std::int64_t lo = 0, hi = 0;
    for (int k = 0; k < n; ++k) {
        std::int64_t coef = flavour == 0 ? a : flavour == 1 ? (k == odd ? big(rng) : a) : big(rng);
        if (coef == 0) coef = 1;
        const Var v = flavour == 3 ? var(rng) : k;
        c.terms.push_back({coef, coin(rng) ? pos(v) : neg(v)});
        (coef < 0 ? lo : hi) += coef;
    }
    c.rel = rel(rng) == 0 ? Relation::ge : (rel(rng) == 0 ? Relation::eq : Relation::le);
    c.bound = std::uniform_int_distribution<std::int64_t>(lo - 1, hi + 1)(rng);
    return c;
}

// ------------------------------------------------------------ OPB oracle parser

struct ParsedOpb {
    long declared_vars = -1, declared_constraints = -1;
    // Each constraint as (sorted var->coef map over positive literals, rel, bound).
    std::vector<std::tuple<std::map<int, long long>, std::string, long long>> constraints;
};

/// Minimal OPB reader written independently of the exporter.
inline ParsedOpb parse_opb(const std::string& text) {
    ParsedOpb out;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '*') {
            auto v = line.find("#variable=");
            auto c = line.find("#constraint=");
            if (v != std::string::npos) out.declared_vars = std::stol(line.substr(v + 10));
            if (c != std::string::npos) out.declared_constraints = std::stol(line.substr(c + 12));
            continue;
        }
        std::istringstream ls(line);
        std::map<int, long long> terms;
        long long constant = 0;
        std::string tok, rel;
        long long bound = 0;
        while (ls >> tok) {
            if (tok == ">=" || tok == "<=" || tok == "=") {
                rel = tok;
                ls >> bound >> tok;
                if (tok != ";") throw std::runtime_error("missing ';' in: " + line);
                break;
            }
            const long long coef = std::stoll(tok);
            std::string lit;
            ls >> lit;
            const bool negated = lit[0] == '~';
            const int v = std::stoi(lit.substr(negated ? 2 : 1));
            if (negated) constant += coef, terms[v] -= coef;
            else terms[v] += coef;
        }
        if (rel.empty()) throw std::runtime_error("no relation in: " + line);
        for (auto it = terms.begin(); it != terms.end();) it = it->second == 0 ? terms.erase(it) : std::next(it);
        out.constraints.emplace_back(std::move(terms), rel, bound - constant);
    }
    return out;
}

/// The same normal form computed straight from a formula constraint.
inline std::tuple<std::map<int, long long>, std::string, long long> opb_normal_form(const PbConstraint& c) {
    std::map<int, long long> terms;
    long long bound = c.bound;
    for (const auto& t : c.terms) {
        if (t.lit.negated) bound -= t.coef, terms[t.lit.var + 1] -= t.coef;
        else terms[t.lit.var + 1] += t.coef;
    }
    for (auto it = terms.begin(); it != terms.end();) it = it->second == 0 ? terms.erase(it) : std::next(it);
    return {terms, to_string(c.rel), bound};
}

} // namespace porogen::testing
