#include <gtest/gtest.h>

#include <sstream>

#include "porogen/cnf.hpp"
#include "support.hpp"

using namespace porogen;
using porogen::testing::cnf_agrees;
using porogen::testing::Dpll;
using porogen::testing::random_pb_constraint;

namespace {

PbFormula formula_with(int n, const std::vector<PbConstraint>& cs) {
    PbFormula f;
    for (int v = 0; v < n; ++v) f.add_var("x" + std::to_string(v + 1));
    for (const auto& c : cs) f.add(c);
    return f;
}

// Raw constraint semantics, before any canonicalization.
bool agrees_raw(int n, const PbConstraint& c, const CnfOptions& opt) {
    CnfBuilder b(n, opt);
    b.add(c);
    const Cnf& cnf = b.cnf();
    Dpll oracle(cnf.num_vars, cnf.clauses);
    for (int bits = 0; bits < (1 << n); ++bits) {
        Assignment a(n);
        std::vector<int> assume;
        for (int v = 0; v < n; ++v) {
            a[v] = (bits >> v) & 1;
            assume.push_back(a[v] ? v + 1 : -(v + 1));
        }
        if (satisfied(c, a) != oracle.solve(assume)) return false;
    }
    return true;
}

} // namespace

TEST(PbToCnf, AtLeastTwoOfThree) {
    auto f = formula_with(3, {{{{1, pos(0)}, {1, pos(1)}, {1, pos(2)}}, Relation::ge, 2}});
    CnfStats st;
    auto cnf = pb_to_cnf(f, {}, &st);
    // At most one of three negations: small enough for pairwise clauses.
    EXPECT_EQ(st.sequential, 0u);
    EXPECT_EQ(cnf.clauses.size(), 3u);
    Dpll oracle(cnf.num_vars, cnf.clauses);
    for (int bits = 0; bits < 8; ++bits) {
        std::vector<int> assume;
        int ones = 0;
        for (int v = 0; v < 3; ++v) {
            const bool on = (bits >> v) & 1;
            ones += on;
            assume.push_back(on ? v + 1 : -(v + 1));
        }
        EXPECT_EQ(oracle.solve(assume), ones >= 2) << bits;
    }
}

TEST(PbToCnf, SingleLiteralIsUnitClause) {
    auto f = formula_with(2, {{{{3, neg(1)}}, Relation::ge, 2}});
    CnfStats st;
    auto cnf = pb_to_cnf(f, {}, &st);
    ASSERT_EQ(cnf.clauses.size(), 1u);
    EXPECT_EQ(cnf.clauses[0], std::vector<int>{-2});
    EXPECT_EQ(st.units, 1u);
    EXPECT_EQ(cnf.num_aux(), 0u);
}

TEST(PbToCnf, EqualityIsBothDirections) {
    PbConstraint eq{{{1, pos(0)}, {1, pos(1)}, {1, pos(2)}}, Relation::eq, 1};
    auto f = formula_with(3, {eq});
    EXPECT_TRUE(cnf_agrees(f));
    PbConstraint ge = eq, le = eq;
    ge.rel = Relation::ge;
    le.rel = Relation::le;
    CnfStats both, a, b;
    pb_to_cnf(f, {}, &both);
    pb_to_cnf(formula_with(3, {ge}), {}, &a);
    pb_to_cnf(formula_with(3, {le}), {}, &b);
    EXPECT_EQ(both.clauses, a.clauses + b.clauses);
}

TEST(PbToCnf, TrivialAndInfeasible) {
    // 2 x1 + x2 >= -1 always holds; x1 + x2 >= 3 never does.
    auto yes = formula_with(2, {{{{2, pos(0)}, {1, pos(1)}}, Relation::ge, -1}});
    EXPECT_TRUE(pb_to_cnf(yes).clauses.empty());
    auto no = formula_with(2, {{{{1, pos(0)}, {1, pos(1)}}, Relation::ge, 3}});
    auto cnf = pb_to_cnf(no);
    Dpll oracle(cnf.num_vars, cnf.clauses);
    EXPECT_FALSE(oracle.solve());
}

TEST(PbToCnf, CoefficientOverflowRejected) {
    CnfOptions opt;
    opt.max_coef_sum = 1000;
    auto f = formula_with(2, {{{{900, pos(0)}, {900, pos(1)}}, Relation::ge, 900}});
    try {
        pb_to_cnf(f, opt);
        FAIL() << "expected overflow";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::invalid_input);
    }
}

TEST(PbToCnf, ReifiedFormulaMustBeLinearized) {
    PbFormula f = formula_with(3, {});
    f.add_reified({pos(2), {{1, pos(0)}, {1, pos(1)}}, 2});
    EXPECT_THROW(pb_to_cnf(f), Error);
    EXPECT_NO_THROW(pb_to_cnf(f.linearized()));
}

TEST(PbToCnf, ThousandRandomConstraintsExhaustive) {
    Rng rng(8);
    std::size_t by_flavour[4] = {};
    for (int trial = 0; trial < 1000; ++trial) {
        const int n = 1 + trial % 6;
        const int flavour = trial % 4;
        const auto c = random_pb_constraint(n, flavour, rng);
        ASSERT_TRUE(agrees_raw(n, c, {})) << "trial " << trial;
        ++by_flavour[flavour];
    }
    for (auto k : by_flavour) EXPECT_EQ(k, 250u);
}

TEST(PbToCnf, SharingDisabledStillSound) {
    Rng rng(9);
    CnfOptions opt;
    opt.share_counters = false;
    for (int trial = 0; trial < 200; ++trial) {
        const int n = 3 + trial % 4;
        ASSERT_TRUE(agrees_raw(n, random_pb_constraint(n, 1, rng), opt)) << trial;
    }
}

TEST(PbToCnf, ReifiedNeuronsShareCounters) {
    // Neuron-shaped reified constraints over the same inputs: both halves of
    // each linearization use one counter.
    Rng rng(10);
    std::uniform_int_distribution<int> coin(0, 1), thr(-3, 7);
    for (int trial = 0; trial < 150; ++trial) {
        const int n = 5;
        PbFormula f = formula_with(n + 2, {});
        for (int r = 0; r < 2; ++r) {
            ReifiedConstraint rc;
            rc.indicator = pos(n + r);
            std::int64_t sum = 0;
            for (int k = 0; k < n; ++k) {
                const int a = coin(rng) ? 1 : -1;
                rc.terms.push_back({2 * a, pos(k)});
                sum += a;
            }
            rc.bound = thr(rng) + sum;
            f.add_reified(rc);
        }
        auto lin = f.linearized();
        std::string why;
        ASSERT_TRUE(cnf_agrees(lin, {}, &why)) << "trial " << trial << ": " << why;
        CnfOptions off;
        off.share_counters = false;
        ASSERT_TRUE(cnf_agrees(lin, off, &why)) << "trial " << trial << ": " << why;
    }
}

TEST(PbToCnf, SharedCountersAreCounted) {
    PbFormula f = formula_with(6, {});
    f.add_reified({pos(4), {{2, pos(0)}, {2, pos(1)}, {-2, pos(2)}, {2, pos(3)}}, 1});
    f.add_reified({pos(5), {{2, pos(0)}, {2, pos(1)}, {-2, pos(2)}, {2, pos(3)}}, 3});
    CnfStats st;
    pb_to_cnf(f.linearized(), {}, &st);
    EXPECT_EQ(st.totalizers, 1u);
    EXPECT_EQ(st.shared, 3u);  // first user builds, three reuse
    EXPECT_TRUE(cnf_agrees(f.linearized()));
}

TEST(PbToCnf, MixedFormulasExhaustive) {
    Rng rng(11);
    for (int trial = 0; trial < 150; ++trial) {
        const int n = 4 + trial % 5;
        std::vector<PbConstraint> cs;
        for (int k = 0; k < 3; ++k) cs.push_back(random_pb_constraint(n, k % 4, rng));
        auto f = formula_with(n, cs);
        std::string why;
        ASSERT_TRUE(cnf_agrees(f, {}, &why)) << "trial " << trial << ": " << why;
    }
}

TEST(Dimacs, HeaderAndTerminators) {
    auto f = formula_with(3, {{{{1, pos(0)}, {1, neg(2)}}, Relation::ge, 1}});
    auto cnf = pb_to_cnf(f);
    std::ostringstream os;
    write_dimacs(os, cnf);
    EXPECT_EQ(os.str(), "p cnf 3 1\n1 -3 0\n");
    EXPECT_TRUE(cnf_satisfied(cnf, {1, 0, 1}));
    EXPECT_FALSE(cnf_satisfied(cnf, {0, 0, 1}));
}
