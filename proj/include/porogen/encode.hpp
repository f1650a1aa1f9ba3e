#pragma once

// Compiles the geometric constraints, the image/network link, the binarized
// network, and the process interval into a single pseudo-Boolean formula.
//
// Variables:
//   c[i,j,r]  cell (i,j) belongs to grain r (r <= w) or to the void (r = w+1)
//   I[i,j]    network input pixel (1 = grain)
//   x[l,n]    activation of neuron n in block l (1 encodes +1, 0 encodes -1)

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "porogen/bnn.hpp"
#include "porogen/error.hpp"
#include "porogen/geometry.hpp"
#include "porogen/grid.hpp"
#include "porogen/pb.hpp"
#include "porogen/rng.hpp"

namespace porogen {

inline std::string cell_name(int i, int j, int r) {
    return "c[" + std::to_string(i) + "," + std::to_string(j) + "," + std::to_string(r) + "]";
}
inline std::string pixel_name(int i, int j) {
    return "I[" + std::to_string(i) + "," + std::to_string(j) + "]";
}
inline std::string activation_name(int layer, int neuron) {
    return "x[" + std::to_string(layer) + "," + std::to_string(neuron) + "]";
}

inline Var cell_var(const FormulaMeta& m, Cell c, int r) {
    return m.cell_base + static_cast<Var>(linear(c, m.t) * (m.w + 1) + (r - 1));
}
inline Var pixel_var(const FormulaMeta& m, Cell c) {
    return m.pixel_base + static_cast<Var>(linear(c, m.t));
}
inline Var activation_var(const FormulaMeta& m, int layer, int neuron) {
    return m.layer_base.at(std::size_t(layer - 1)) + (neuron - 1);
}

inline void declare_cells(PbFormula& f, int t, int w) {
    require(t >= 1 && w >= 0, "declare_cells: bad grid or grain count");
    require(!f.meta.has_cells, "declare_cells: cell variables already declared");
    f.meta.t = t;
    f.meta.w = w;
    f.meta.cell_base = static_cast<Var>(f.num_vars());
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j)
            for (int r = 1; r <= w + 1; ++r) f.add_var(cell_name(i, j, r));
    f.meta.has_cells = true;
}

inline void declare_pixels(PbFormula& f, int t) {
    if (f.meta.has_pixels) {
        require(f.meta.t == t, "declare_pixels: side length mismatch");
        return;
    }
    f.meta.t = t;
    f.meta.pixel_base = static_cast<Var>(f.num_vars());
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) f.add_var(pixel_name(i, j));
    f.meta.has_pixels = true;
}

/// Each cell is exactly one of: grain 1..w or void.
inline std::size_t encode_cells(PbFormula& f, int t, int w) {
    require(t >= 1 && w >= 0, "encode_cells: bad grid or grain count");
    if (!f.meta.has_cells) declare_cells(f, t, w);
    std::size_t added = 0;
    for (int i = 1; i <= t; ++i) {
        for (int j = 1; j <= t; ++j) {
            std::vector<Term> terms;
            for (int r = 1; r <= w + 1; ++r) terms.push_back({1, pos(cell_var(f.meta, {i, j}, r))});
            f.add(std::move(terms), Relation::eq, 1);
            ++added;
        }
    }
    return added;
}

/// Side-adjacent cells may not belong to two different grains.
inline std::size_t encode_no_overlap(PbFormula& f, int t, int w) {
    std::size_t added = 0;
    for (int i = 1; i <= t; ++i) {
        for (int j = 1; j <= t; ++j) {
            const Cell c{i, j};
            for_each_neighbor(c, t, [&](Cell nb) {
                if (nb < c) return;  // each unordered pair once; both grain orders below
                for (int r = 1; r <= w; ++r)
                    for (int r2 = 1; r2 <= w; ++r2) {
                        if (r == r2) continue;
                        f.add_clause({neg(cell_var(f.meta, c, r)), neg(cell_var(f.meta, nb, r2))});
                        ++added;
                    }
            });
        }
    }
    return added;
}

/// dags[r-1] is the DAG of grain r; dags[w] is the void's. Roots are forced
/// into their region and every other cell needs a parent in the same region.
inline std::size_t encode_connectivity(PbFormula& f, const std::vector<DagGraph>& dags) {
    const int t = f.meta.t, w = f.meta.w;
    require(f.meta.has_cells, "encode_connectivity: cell variables not declared");
    require(dags.size() == std::size_t(w + 1), "encode_connectivity: need one DAG per grain plus one for the void");
    std::size_t added = 0;
    for (int r = 1; r <= w + 1; ++r) {
        const DagGraph& g = dags[r - 1];
        require(g.t == t, "encode_connectivity: DAG built for a different grid");
        f.add_unit(pos(cell_var(f.meta, g.root, r)));
        ++added;
        for (int i = 1; i <= t; ++i) {
            for (int j = 1; j <= t; ++j) {
                const Cell c{i, j};
                if (c == g.root) continue;
                std::vector<Lit> clause{neg(cell_var(f.meta, c, r))};
                for (Cell p : g.parents_of(c)) clause.push_back(pos(cell_var(f.meta, p, r)));
                f.add_clause(clause);
                ++added;
            }
        }
    }
    return added;
}

/// rings[r-1] is centered on grain r's seed. A cell on ring v > s may join the
/// grain only if every cell on ring v - s already belongs to it.
inline std::size_t encode_compactness(PbFormula& f, const std::vector<RingSet>& rings, int slack) {
    require(slack >= 1, "encode_compactness: slack must be at least 1");
    require(rings.size() <= std::size_t(f.meta.w), "encode_compactness: more ring sets than grains");
    std::size_t added = 0;
    for (std::size_t g = 0; g < rings.size(); ++g) {
        const int r = static_cast<int>(g) + 1;
        const RingSet& rs = rings[g];
        require(rs.t == f.meta.t, "encode_compactness: rings built for a different grid");
        for (int v = slack + 1; v <= rs.count(); ++v)
            for (Cell c : rs.ring(v))
                for (Cell inner : rs.ring(v - slack)) {
                    f.add_clause({neg(cell_var(f.meta, c, r)), pos(cell_var(f.meta, inner, r))});
                    ++added;
                }
    }
    return added;
}

/// Void border. With all_sides = false only row t and column t are forced,
/// which is the narrower two-sided variant.
inline std::size_t encode_boundary(PbFormula& f, int t, int w, bool all_sides = true) {
    std::size_t added = 0;
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) {
            const bool border = all_sides ? on_border({i, j}, t) : (i == t || j == t);
            if (!border) continue;
            f.add_unit(pos(cell_var(f.meta, {i, j}, w + 1)));
            ++added;
        }
    f.meta.all_sides_boundary = all_sides;
    return added;
}

/// I[i,j] = sum over grains of c[i,j,r]; given exactly-one, this is the pair
/// of implications grain -> I = 1 and void -> I = 0.
inline std::size_t encode_pixel_link(PbFormula& f, int t, int w) {
    declare_pixels(f, t);
    std::size_t added = 0;
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) {
            std::vector<Term> terms{{1, pos(pixel_var(f.meta, {i, j}))}};
            for (int r = 1; r <= w; ++r) terms.push_back({-1, pos(cell_var(f.meta, {i, j}, r))});
            f.add(std::move(terms), Relation::eq, 0);
            ++added;
        }
    return added;
}

/// Reified threshold constraints for every neuron, with the +-1 -> 0/1 change
/// of variables x = 2v - 1 folded into the coefficients. Sets output_terms so
/// that output_terms + output_constant equals the network output.
inline std::size_t encode_bnn(PbFormula& f, const IntBnnModel& m) {
    m.check_shape();
    require(!f.meta.has_pixels || f.meta.t == m.t, "encode_bnn: model side does not match the formula");
    declare_pixels(f, m.t);
    require(f.meta.layer_base.empty(), "encode_bnn: network already encoded");

    std::vector<Var> inputs;
    for (std::size_t k = 0; k < std::size_t(m.t) * m.t; ++k) inputs.push_back(f.meta.pixel_base + Var(k));

    std::size_t added = 0;
    for (std::size_t l = 0; l < m.blocks.size(); ++l) {
        const auto& b = m.blocks[l];
        require(inputs.size() == std::size_t(b.n_in), "encode_bnn: dimension mismatch");
        f.meta.layer_base.push_back(static_cast<Var>(f.num_vars()));
        f.meta.layer_width.push_back(static_cast<int>(b.neurons.size()));
        std::vector<Var> outputs;
        for (std::size_t n = 0; n < b.neurons.size(); ++n)
            outputs.push_back(f.add_var(activation_name(int(l) + 1, int(n) + 1)));
        for (std::size_t n = 0; n < b.neurons.size(); ++n) {
            const auto& neuron = b.neurons[n];
            if (neuron.is_constant()) {
                f.add_unit(neuron.constant_value > 0 ? pos(outputs[n]) : neg(outputs[n]));
                ++added;
                continue;
            }
            // sum a_k (2 v_k - 1) >= C  <=>  sum 2 a_k v_k >= C + sum a_k
            ReifiedConstraint rc;
            rc.indicator = pos(outputs[n]);
            std::int64_t row_sum = 0;
            for (std::size_t k = 0; k < neuron.row.size(); ++k) {
                rc.terms.push_back({2 * std::int64_t(neuron.row[k]), pos(inputs[k])});
                row_sum += neuron.row[k];
            }
            rc.bound = neuron.threshold + row_sum;
            f.add_reified(std::move(rc));
            ++added;
        }
        inputs = std::move(outputs);
    }
    require(inputs.size() == m.out_weights.size(), "encode_bnn: output dimension mismatch");
    f.output_terms.clear();
    std::int64_t wsum = 0;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
        f.output_terms.push_back({2 * std::int64_t(m.out_weights[k]), pos(inputs[k])});
        wsum += m.out_weights[k];
    }
    f.output_constant = m.out_bias - wsum;
    return added;
}

/// Inclusive integer interval for the surrogate output.
struct Interval {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

/// Converts the half-open [a, b) convention (closed when b is the top of the
/// label range) to an inclusive integer interval.
inline Interval half_open(std::int64_t a, std::int64_t b, std::int64_t top = 100) {
    return b >= top ? Interval{a, b} : Interval{a, b - 1};
}

/// The six label bands [40,50), [50,60), ..., [90,100].
inline std::vector<Interval> label_bands() {
    std::vector<Interval> v;
    for (int a = 40; a < 100; a += 10) v.push_back(half_open(a, a + 10));
    return v;
}

inline std::size_t encode_process(PbFormula& f, std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, "encode_process: empty interval [" + std::to_string(lo) + "," + std::to_string(hi) + "]");
    require(!f.output_terms.empty() || !f.meta.layer_base.empty(), "encode_process: network not encoded");
    f.add(f.output_terms, Relation::ge, lo - f.output_constant);
    f.add(f.output_terms, Relation::le, hi - f.output_constant);
    f.meta.lo = lo;
    f.meta.hi = hi;
    return 2;
}

// ---------------------------------------------------------------- full instances

struct InstanceOptions {
    SlackRange slack{1, 3};
    DagMode grain_dag = DagMode::manhattan;
    DagMode void_dag = DagMode::manhattan;
    bool all_sides_boundary = true;
    bool compactness = true;
};

/// Random structure of one generation problem: seeds, slack, DAGs, rings.
struct InstancePlan {
    int t = 0;
    int w = 0;
    SeedPlan seeds;
    std::vector<DagGraph> dags;  // w grain DAGs then the void DAG
    std::vector<RingSet> rings;  // one per grain
    InstanceOptions options;
};

inline InstancePlan plan_instance(int t, int w, const InstanceOptions& opt, Rng& rng) {
    InstancePlan p;
    p.t = t;
    p.w = w;
    p.options = opt;
    p.seeds = sample_seeds(t, w, opt.slack, rng);
    for (Cell s : p.seeds.seeds) p.dags.push_back(build_dag(t, s, opt.grain_dag, rng));
    p.dags.push_back(build_dag(t, p.seeds.void_seed, opt.void_dag, rng));
    for (Cell s : p.seeds.seeds) p.rings.push_back(build_rings(t, s));
    return p;
}

/// Geometry only (no network), for plans whose seeds are chosen by hand.
inline PbFormula encode_geometry(const InstancePlan& p) {
    PbFormula f;
    declare_cells(f, p.t, p.w);
    encode_cells(f, p.t, p.w);
    encode_no_overlap(f, p.t, p.w);
    encode_connectivity(f, p.dags);
    if (p.options.compactness) encode_compactness(f, p.rings, p.seeds.slack);
    encode_boundary(f, p.t, p.w, p.options.all_sides_boundary);
    encode_pixel_link(f, p.t, p.w);
    f.meta.slack = p.seeds.slack;
    f.meta.seeds = p.seeds.seeds;
    f.meta.void_seed = p.seeds.void_seed;
    f.meta.dag_mode = to_string(p.options.grain_dag);
    return f;
}

inline PbFormula encode_instance(const InstancePlan& p, const IntBnnModel& m, Interval band) {
    require(m.t == p.t, "encode_instance: model side does not match the grid");
    PbFormula f = encode_geometry(p);
    encode_bnn(f, m);
    encode_process(f, band.lo, band.hi);
    return f;
}

} // namespace porogen
