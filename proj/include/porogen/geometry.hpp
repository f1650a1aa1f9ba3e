#pragma once

// Auxiliary structures that restrict grain shapes: connectivity DAGs rooted at
// a seed cell, concentric rings around a grain center, and the random choice
// of seeds and slack.

#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/grid.hpp"
#include "porogen/rng.hpp"

namespace porogen {

enum class DagMode { manhattan, randomized };

inline const char* to_string(DagMode m) {
    return m == DagMode::manhattan ? "manhattan" : "randomized";
}

inline DagMode parse_dag_mode(const std::string& s) {
    if (s == "manhattan") return DagMode::manhattan;
    if (s == "randomized") return DagMode::randomized;
    fail(ErrorKind::invalid_input, "unknown DAG mode '" + s + "'");
}

/// Parent structure over every cell of a t x t grid. A cell may belong to a
/// region only if one of its parents does, so regions grown along it stay
/// connected to the root.
struct DagGraph {
    int t = 0;
    Cell root;
    std::vector<std::vector<Cell>> parents;  // indexed by linear(cell)
    std::vector<int> layer;                  // strictly decreasing along parent arcs

    const std::vector<Cell>& parents_of(Cell c) const { return parents[linear(c, t)]; }
    int layer_of(Cell c) const { return layer[linear(c, t)]; }
    int depth() const {
        int d = 0;
        for (int l : layer) d = std::max(d, l);
        return d;
    }
};

/// Manhattan mode: parents are the neighbours one step closer to the root in
/// L1 distance. Randomized mode: layers are shortest-path distances under
/// random per-cell entry costs in {1, 2}; parents are all neighbours on a
/// strictly lower layer.
inline DagGraph build_dag(int t, Cell root, DagMode mode, Rng& rng) {
    require(valid(root, t), "build_dag: root " + to_string(root) + " outside grid");
    const std::size_t n = static_cast<std::size_t>(t) * t;
    DagGraph g;
    g.t = t;
    g.root = root;
    g.parents.assign(n, {});
    g.layer.assign(n, 0);

    if (mode == DagMode::manhattan) {
        for (std::size_t k = 0; k < n; ++k) g.layer[k] = manhattan(cell_at(k, t), root);
    } else {
        std::uniform_int_distribution<int> cost(1, 2);
        std::vector<int> entry(n);
        for (auto& c : entry) c = cost(rng);
        constexpr int unreached = std::numeric_limits<int>::max();
        std::vector<int> dist(n, unreached);
        using Item = std::pair<int, std::size_t>;
        std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
        dist[linear(root, t)] = 0;
        pq.push({0, linear(root, t)});
        while (!pq.empty()) {
            auto [d, k] = pq.top();
            pq.pop();
            if (d != dist[k]) continue;
            for_each_neighbor(cell_at(k, t), t, [&](Cell nb) {
                auto nk = linear(nb, t);
                int nd = d + entry[nk];
                if (nd < dist[nk]) {
                    dist[nk] = nd;
                    pq.push({nd, nk});
                }
            });
        }
        g.layer = std::move(dist);
    }

    for (std::size_t k = 0; k < n; ++k) {
        Cell c = cell_at(k, t);
        if (c == root) continue;
        for_each_neighbor(c, t, [&](Cell nb) {
            int ln = g.layer[linear(nb, t)];
            bool is_parent = mode == DagMode::manhattan ? ln == g.layer[k] - 1 : ln < g.layer[k];
            if (is_parent) g.parents[k].push_back(nb);
        });
    }
    return g;
}

/// Concentric discrete circles around a center: cell (h,g) lies on ring v
/// iff its Euclidean distance to the center rounds to v (v >= 1).
struct RingSet {
    int t = 0;
    Cell center;
    std::vector<std::vector<Cell>> rings;  // rings[v-1] holds ring v
    std::vector<int> ring_index;           // per linear cell; 0 for the center

    int count() const { return static_cast<int>(rings.size()); }
    const std::vector<Cell>& ring(int v) const { return rings.at(static_cast<std::size_t>(v - 1)); }
    int ring_of(Cell c) const { return ring_index[linear(c, t)]; }
};

inline RingSet build_rings(int t, Cell center) {
    require(valid(center, t), "build_rings: center " + to_string(center) + " outside grid");
    RingSet rs;
    rs.t = t;
    rs.center = center;
    rs.ring_index.assign(static_cast<std::size_t>(t) * t, 0);
    for (int i = 1; i <= t; ++i) {
        for (int j = 1; j <= t; ++j) {
            const int di = i - center.i, dj = j - center.j;
            const int v = static_cast<int>(std::lround(std::sqrt(double(di * di + dj * dj))));
            rs.ring_index[linear({i, j}, t)] = v;
            if (v == 0) continue;
            if (rs.rings.size() < static_cast<std::size_t>(v)) rs.rings.resize(v);
            rs.rings[v - 1].push_back({i, j});
        }
    }
    return rs;
}

struct SlackRange {
    int lo = 1;
    int hi = 1;
};

struct SeedPlan {
    std::vector<Cell> seeds;  // one per grain
    Cell void_seed{1, 1};
    int slack = 1;
};

inline constexpr int min_seed_separation = 3;  // Chebyshev
inline constexpr int min_seed_border_gap = 2;

/// Places w grain seeds uniformly at random on the interior band
/// [3, t-2] x [3, t-2], pairwise Chebyshev distance >= 3, and draws the
/// compactness slack uniformly from `slack`.
inline SeedPlan sample_seeds(int t, int w, SlackRange slack, Rng& rng, int max_attempts = 2000) {
    require(t >= 6, "sample_seeds: side length must be at least 6");
    require(w >= 1, "sample_seeds: need at least one grain");
    require(slack.lo >= 1 && slack.lo <= slack.hi, "sample_seeds: slack range must satisfy 1 <= lo <= hi");

    const int lo = 1 + min_seed_border_gap, hi = t - min_seed_border_gap;
    const int band = hi - lo + 1;
    // A k x k band packs at most ceil(k/3)^2 seeds at separation 3.
    const int capacity = ((band + min_seed_separation - 1) / min_seed_separation) *
                         ((band + min_seed_separation - 1) / min_seed_separation);
    if (w > capacity)
        fail(ErrorKind::infeasible, "sample_seeds: " + std::to_string(w) + " grains cannot be placed on a " +
                                        std::to_string(t) + "x" + std::to_string(t) + " grid");

    std::uniform_int_distribution<int> coord(lo, hi);
    SeedPlan plan;
    for (int attempt = 0; attempt < max_attempts; ++attempt) {
        plan.seeds.clear();
        for (int r = 0; r < w; ++r) {
            bool placed = false;
            for (int tries = 0; tries < 64 && !placed; ++tries) {
                Cell c{coord(rng), coord(rng)};
                bool ok = true;
                for (Cell s : plan.seeds) ok = ok && chebyshev(s, c) >= min_seed_separation;
                if (ok) {
                    plan.seeds.push_back(c);
                    placed = true;
                }
            }
            if (!placed) break;
        }
        if (static_cast<int>(plan.seeds.size()) == w) {
            plan.void_seed = {1, 1};
            plan.slack = std::uniform_int_distribution<int>(slack.lo, slack.hi)(rng);
            return plan;
        }
    }
    fail(ErrorKind::infeasible, "sample_seeds: no placement of " + std::to_string(w) + " seeds found after " +
                                    std::to_string(max_attempts) + " attempts");
}

} // namespace porogen
