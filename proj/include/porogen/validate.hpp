#pragma once

// Post-hoc geometric checks on a decoded or generated image. Everything here
// is independent of the constraint encoder so it can serve as its oracle.

#include <optional>
#include <span>
#include <vector>

#include "porogen/geometry.hpp"
#include "porogen/grid.hpp"

namespace porogen {

struct GeometryReport {
    int grain_count = 0;         // 4-connected components of grain pixels
    bool boundary_ok = true;     // all four border rows/columns void
    bool adjacency_ok = true;    // no grain pixel side-adjacent to a different grain
    bool voids_connected = true; // void pixels form one 4-connected component
    bool compact_ok = true;      // ring condition around each given center
    bool labels_ok = true;       // labeling (if given) matches pixels, one component per label

    bool all_ok(int expected_grains) const {
        return grain_count == expected_grains && boundary_ok && adjacency_ok && voids_connected &&
               compact_ok && labels_ok;
    }
};

/// Labels each 4-connected component of pixels equal to `value`; returns the
/// component id per cell (-1 elsewhere) and the number of components.
inline std::pair<std::vector<int>, int> label_components(const Image& img, std::uint8_t value) {
    const int t = img.side();
    std::vector<int> comp(img.size(), -1);
    int count = 0;
    std::vector<std::size_t> stack;
    for (std::size_t k = 0; k < img.size(); ++k) {
        if (img.pixels()[k] != value || comp[k] >= 0) continue;
        comp[k] = count;
        stack.push_back(k);
        while (!stack.empty()) {
            auto cur = stack.back();
            stack.pop_back();
            for_each_neighbor(cell_at(cur, t), t, [&](Cell nb) {
                auto nk = linear(nb, t);
                if (img.pixels()[nk] == value && comp[nk] < 0) {
                    comp[nk] = count;
                    stack.push_back(nk);
                }
            });
        }
        ++count;
    }
    return {std::move(comp), count};
}

struct CompactnessCheck {
    std::span<const RingSet> rings;  // one per grain, centered at its seed
    int slack = 1;
};

/// `labels`, when given, assigns declared grain ids (0 = void); adjacency is
/// then judged between declared grains rather than between components.
inline GeometryReport validate_geometry(const Image& img, int /*expected_grains*/,
                                        const GrainLabels* labels = nullptr,
                                        std::optional<CompactnessCheck> compact = std::nullopt) {
    const int t = img.side();
    GeometryReport rep;

    auto [grain_comp, grains] = label_components(img, 1);
    auto [void_comp, voids] = label_components(img, 0);
    rep.grain_count = grains;
    rep.voids_connected = voids <= 1;

    for (int k = 1; k <= t; ++k) {
        for (Cell c : {Cell{1, k}, Cell{t, k}, Cell{k, 1}, Cell{k, t}})
            if (img[c]) rep.boundary_ok = false;
    }

    // Identity used for adjacency/compactness: declared label or component id.
    std::vector<int> ident(img.size(), -1);
    if (labels) {
        if (labels->size() != img.size()) {
            rep.labels_ok = false;
        } else {
            for (std::size_t k = 0; k < img.size(); ++k) {
                const int lab = (*labels)[k];
                if ((lab > 0) != (img.pixels()[k] == 1)) rep.labels_ok = false;
                ident[k] = lab > 0 ? lab : -1;
            }
            // Each declared grain must be a single component.
            std::vector<int> comp_of_label;
            for (std::size_t k = 0; k < img.size(); ++k) {
                const int lab = (*labels)[k];
                if (lab <= 0) continue;
                if (comp_of_label.size() <= static_cast<std::size_t>(lab)) comp_of_label.resize(lab + 1, -1);
                if (comp_of_label[lab] < 0) comp_of_label[lab] = grain_comp[k];
                else if (comp_of_label[lab] != grain_comp[k]) rep.labels_ok = false;
            }
        }
    } else {
        ident = grain_comp;
    }

    for (std::size_t k = 0; k < img.size(); ++k) {
        if (ident[k] < 0) continue;
        for_each_neighbor(cell_at(k, t), t, [&](Cell nb) {
            const int o = ident[linear(nb, t)];
            if (o >= 0 && o != ident[k]) rep.adjacency_ok = false;
        });
    }

    if (compact) {
        for (const RingSet& rs : compact->rings) {
            if (rs.t != t || !img[rs.center]) {
                rep.compact_ok = false;
                continue;
            }
            const int id = ident[linear(rs.center, t)];
            auto member = [&](Cell c) { return ident[linear(c, t)] == id; };
            for (int v = compact->slack + 1; v <= rs.count() && rep.compact_ok; ++v) {
                bool outer_used = false;
                for (Cell c : rs.ring(v)) outer_used = outer_used || member(c);
                if (!outer_used) continue;
                for (Cell c : rs.ring(v - compact->slack))
                    if (!member(c)) rep.compact_ok = false;
            }
        }
    }
    return rep;
}

} // namespace porogen
