#pragma once

// Procedural training corpora: geometrically valid random media labeled with
// the PDE oracle. Grains grow outward from random seeds ring by ring, so the
// generator never consults the constraint encoder it is used to validate.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "porogen/bnn.hpp"
#include "porogen/geometry.hpp"
#include "porogen/pbm.hpp"
#include "porogen/pde.hpp"
#include "porogen/rng.hpp"
#include "porogen/validate.hpp"

namespace porogen {

struct GrowthConfig {
    double max_fill = 0.45;  // upper bound on total grain area, as a fraction of the interior
    int max_retries = 200;
};

inline Image gen_random_image(int t, int w, Rng& rng, const GrowthConfig& cfg = {}) {
    require(w >= 0, "gen_random_image: negative grain count");
    if (w == 0) return Image(t);

    const int interior = (t - 2) * (t - 2);
    for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        const SeedPlan plan = sample_seeds(t, w, {1, 1}, rng);
        std::vector<RingSet> rings;
        for (Cell s : plan.seeds) rings.push_back(build_rings(t, s));

        // Target areas: total fill uniform in [w, max_fill * interior], split randomly.
        const int max_total = std::max(w, static_cast<int>(cfg.max_fill * interior));
        const int total = std::uniform_int_distribution<int>(w, max_total)(rng);
        std::vector<double> share(w);
        double share_sum = 0.0;
        for (auto& s : share) share_sum += (s = std::uniform_real_distribution<double>(0.3, 1.0)(rng));
        std::vector<int> target(w);
        for (int r = 0; r < w; ++r) target[r] = std::max(1, static_cast<int>(std::lround(total * share[r] / share_sum)));

        GrainLabels label(std::size_t(t) * t, 0);
        std::vector<int> area(w, 1);
        for (int r = 0; r < w; ++r) label[linear(plan.seeds[r], t)] = r + 1;

        auto can_take = [&](Cell c, int r) {
            if (on_border(c, t) || label[linear(c, t)] != 0) return false;
            bool ok = true;
            for_each_neighbor(c, t, [&](Cell nb) {
                const int o = label[linear(nb, t)];
                if (o != 0 && o != r + 1) ok = false;
            });
            return ok;
        };

        bool dead_end = false;
        for (bool growing = true; growing && !dead_end;) {
            growing = false;
            for (int r = 0; r < w; ++r) {
                if (area[r] >= target[r]) continue;
                // Frontier restricted to the innermost rings, with a little jitter.
                std::vector<Cell> frontier;
                int best_ring = std::numeric_limits<int>::max();
                for (std::size_t k = 0; k < label.size(); ++k) {
                    if (label[k] != r + 1) continue;
                    for_each_neighbor(cell_at(k, t), t, [&](Cell nb) {
                        if (can_take(nb, r)) {
                            frontier.push_back(nb);
                            best_ring = std::min(best_ring, rings[r].ring_of(nb));
                        }
                    });
                }
                if (frontier.empty()) {
                    dead_end = true;
                    break;
                }
                const int slack = std::uniform_int_distribution<int>(0, 1)(rng);
                std::erase_if(frontier, [&](Cell c) { return rings[r].ring_of(c) > best_ring + slack; });
                Cell pick = frontier[std::uniform_int_distribution<std::size_t>(0, frontier.size() - 1)(rng)];
                label[linear(pick, t)] = r + 1;
                ++area[r];
                growing = true;
            }
        }
        if (dead_end) continue;

        std::vector<std::uint8_t> px(label.size());
        for (std::size_t k = 0; k < label.size(); ++k) px[k] = label[k] > 0;
        Image img(t, std::move(px));
        if (validate_geometry(img, w, &label).all_ok(w)) return img;
    }
    fail(ErrorKind::infeasible, "gen_random_image: no valid image after " + std::to_string(cfg.max_retries) +
                                    " attempts (t=" + std::to_string(t) + ", w=" + std::to_string(w) + ")");
}

inline constexpr int min_label = 40;
inline constexpr int max_label = 100;

struct DatasetRecord {
    LabeledSample sample;
    double d_real = 0.0;
    std::uint64_t seed = 0;  // stream seed that reproduces the image
};

struct DatasetStats {
    std::size_t raw = 0;
    std::size_t below_range = 0;
    std::vector<std::size_t> histogram = std::vector<std::size_t>(11, 0);  // label / 10
};

/// Generates n labeled samples with labels in [40, 100]. Sample k draws from
/// stream mix_seed(seed, k), re-drawing sub-streams until its label is in
/// range, so the output does not depend on generation order.
inline std::vector<DatasetRecord> build_dataset(std::size_t n, int t, int w, std::uint64_t seed,
                                                DatasetStats* stats = nullptr, const GrowthConfig& cfg = {}) {
    require(n >= 1, "build_dataset: count must be at least 1");
    DatasetStats local;
    DatasetStats& st = stats ? *stats : local;
    std::vector<DatasetRecord> out;
    out.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::uint64_t sample_seed = mix_seed(seed, k);
        for (std::uint64_t redraw = 0;; ++redraw) {
            const std::uint64_t s = mix_seed(sample_seed, redraw);
            Rng rng(s);
            Image img = gen_random_image(t, w, rng, cfg);
            const auto pde = dispersion_x(img);
            ++st.raw;
            if (pde.d_int < min_label) {
                ++st.below_range;
                if (st.raw >= 20 && 2 * st.below_range > st.raw)
                    fail(ErrorKind::infeasible, "build_dataset: more than half of raw samples fall below label " +
                                                    std::to_string(min_label) + "; lower the grain fill");
                continue;
            }
            ++st.histogram[std::size_t(pde.d_int / 10)];
            out.push_back({LabeledSample{std::move(img), pde.d_int}, pde.d_real, s});
            break;
        }
    }
    return out;
}

inline std::string sample_filename(std::size_t k) {
    std::ostringstream os;
    os << "sample_" << std::setw(6) << std::setfill('0') << k << ".pbm";
    return os.str();
}

/// Writes images, sidecars, and manifest.jsonl (one {path,t,w,d,seed} record per line).
inline void write_dataset(const std::filesystem::path& dir, const std::vector<DatasetRecord>& records, int w) {
    std::filesystem::create_directories(dir / "images");
    std::ofstream manifest(dir / "manifest.jsonl");
    if (!manifest) fail(ErrorKind::io, "cannot write manifest in " + dir.string());
    for (std::size_t k = 0; k < records.size(); ++k) {
        const auto& r = records[k];
        const auto rel = std::filesystem::path("images") / sample_filename(k);
        save_pbm(dir / rel, r.sample.image);
        Sidecar sc;
        sc.t = r.sample.image.side();
        sc.w = w;
        sc.seed = r.seed;
        sc.d_true = 100.0 * r.d_real;
        sc.extra["d"] = r.sample.label;
        save_sidecar(sidecar_path(dir / rel), sc);
        nlohmann::json line{{"path", rel.string()}, {"t", sc.t}, {"w", w}, {"d", r.sample.label}, {"seed", r.seed}};
        manifest << line.dump() << '\n';
    }
}

inline std::vector<LabeledSample> read_dataset(const std::filesystem::path& dir) {
    std::ifstream manifest(dir / "manifest.jsonl");
    if (!manifest) fail(ErrorKind::io, "no manifest.jsonl in " + dir.string());
    std::vector<LabeledSample> out;
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            out.push_back({load_pbm(dir / j.at("path").get<std::string>()), j.at("d").get<int>()});
        } catch (const nlohmann::json::exception& e) {
            fail(ErrorKind::io, "manifest: " + std::string(e.what()));
        }
    }
    if (out.empty()) fail(ErrorKind::io, "manifest in " + dir.string() + " lists no samples");
    return out;
}

} // namespace porogen
