// Acceptance run: one PASS/FAIL line per criterion, details in a JSONL log.
//
//   acceptance [--log FILE] [--only 1,2,...]

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "pde_oracle.hpp"
#include "porogen/porogen.hpp"
#include "support.hpp"

using namespace porogen;
using json = nlohmann::json;
using porogen::testing::image_from_bits;
using porogen::testing::noise_image;
using porogen::testing::random_int_model;

namespace {

std::ofstream g_log;
bool g_all_pass = true;

void log_line(const json& j) {
    if (g_log) g_log << j.dump() << '\n' << std::flush;
}

void report(int n, bool pass, const std::string& summary, json detail = json::object()) {
    std::cout << (pass ? "PASS" : "FAIL") << " criterion " << n << ": " << summary << std::endl;
    detail["criterion"] = n;
    detail["pass"] = pass;
    detail["summary"] = summary;
    log_line(detail);
    g_all_pass = g_all_pass && pass;
}

double seconds(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Every formula the run emits goes through an OPB export and an independent
// parse; criterion 8 reports the tally.
struct RoundTrips {
    std::size_t checked = 0, failed = 0;
} g_opb;

void opb_round_trip(const PbFormula& f) {
    const auto lin = f.is_linear() ? f : f.linearized();
    const auto parsed = testing::parse_opb(to_opb(f));
    bool ok = parsed.declared_vars == long(lin.num_vars()) &&
              parsed.declared_constraints == long(lin.constraints().size()) &&
              parsed.constraints.size() == lin.constraints().size();
    for (std::size_t k = 0; ok && k < lin.constraints().size(); ++k)
        ok = parsed.constraints[k] == testing::opb_normal_form(lin.constraints()[k]);
    ++g_opb.checked;
    if (!ok) ++g_opb.failed;
}

double band_midpoint(const Interval& b) {
    return b.hi == max_label ? 0.5 * double(b.lo + b.hi) : 0.5 * double(b.lo + b.hi + 1);
}

std::string band_name(const Interval& b) {
    std::ostringstream os;
    if (b.hi == max_label) os << '[' << b.lo << ',' << b.hi << ']';
    else os << '[' << b.lo << ',' << b.hi + 1 << ')';
    return os.str();
}

// Full re-check of a sat answer: formula, geometry with labels and rings,
// and the network's output inside the band.
bool sound_answer(const PbFormula& f, const InstancePlan& plan, const IntBnnModel& m, const SolveOutcome& out,
                  Image* image, std::string* why) {
    if (!f.check(out.assignment)) return *why = "assignment violates the formula", false;
    const auto d = decode_image(out.assignment, f.meta);
    const auto rep = validate_geometry(d.image, plan.w, &d.labels, CompactnessCheck{plan.rings, plan.seeds.slack});
    if (!rep.all_ok(plan.w)) {
        std::ostringstream os;
        os << "geometry: grains " << rep.grain_count << " boundary " << rep.boundary_ok << " adjacency "
           << rep.adjacency_ok << " voids " << rep.voids_connected << " compact " << rep.compact_ok << " labels "
           << rep.labels_ok;
        return *why = os.str(), false;
    }
    const auto y = forward(m, d.image);
    if (y != f.output_value(out.assignment) || y < f.meta.lo || y > f.meta.hi)
        return *why = "network output " + std::to_string(y) + " outside the band", false;
    *image = d.image;
    return true;
}

// ------------------------------------------------------------------ 1

void criterion_1() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(1001);
    std::size_t cases = 0, mismatches = 0;
    json first_bad;
    for (int model = 0; model < 50; ++model) {
        const int t = std::uniform_int_distribution<int>(2, 6)(rng);
        const int blocks = std::uniform_int_distribution<int>(1, 2)(rng);
        std::vector<int> widths;
        for (int b = 0; b < blocks; ++b) widths.push_back(std::uniform_int_distribution<int>(1, 8)(rng));
        const auto m = random_int_model(t, widths, rng, std::uniform_int_distribution<int>(40, 100)(rng));
        for (int k = 0; k < 20; ++k) {
            const auto img = noise_image(t, 0.15 + 0.7 * k / 19.0, rng);
            PbFormula f;
            encode_bnn(f, m);
            for (int i = 1; i <= t; ++i)
                for (int j = 1; j <= t; ++j) {
                    const Var v = pixel_var(f.meta, {i, j});
                    f.add_unit(img(i, j) ? pos(v) : neg(v));
                }
            opb_round_trip(f);
            SolveOptions opt;
            opt.seed = mix_seed(model, k);
            const auto out = solve(f, opt);
            ++cases;
            const auto want = forward(m, img);
            bool ok = out.status == SolveStatus::sat && f.output_value(out.assignment) == want;
            if (ok) {
                // Every layer's activations must match too, not just the sum.
                auto x = input_vector(img);
                for (std::size_t l = 0; ok && l < m.blocks.size(); ++l) {
                    x = block_forward(m.blocks[l], x);
                    for (std::size_t o = 0; ok && o < x.size(); ++o)
                        ok = (out.assignment[std::size_t(activation_var(f.meta, int(l) + 1, int(o) + 1))] == 1) ==
                             (x[o] > 0);
                }
            }
            if (!ok && mismatches++ == 0)
                first_bad = {{"model", model}, {"image", k}, {"status", to_string(out.status)}, {"want", want}};
        }
    }
    report(1, mismatches == 0,
           std::to_string(cases) + " fixed-image solves, " + std::to_string(mismatches) + " mismatches",
           {{"cases", cases}, {"mismatches", mismatches}, {"first_mismatch", first_bad}, {"seconds", seconds(t0)}});
}

// ------------------------------------------------------------------ 2

InstancePlan centre_plan() {
    InstancePlan p;
    p.t = 3;
    p.w = 1;
    p.seeds.seeds = {{2, 2}};
    p.seeds.void_seed = {1, 1};
    p.seeds.slack = 1;
    Rng rng(0);
    p.dags.push_back(build_dag(3, {2, 2}, DagMode::manhattan, rng));
    p.dags.push_back(build_dag(3, {1, 1}, DagMode::manhattan, rng));
    p.rings.push_back(build_rings(3, {2, 2}));
    return p;
}

void criterion_2() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(2002);
    const auto plan = centre_plan();
    std::size_t checks = 0, mismatches = 0, models_seen = 0;
    json first_bad;
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_int_model(3, {2}, rng, std::uniform_int_distribution<int>(45, 95)(rng));
        Image centre(3);
        centre.set({2, 2}, 1);
        const auto dc = forward(m, centre);
        const std::vector<Interval> bands{{m.output_min(), m.output_max()}, {dc, dc}, {dc + 1, m.output_max() + 3}};
        for (const auto& band : bands) {
            const auto f = encode_instance(plan, m, band);
            opb_round_trip(f);
            std::set<std::vector<std::uint8_t>> want;
            for (std::uint64_t bits = 0; bits < 512; ++bits) {
                const auto img = image_from_bits(3, bits);
                const auto d = forward(m, img);
                if (validate_geometry(img, 1).all_ok(1) && d >= band.lo && d <= band.hi) want.insert(img.pixels());
            }
            // Model set projected onto the image, by enumeration with blocking.
            std::set<std::vector<std::uint8_t>> got;
            bool dry = false;
            for (const auto& o : solve_distinct(f, 600)) {
                if (o.status == SolveStatus::unsat) dry = true;
                if (o.status != SolveStatus::sat) break;
                got.insert(decode_image(o.assignment, f.meta).image.pixels());
            }
            ++checks;
            if (!dry || got != want) {
                if (mismatches++ == 0)
                    first_bad = {{"trial", trial}, {"lo", band.lo}, {"hi", band.hi}, {"want", want.size()},
                                 {"got", got.size()}};
            }
            models_seen += got.size();
            // Same question pointwise: every one of the 512 images, pixels fixed.
            for (std::uint64_t bits = 0; bits < 512; ++bits) {
                const auto img = image_from_bits(3, bits);
                PbFormula g = f;
                for (int i = 1; i <= 3; ++i)
                    for (int j = 1; j <= 3; ++j) {
                        const Var v = pixel_var(g.meta, {i, j});
                        g.add_unit(img(i, j) ? pos(v) : neg(v));
                    }
                const bool sat = solve(g).status == SolveStatus::sat;
                ++checks;
                if (sat != (want.count(img.pixels()) > 0) && mismatches++ == 0)
                    first_bad = {{"trial", trial}, {"lo", band.lo}, {"hi", band.hi}, {"image", bits}};
            }
        }
    }
    report(2, mismatches == 0,
           std::to_string(checks) + " set/pointwise comparisons over 512 images, " + std::to_string(mismatches) +
               " mismatches",
           {{"checks", checks}, {"mismatches", mismatches}, {"accepted_images", models_seen},
            {"first_mismatch", first_bad}, {"seconds", seconds(t0)}});
}

// ------------------------------------------------------------------ 4

void criterion_4() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(4004);
    std::size_t mono_bad = 0, mirror_bad = 0, dense_bad = 0, dense_cases = 0;
    double mirror_worst = 0.0, dense_worst = 0.0, mono_worst = 0.0;
    for (int flips = 0; flips < 500;) {
        const int t = std::uniform_int_distribution<int>(4, 16)(rng);
        auto img = noise_image(t, 0.3, rng);
        const double before = dispersion_x(img).d_real;
        std::uniform_int_distribution<int> coord(1, t);
        const Cell c{coord(rng), coord(rng)};
        if (img[c]) continue;
        img.set(c, 1);
        const double after = dispersion_x(img).d_real;
        mono_worst = std::max(mono_worst, after - before);
        if (after > before + 1e-9) ++mono_bad;
        ++flips;
    }
    for (int n = 0; n < 100; ++n) {
        const int t = 4 + n % 13;
        const auto img = n % 2 ? noise_image(t, 0.35, rng) : gen_random_image(std::max(t, 8), 2, rng);
        const double d = dispersion_x(img).d_real;
        for (const auto& mirrored : {img.mirrored_rows(), img.mirrored_cols()}) {
            const double e = std::fabs(dispersion_x(mirrored).d_real - d);
            mirror_worst = std::max(mirror_worst, e);
            if (e > 1e-8) ++mirror_bad;
        }
    }
    for (int n = 0; n < 120; ++n) {
        const int t = 3 + n % 14;
        const auto img = n % 3 == 0 && t >= 8 ? gen_random_image(t, 1 + n % 2, rng)
                                              : noise_image(t, 0.1 + 0.5 * (n % 5) / 4.0, rng);
        const double e = std::fabs(dispersion_x(img).d_real - testing::dense_dispersion(img));
        dense_worst = std::max(dense_worst, e);
        ++dense_cases;
        if (e > 1e-8) ++dense_bad;
    }
    const bool pass = mono_bad == 0 && mirror_bad == 0 && dense_bad == 0;
    std::ostringstream s;
    s << "monotone 500 flips (" << mono_bad << " bad), mirror 200 (" << mirror_bad << " bad, worst " << mirror_worst
      << "), dense " << dense_cases << " (" << dense_bad << " bad, worst " << dense_worst << ")";
    report(4, pass, s.str(),
           {{"monotone_violations", mono_bad}, {"monotone_worst_increase", mono_worst}, {"mirror_violations", mirror_bad},
            {"mirror_worst", mirror_worst}, {"dense_violations", dense_bad}, {"dense_worst", dense_worst},
            {"seconds", seconds(t0)}});
}

// ------------------------------------------------------------------ 5

IntBnnModel criterion_5() {
    const auto t0 = std::chrono::steady_clock::now();
    DatasetStats st;
    const auto train_set = build_dataset(2000, 16, 2, 5005, &st);
    const auto held_set = build_dataset(500, 16, 2, 5006);
    std::vector<LabeledSample> tr, ho;
    for (const auto& r : train_set) tr.push_back(r.sample);
    for (const auto& r : held_set) ho.push_back(r.sample);
    TrainConfig cfg;
    cfg.widths = {32, 32};
    Rng rng(5007);
    auto res = train(tr, cfg, rng);
    auto m = fold_thresholds(res.model);
    const double train_mae = eval_mae(m, tr), held_mae = eval_mae(m, ho);
    std::ostringstream s;
    s << "held-out MAE " << held_mae << " (train " << train_mae << ", 2000 samples, 2x32), gate <= 8";
    report(5, held_mae <= 8.0, s.str(),
           {{"held_out_mae", held_mae}, {"train_mae", train_mae}, {"epoch_mae", res.epoch_mae},
            {"dataset_raw", st.raw}, {"below_range", st.below_range}, {"seconds", seconds(t0)}});
    return m;
}

// ------------------------------------------------------------------ 3, 6, 7

struct Attempt {
    SolveOutcome out;
    InstancePlan plan;
    PbFormula f;
};

Attempt attempt(const IntBnnModel& m, int w, const Interval& band, std::uint64_t seed, const SolveOptions& base,
                const InstanceOptions& io = {}) {
    Rng rng(seed);
    Attempt a;
    a.plan = plan_instance(m.t, w, io, rng);
    a.f = encode_instance(a.plan, m, band);
    opb_round_trip(a.f);
    SolveOptions opt = base;
    opt.seed = seed;
    a.out = solve(a.f, opt);
    return a;
}

void criterion_3(const IntBnnModel& m) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Interval> bands{half_open(60, 70), half_open(70, 80), half_open(80, 90), half_open(90, 100)};
    std::size_t valid = 0, invalid = 0, unsat = 0, timeout = 0, internal = 0, attempts = 0;
    json per_w = json::object();
    std::string first_bad;
    for (int w : {2, 3}) {
        std::size_t got = 0;
        for (std::uint64_t k = 0; got < 50 && k < 400; ++k) {
            InstanceOptions io;
            io.grain_dag = k % 2 ? DagMode::randomized : DagMode::manhattan;
            const auto& band = bands[k % bands.size()];
            SolveOptions opt;
            opt.timeout_s = default_timeout_s;
            auto a = attempt(m, w, band, mix_seed(3003 + w, k), opt, io);
            ++attempts;
            log_line({{"criterion", 3}, {"w", w}, {"band", band_name(band)}, {"k", k},
                      {"status", to_string(a.out.status)}, {"wall_s", a.out.wall_seconds}});
            if (a.out.status == SolveStatus::unsat) ++unsat;
            if (a.out.status == SolveStatus::timeout) ++timeout;
            if (a.out.status == SolveStatus::internal_error) ++internal;
            if (a.out.status != SolveStatus::sat) continue;
            ++got;
            Image img;
            std::string why;
            if (sound_answer(a.f, a.plan, m, a.out, &img, &why)) {
                ++valid;
            } else {
                ++invalid;
                if (first_bad.empty()) first_bad = why;
            }
        }
        per_w[std::to_string(w)] = got;
    }
    const bool pass = valid == 100 && invalid == 0 && internal == 0;
    std::ostringstream s;
    s << valid << "/100 generated images valid (w=2: " << per_w["2"] << ", w=3: " << per_w["3"] << "; " << attempts
      << " attempts, " << unsat << " unsat, " << timeout << " timeout)";
    if (!first_bad.empty()) s << "; first invalid: " << first_bad;
    report(3, pass, s.str(),
           {{"valid", valid}, {"invalid", invalid}, {"attempts", attempts}, {"unsat", unsat}, {"timeout", timeout},
            {"internal_error", internal}, {"per_w", per_w}, {"seconds", seconds(t0)}});
}

void criterion_6(const IntBnnModel& m) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto bands = label_bands();
    std::size_t got = 0, attempts = 0, unsound = 0;
    double sum_mid = 0.0, sum_pred = 0.0;
    for (std::uint64_t k = 0; got < 50 && k < 600; ++k) {
        const auto& band = bands[k % bands.size()];
        SolveOptions opt;
        opt.timeout_s = default_timeout_s;
        auto a = attempt(m, 2, band, mix_seed(6006, k), opt);
        ++attempts;
        json rec{{"criterion", 6}, {"band", band_name(band)}, {"k", k}, {"status", to_string(a.out.status)},
                 {"wall_s", a.out.wall_seconds}};
        if (a.out.status == SolveStatus::sat) {
            Image img;
            std::string why;
            if (!sound_answer(a.f, a.plan, m, a.out, &img, &why)) {
                ++unsound;
                rec["unsound"] = why;
            } else {
                ++got;
                const double d_true = 100.0 * dispersion_x(img).d_real;
                const double pred = double(forward(m, img));
                rec["d_true"] = d_true;
                rec["d_pred"] = pred;
                rec["band_mid_err"] = std::fabs(d_true - band_midpoint(band));
                sum_mid += std::fabs(d_true - band_midpoint(band));
                sum_pred += std::fabs(d_true - pred);
            }
        }
        log_line(rec);
    }
    const double mean_mid = got ? sum_mid / double(got) : 1e9, mean_pred = got ? sum_pred / double(got) : 1e9;
    std::ostringstream s;
    s << got << " images, mean |d_true - midpoint| " << mean_mid << " (|d_true - d_pred| " << mean_pred
      << "), gate <= 15";
    report(6, got == 50 && unsound == 0 && mean_mid <= 15.0, s.str(),
           {{"images", got}, {"attempts", attempts}, {"unsound", unsound}, {"mean_band_mid_err", mean_mid},
            {"mean_pred_err", mean_pred}, {"seconds", seconds(t0)}});
}

void criterion_7(const IntBnnModel& m) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::vector<Interval> bands{half_open(50, 60), half_open(60, 70), half_open(70, 80), half_open(80, 90)};
    const std::size_t per_band = 10;
    SolveOptions opt;
    opt.backend = Backend::external;
    opt.timeout_s = default_timeout_s;
    json tally = json::array();
    std::size_t total = 0, solved = 0, unverified = 0, errors = 0, late = 0;
    std::string error_text;
    for (const auto& band : bands) {
        std::size_t s = 0, u = 0, to = 0, lt = 0;
        for (std::size_t k = 0; k < per_band; ++k) {
            ++total;
            json rec{{"criterion", 7}, {"band", band_name(band)}, {"k", k}};
            try {
                auto a = attempt(m, 2, band, mix_seed(7007 + std::uint64_t(band.lo), k), opt);
                rec["status"] = to_string(a.out.status);
                rec["wall_s"] = a.out.wall_seconds;
                if (a.out.status == SolveStatus::internal_error) ++unverified;
                if (a.out.status == SolveStatus::sat) {
                    Image img;
                    std::string why;
                    if (!sound_answer(a.f, a.plan, m, a.out, &img, &why)) ++unverified, rec["unsound"] = why;
                    else if (a.out.wall_seconds > opt.timeout_s) ++lt, rec["late"] = true;  // verified but over budget
                    else ++s;
                }
                if (a.out.status == SolveStatus::unsat) ++u;
                if (a.out.status == SolveStatus::timeout) ++to;
            } catch (const Error& e) {
                ++errors;
                if (error_text.empty()) error_text = e.what();
                rec["status"] = "error";
                rec["detail"] = e.what();
            }
            log_line(rec);
        }
        solved += s;
        late += lt;
        tally.push_back({{"band", band_name(band)}, {"total", per_band}, {"solved", s}, {"unsat", u}, {"timeout", to},
                         {"late", lt}});
        std::cout << "  " << std::left << std::setw(10) << band_name(band) << " solved " << s << '/' << per_band
                  << "  unsat " << u << "  timeout " << to << "  late " << lt << std::endl;
    }
    const double rate = double(solved) / double(total);
    std::ostringstream s;
    s << "external backend solved " << solved << '/' << total << " (" << 100.0 * rate << "%), " << unverified
      << " unverified answers, gate >= 80%";
    if (late) s << "; " << late << " verified answers arrived after the timeout and are not counted";
    if (errors) s << "; " << errors << " backend errors: " << error_text;
    report(7, rate >= 0.8 && unverified == 0 && errors == 0, s.str(),
           {{"tally", tally}, {"solved", solved}, {"total", total}, {"rate", rate}, {"unverified", unverified},
            {"late", late}, {"errors", errors}, {"seconds", seconds(t0)}});
}

// ------------------------------------------------------------------ 8

void criterion_8() {
    const auto t0 = std::chrono::steady_clock::now();
    Rng rng(8008);
    std::size_t bad = 0;
    std::string first;
    for (int k = 0; k < 1000; ++k) {
        const int n = 1 + k % 6;
        PbFormula f;
        for (int v = 0; v < n; ++v) f.add_var("x" + std::to_string(v));
        f.add(testing::random_pb_constraint(n, k % 4, rng));
        opb_round_trip(f);
        std::string why;
        CnfOptions opt;
        opt.share_counters = k % 2 == 0;
        if (!testing::cnf_agrees(f, opt, &why)) {
            if (bad++ == 0) first = "constraint " + std::to_string(k) + ": " + why;
        }
    }
    std::ostringstream s;
    s << "1000 random constraints, " << bad << " translation disagreements; OPB round trip " << g_opb.checked
      << " formulas, " << g_opb.failed << " mismatches";
    if (!first.empty()) s << "; first: " << first;
    report(8, bad == 0 && g_opb.failed == 0, s.str(),
           {{"disagreements", bad}, {"opb_checked", g_opb.checked}, {"opb_failed", g_opb.failed},
            {"seconds", seconds(t0)}});
}

} // namespace

int main(int argc, char** argv) {
    std::set<int> only;
    for (int k = 1; k < argc; ++k) {
        if (!std::strcmp(argv[k], "--log") && k + 1 < argc) {
            g_log.open(argv[++k]);
        } else if (!std::strcmp(argv[k], "--only") && k + 1 < argc) {
            std::stringstream ss(argv[++k]);
            for (std::string tok; std::getline(ss, tok, ',');) only.insert(std::stoi(tok));
        } else {
            std::cerr << "usage: acceptance [--log FILE] [--only 1,2,...]\n";
            return 2;
        }
    }
    auto want = [&](int n) { return only.empty() || only.count(n); };
    try {
        if (want(1)) criterion_1();
        if (want(2)) criterion_2();
        if (want(4)) criterion_4();
        if (want(3) || want(5) || want(6) || want(7)) {
            const auto m = criterion_5();
            if (want(3)) criterion_3(m);
            if (want(6)) criterion_6(m);
            if (want(7)) criterion_7(m);
        }
        if (want(8)) criterion_8();
    } catch (const std::exception& e) {
        std::cout << "FAIL criterion run aborted: " << e.what() << std::endl;
        return 1;
    }
    return g_all_pass ? 0 : 1;
}
