// porogen: dataset generation, surrogate training and constrained generation
// of 2-D porous media.
//
// Exit codes: 0 ok, 1 other failure, 2 usage, 3 nothing solved (unsat),
// 4 nothing solved (timeouts), 5 verifier rejected a solver answer.
// Failures print one line to stderr: error: kind=<kind> message="<text>"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "porogen/porogen.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace porogen;

namespace {

enum Exit { ok = 0, failure = 1, usage = 2, all_unsat = 3, all_timeout = 4, verifier = 5 };

void error_line(const std::string& kind, const std::string& msg) {
    std::cerr << "error: kind=" << kind << " message=" << json(msg).dump() << std::endl;
}

IntBnnModel load_model(const fs::path& p) {
    std::ifstream is(p);
    if (!is) fail(ErrorKind::io, "cannot open model " + p.string());
    return read_model(is);
}

std::vector<Interval> bands_from(bool all, int lo, int hi) {
    if (all) return label_bands();
    require(lo < hi || (lo == hi && hi == max_label), "--lo must be below --hi");
    return {half_open(lo, hi, max_label)};
}

std::string band_name(const Interval& b) {
    std::ostringstream os;
    if (b.hi == max_label) os << '[' << b.lo << ',' << b.hi << ']';
    else os << '[' << b.lo << ',' << b.hi + 1 << ')';
    return os.str();
}

// ------------------------------------------------------------------ dataset

struct DatasetArgs {
    std::size_t count = 2000;
    int size = 16, grains = 2;
    std::uint64_t seed = 1;
    double fill = 0.45;
    std::string out;
};

int run_dataset(const DatasetArgs& a) {
    GrowthConfig cfg;
    cfg.max_fill = a.fill;
    DatasetStats st;
    auto recs = build_dataset(a.count, a.size, a.grains, a.seed, &st, cfg);
    write_dataset(a.out, recs, a.grains);
    json hist = json::object();
    for (std::size_t k = 4; k < st.histogram.size(); ++k) hist[std::to_string(10 * k)] = st.histogram[k];
    std::cout << json{{"samples", recs.size()}, {"raw", st.raw}, {"below_range", st.below_range},
                      {"histogram", hist}, {"out", a.out}}
                     .dump()
              << std::endl;
    return ok;
}

// ------------------------------------------------------------------ train / eval

struct TrainArgs {
    std::string dataset, out_model;
    int blocks = 2, width = 32, epochs = 60, batch = 64;
    double lr = 0.01, holdout = 0.1;
    std::uint64_t seed = 1;
};

int run_train(const TrainArgs& a) {
    auto data = read_dataset(a.dataset);
    require(a.holdout >= 0.0 && a.holdout < 1.0, "--holdout must be in [0,1)");
    Rng rng(a.seed);
    std::shuffle(data.begin(), data.end(), rng);
    const std::size_t n_hold = std::size_t(a.holdout * double(data.size()));
    std::vector<LabeledSample> held(data.end() - std::ptrdiff_t(n_hold), data.end());
    data.resize(data.size() - n_hold);
    require(!data.empty(), "training split is empty");

    TrainConfig cfg;
    cfg.widths.assign(std::size_t(a.blocks), a.width);
    cfg.epochs = a.epochs;
    cfg.learning_rate = a.lr;
    cfg.batch_size = a.batch;
    auto res = train(data, cfg, rng, [](int epoch, double mae) {
        std::cout << json{{"epoch", epoch}, {"train_mae", mae}}.dump() << std::endl;
    });
    const auto m = fold_thresholds(res.model);
    std::ofstream os(a.out_model);
    if (!os) fail(ErrorKind::io, "cannot write " + a.out_model);
    write_model(os, m);
    json summary{{"model", a.out_model}, {"train_samples", data.size()}, {"train_mae", eval_mae(m, data)}};
    if (!held.empty()) summary["holdout_samples"] = held.size(), summary["holdout_mae"] = eval_mae(m, held);
    std::cout << summary.dump() << std::endl;
    return ok;
}

int run_eval(const std::string& model, const std::string& dataset) {
    const auto m = load_model(model);
    const auto data = read_dataset(dataset);
    std::cout << json{{"mae", eval_mae(m, data)}, {"samples", data.size()}}.dump() << std::endl;
    return ok;
}

// ------------------------------------------------------------------ generate / encode

struct GenArgs {
    std::string model, out, backend = "embedded", solver_cmd;
    int grains = 2, lo = 60, hi = 70, slack_min = 1, slack_max = 3, jobs = 1;
    bool all_bands = false, two_sided = false, no_compactness = false;
    std::string dag = "manhattan";
    std::size_t count = 10;
    std::uint64_t seed = 1;
    double timeout = default_timeout_s;
};

InstanceOptions instance_options(const GenArgs& a) {
    InstanceOptions o;
    o.slack = {a.slack_min, a.slack_max};
    o.grain_dag = o.void_dag = parse_dag_mode(a.dag);
    o.all_sides_boundary = !a.two_sided;
    o.compactness = !a.no_compactness;
    return o;
}

struct InstanceResult {
    std::size_t band = 0, index = 0;
    std::uint64_t seed = 0;
    std::string status;
    double wall = 0.0;
    json record;
};

// Solves one instance and writes its image; every sat answer is re-checked
// against the validator and the network before it counts.
InstanceResult run_instance(const GenArgs& a, const IntBnnModel& m, const Interval& band, std::size_t b,
                            std::size_t k) {
    InstanceResult r;
    r.band = b;
    r.index = k;
    r.seed = mix_seed(mix_seed(a.seed, std::uint64_t(band.lo)), k);
    json rec{{"band", band_name(band)}, {"lo", band.lo}, {"hi", band.hi}, {"index", k}, {"seed", r.seed}};
    try {
        Rng rng(r.seed);
        const auto plan = plan_instance(m.t, a.grains, instance_options(a), rng);
        const auto f = encode_instance(plan, m, band);
        SolveOptions opt;
        opt.backend = parse_backend(a.backend);
        opt.seed = r.seed;
        opt.timeout_s = a.timeout;
        opt.external_command = a.solver_cmd;
        const auto out = solve(f, opt);
        r.status = to_string(out.status);
        r.wall = out.wall_seconds;
        rec["wall_s"] = out.wall_seconds;
        rec["backend"] = out.backend;
        rec["slack"] = plan.seeds.slack;
        json centers = json::array();
        for (Cell c : plan.seeds.seeds) centers.push_back({c.i, c.j});
        rec["centers"] = centers;
        if (!out.detail.empty()) rec["detail"] = out.detail;
        if (out.status == SolveStatus::sat) {
            const auto d = decode_image(out.assignment, f.meta);
            const auto pred = forward(m, d.image);
            std::vector<RingSet> rings = plan.rings;
            const auto rep = validate_geometry(d.image, a.grains, &d.labels,
                                               plan.options.compactness
                                                   ? std::optional<CompactnessCheck>(CompactnessCheck{rings, plan.seeds.slack})
                                                   : std::nullopt);
            if (!rep.all_ok(a.grains) || pred != f.output_value(out.assignment) || pred < band.lo || pred > band.hi) {
                r.status = to_string(SolveStatus::internal_error);
                rec["detail"] = "decoded image failed re-validation";
            } else {
                std::ostringstream name;
                name << "b" << band.lo << "_" << std::setw(4) << std::setfill('0') << k << ".pbm";
                const fs::path img_path = fs::path(a.out) / "images" / name.str();
                save_pbm(img_path, d.image);
                Sidecar sc;
                sc.t = m.t;
                sc.w = a.grains;
                sc.seed = r.seed;
                sc.d_pred = long(pred);
                sc.extra = {{"lo", band.lo}, {"hi", band.hi}, {"slack", plan.seeds.slack}, {"centers", centers},
                            {"labels", d.labels}, {"compactness", plan.options.compactness}};
                save_sidecar(sidecar_path(img_path), sc);
                rec["image"] = fs::relative(img_path, a.out).string();
                rec["d_pred"] = pred;
            }
        }
    } catch (const Error& e) {
        r.status = "error";
        rec["detail"] = std::string(to_string(e.kind())) + ": " + e.what();
        rec["error_kind"] = to_string(e.kind());
    }
    rec["status"] = r.status;
    r.record = std::move(rec);
    return r;
}

int run_generate(const GenArgs& a) {
    const auto m = load_model(a.model);
    require(a.count >= 1, "--count must be positive");
    require(a.jobs >= 1, "--jobs must be positive");
    const auto bands = bands_from(a.all_bands, a.lo, a.hi);
    parse_backend(a.backend);
    fs::create_directories(fs::path(a.out) / "images");

    struct Job {
        std::size_t band, index;
    };
    std::vector<Job> jobs;
    for (std::size_t b = 0; b < bands.size(); ++b)
        for (std::size_t k = 0; k < a.count; ++k) jobs.push_back({b, k});
    std::vector<InstanceResult> results(jobs.size());
    std::ofstream log(fs::path(a.out) / "generate.jsonl");
    std::mutex log_mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
            results[j] = run_instance(a, m, bands[jobs[j].band], jobs[j].band, jobs[j].index);
            std::lock_guard lock(log_mu);
            log << results[j].record.dump() << '\n' << std::flush;
            std::cerr << results[j].record.dump() << std::endl;
        }
    };
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(a.jobs, int(jobs.size())); ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    // Tally per interval, in the shape of the solved-instances table.
    std::ofstream tally(fs::path(a.out) / "tally.jsonl");
    std::size_t sat = 0, unsat = 0, timeout = 0, internal = 0, errors = 0;
    std::cout << std::left << std::setw(12) << "interval" << std::right << std::setw(8) << "solved" << std::setw(8)
              << "unsat" << std::setw(9) << "timeout" << std::setw(8) << "error" << std::setw(10) << "mean_s"
              << '\n';
    for (std::size_t b = 0; b < bands.size(); ++b) {
        std::size_t s = 0, u = 0, to = 0, ie = 0, er = 0;
        double wall = 0.0;
        for (const auto& r : results) {
            if (r.band != b) continue;
            wall += r.wall;
            if (r.status == "sat") ++s;
            else if (r.status == "unsat") ++u;
            else if (r.status == "timeout") ++to;
            else if (r.status == "internal_error") ++ie;
            else ++er;
        }
        sat += s, unsat += u, timeout += to, internal += ie, errors += er;
        std::cout << std::left << std::setw(12) << band_name(bands[b]) << std::right << std::setw(8) << s
                  << std::setw(8) << u << std::setw(9) << to << std::setw(8) << (ie + er) << std::setw(10)
                  << std::fixed << std::setprecision(2) << wall / double(a.count) << '\n';
        tally << json{{"band", band_name(bands[b])}, {"lo", bands[b].lo}, {"hi", bands[b].hi}, {"total", a.count},
                      {"solved", s}, {"unsat", u}, {"timeout", to}, {"internal_error", ie}, {"error", er},
                      {"mean_wall_s", wall / double(a.count)}}
                     .dump()
              << '\n';
    }
    std::cout.flush();
    if (internal > 0) {
        error_line("internal", std::to_string(internal) + " solver answer(s) failed verification");
        return verifier;
    }
    if (errors > 0) {
        for (const auto& r : results)
            if (r.status == "error") {
                error_line(r.record.value("error_kind", "unknown"), r.record.value("detail", ""));
                break;
            }
        return failure;
    }
    if (sat == 0) return timeout > 0 && unsat == 0 ? all_timeout : all_unsat;
    return ok;
}

int run_encode(const GenArgs& a, const std::string& opb_out, const std::string& cnf_out) {
    const auto m = load_model(a.model);
    const auto band = bands_from(false, a.lo, a.hi).front();
    Rng rng(mix_seed(mix_seed(a.seed, std::uint64_t(band.lo)), 0));
    const auto plan = plan_instance(m.t, a.grains, instance_options(a), rng);
    const auto f = encode_instance(plan, m, band);
    json out{{"vars", f.num_vars()}, {"constraints", f.constraints().size()}, {"reified", f.reified().size()},
             {"lo", band.lo}, {"hi", band.hi}, {"slack", plan.seeds.slack}};
    if (!opb_out.empty()) {
        save_opb(opb_out, f);
        out["opb"] = opb_out;
    }
    if (!cnf_out.empty()) {
        CnfStats st;
        const auto cnf = pb_to_cnf(f.linearized(), {}, &st);
        std::ofstream os(cnf_out);
        if (!os) fail(ErrorKind::io, "cannot write " + cnf_out);
        write_dimacs(os, cnf);
        out["cnf"] = cnf_out;
        out["cnf_vars"] = cnf.num_vars;
        out["cnf_clauses"] = cnf.clauses.size();
    }
    std::cout << out.dump() << std::endl;
    return ok;
}

// ------------------------------------------------------------------ verify

std::vector<fs::path> expand_images(const std::vector<std::string>& args) {
    std::vector<fs::path> out;
    for (const auto& s : args) {
        if (fs::is_directory(s)) {
            std::vector<fs::path> found;
            for (const auto& e : fs::recursive_directory_iterator(s))
                if (e.path().extension() == ".pbm") found.push_back(e.path());
            std::sort(found.begin(), found.end());
            out.insert(out.end(), found.begin(), found.end());
        } else {
            out.emplace_back(s);
        }
    }
    if (out.empty()) fail(ErrorKind::invalid_input, "no images given");
    return out;
}

void write_svg(const fs::path& p, const std::vector<std::pair<double, double>>& pts) {
    std::ofstream os(p);
    if (!os) fail(ErrorKind::io, "cannot write " + p.string());
    // Prediction on x, PDE value on y, both on [30, 100].
    const double lo = 30, hi = 100, size = 400, pad = 40;
    auto X = [&](double v) { return pad + (v - lo) / (hi - lo) * size; };
    auto Y = [&](double v) { return pad + size - (v - lo) / (hi - lo) * size; };
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad
       << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
    os << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size << "\" height=\"" << size
       << "\" fill=\"none\" stroke=\"#444\"/>\n";
    os << "<line x1=\"" << X(lo) << "\" y1=\"" << Y(lo) << "\" x2=\"" << X(hi) << "\" y2=\"" << Y(hi)
       << "\" stroke=\"#aaa\" stroke-dasharray=\"4 3\"/>\n";
    for (int v = 40; v <= 100; v += 10)
        os << "<text x=\"" << X(v) - 6 << "\" y=\"" << pad + size + 15 << "\">" << v << "</text><text x=\""
           << pad - 22 << "\" y=\"" << Y(v) + 4 << "\">" << v << "</text>\n";
    for (auto [x, y] : pts)
        os << "<circle cx=\"" << X(std::clamp(x, lo, hi)) << "\" cy=\"" << Y(std::clamp(y, lo, hi))
           << "\" r=\"3\" fill=\"#1f6fb4\" fill-opacity=\"0.7\"/>\n";
    os << "<text x=\"" << pad + size / 2 - 40 << "\" y=\"" << pad + size + 32 << "\">surrogate d</text>\n";
    os << "<text x=\"8\" y=\"" << pad - 12 << "\">PDE d</text>\n</svg>\n";
}

int run_verify(const std::vector<std::string>& images, const std::string& svg, const std::string& log_path) {
    std::vector<std::pair<double, double>> pts;
    double err_sum = 0.0, mid_sum = 0.0;
    std::size_t with_pred = 0, with_band = 0, invalid = 0;
    std::ofstream log;
    if (!log_path.empty()) log.open(log_path);
    const auto paths = expand_images(images);
    for (const auto& p : paths) {
        const Image img = load_pbm(p);
        const auto pde = dispersion_x(img);
        json rec{{"image", p.string()}, {"d_real", pde.d_real}, {"d_int", pde.d_int}};
        if (auto sc = load_sidecar(sidecar_path(p))) {
            const auto& x = sc->extra;
            GrainLabels labels;
            if (x.contains("labels")) labels = x["labels"].get<GrainLabels>();
            std::vector<RingSet> rings;
            if (x.value("compactness", false) && x.contains("centers"))
                for (const auto& c : x["centers"]) rings.push_back(build_rings(img.side(), {c[0].get<int>(), c[1].get<int>()}));
            std::optional<CompactnessCheck> cc;
            if (!rings.empty()) cc = CompactnessCheck{rings, x.value("slack", 1)};
            const auto rep = validate_geometry(img, sc->w, labels.empty() ? nullptr : &labels, cc);
            rec["valid"] = rep.all_ok(sc->w);
            rec["grain_count"] = rep.grain_count;
            if (!rep.all_ok(sc->w)) ++invalid;
            const double d_true = 100.0 * pde.d_real;
            if (sc->d_pred) {
                rec["d_pred"] = *sc->d_pred;
                rec["abs_err"] = std::fabs(d_true - double(*sc->d_pred));
                err_sum += std::fabs(d_true - double(*sc->d_pred));
                ++with_pred;
                pts.emplace_back(double(*sc->d_pred), d_true);
            }
            if (x.contains("lo") && x.contains("hi")) {
                // Half-open bands except the closed top one.
                const double lo = x["lo"].get<double>(), hi = x["hi"].get<double>();
                const double mid = 0.5 * (lo + (hi >= max_label ? hi : hi + 1.0));
                rec["band_mid_err"] = std::fabs(d_true - mid);
                mid_sum += std::fabs(d_true - mid);
                ++with_band;
            }
        }
        std::cout << rec.dump() << '\n';
        if (log) log << rec.dump() << '\n';
    }
    json summary{{"images", paths.size()}, {"invalid", invalid}};
    if (with_pred) summary["mean_abs_err"] = err_sum / double(with_pred);
    if (with_band) summary["mean_band_mid_err"] = mid_sum / double(with_band);
    std::cout << summary.dump() << std::endl;
    if (!svg.empty()) write_svg(svg, pts);
    if (invalid > 0) {
        error_line("invalid_input", std::to_string(invalid) + " image(s) failed geometric validation");
        return failure;
    }
    return ok;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained generation of 2-D porous media with a binarized surrogate"};
    app.require_subcommand(1);

    DatasetArgs ds;
    auto* c_ds = app.add_subcommand("dataset", "Generate a labeled dataset of random media");
    c_ds->add_option("--count", ds.count, "Number of samples")->capture_default_str();
    c_ds->add_option("--size", ds.size, "Image side length t")->capture_default_str();
    c_ds->add_option("--grains", ds.grains, "Grains per image")->capture_default_str();
    c_ds->add_option("--seed", ds.seed, "Random seed")->capture_default_str();
    c_ds->add_option("--fill", ds.fill, "Maximum grain fill of the interior")->capture_default_str();
    c_ds->add_option("--out", ds.out, "Output directory")->required();

    TrainArgs tr;
    auto* c_tr = app.add_subcommand("train", "Train the binarized surrogate");
    c_tr->add_option("--dataset", tr.dataset, "Dataset directory")->required();
    c_tr->add_option("--blocks", tr.blocks, "Hidden blocks")->capture_default_str();
    c_tr->add_option("--width", tr.width, "Neurons per block")->capture_default_str();
    c_tr->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
    c_tr->add_option("--lr", tr.lr, "Learning rate")->capture_default_str();
    c_tr->add_option("--batch", tr.batch, "Batch size")->capture_default_str();
    c_tr->add_option("--holdout", tr.holdout, "Fraction held out for evaluation")->capture_default_str();
    c_tr->add_option("--seed", tr.seed, "Random seed")->capture_default_str();
    c_tr->add_option("--out-model", tr.out_model, "Model file to write")->required();

    std::string ev_model, ev_data;
    auto* c_ev = app.add_subcommand("eval", "Mean absolute error of a model on a dataset");
    c_ev->add_option("--model", ev_model)->required();
    c_ev->add_option("--dataset", ev_data)->required();

    GenArgs gen;
    auto add_instance_opts = [](CLI::App* c, GenArgs& g) {
        c->add_option("--model", g.model, "Model file")->required();
        c->add_option("--grains", g.grains, "Grains per image")->capture_default_str();
        c->add_option("--lo", g.lo, "Interval lower end (inclusive)")->capture_default_str();
        c->add_option("--hi", g.hi, "Interval upper end (exclusive below 100)")->capture_default_str();
        c->add_option("--seed", g.seed, "Random seed")->capture_default_str();
        c->add_option("--slack-min", g.slack_min)->capture_default_str();
        c->add_option("--slack-max", g.slack_max)->capture_default_str();
        c->add_option("--dag", g.dag, "manhattan or randomized")->capture_default_str();
        c->add_flag("--two-sided", g.two_sided, "Force void only on row t and column t");
        c->add_flag("--no-compactness", g.no_compactness, "Drop the ring constraints");
    };
    auto* c_gen = app.add_subcommand("generate", "Generate media whose predicted coefficient lies in an interval");
    add_instance_opts(c_gen, gen);
    c_gen->add_option("--count", gen.count, "Instances per interval")->capture_default_str();
    c_gen->add_option("--timeout", gen.timeout, "Seconds per instance")->capture_default_str();
    c_gen->add_option("--backend", gen.backend, "embedded or external")->capture_default_str();
    c_gen->add_option("--solver-cmd", gen.solver_cmd,
                      std::string("External solver command; defaults to $") + solver_env_var);
    c_gen->add_option("--jobs", gen.jobs, "Parallel instances")->capture_default_str();
    c_gen->add_flag("--all-bands", gen.all_bands, "Sweep [40,50) ... [90,100]");
    c_gen->add_option("--out", gen.out, "Output directory")->required();

    std::vector<std::string> vf_images;
    std::string vf_svg, vf_log;
    auto* c_vf = app.add_subcommand("verify", "Check images with the PDE oracle and the validator");
    c_vf->add_option("--image", vf_images, "Image files or directories")->required();
    c_vf->add_option("--svg", vf_svg, "Write a prediction-vs-truth scatter plot");
    c_vf->add_option("--log", vf_log, "Write per-image JSON lines");

    GenArgs enc;
    std::string opb_out, cnf_out;
    auto* c_enc = app.add_subcommand("encode", "Export one generation problem");
    add_instance_opts(c_enc, enc);
    c_enc->add_option("--opb-out", opb_out, "OPB file to write");
    c_enc->add_option("--cnf-out", cnf_out, "DIMACS file to write");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);
        error_line("usage", e.what());
        return usage;
    }

    try {
        if (gen.solver_cmd.empty())
            if (const char* env = std::getenv(solver_env_var)) gen.solver_cmd = env;
        if (*c_ds) return run_dataset(ds);
        if (*c_tr) return run_train(tr);
        if (*c_ev) return run_eval(ev_model, ev_data);
        if (*c_gen) return run_generate(gen);
        if (*c_vf) return run_verify(vf_images, vf_svg, vf_log);
        if (*c_enc) return run_encode(enc, opb_out, cnf_out);
    } catch (const Error& e) {
        error_line(to_string(e.kind()), e.what());
        if (e.kind() == ErrorKind::invalid_input) return usage;
        if (e.kind() == ErrorKind::internal) return verifier;
        return failure;
    } catch (const std::exception& e) {
        error_line("unknown", e.what());
        return failure;
    }
    return usage;
}
