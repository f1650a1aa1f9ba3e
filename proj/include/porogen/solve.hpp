#pragma once

// Solving formulas and turning models back into images.
//
// Two backends: the embedded CDCL solver on the CNF translation, and an
// external PB/ILP solver run on an OPB file. Every sat answer is re-checked
// against the original formula before it is returned; an answer that fails
// the check comes back as internal_error.

#include <atomic>
#include <chrono>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "porogen/cnf.hpp"
#include "porogen/encode.hpp"
#include "porogen/error.hpp"
#include "porogen/external.hpp"
#include "porogen/grid.hpp"
#include "porogen/opb.hpp"
#include "porogen/pb.hpp"
#include "porogen/sat.hpp"

namespace porogen {

enum class SolveStatus { sat, unsat, timeout, internal_error };
enum class Backend { embedded, external };

inline const char* to_string(SolveStatus s) {
    switch (s) {
    case SolveStatus::sat: return "sat";
    case SolveStatus::unsat: return "unsat";
    case SolveStatus::timeout: return "timeout";
    case SolveStatus::internal_error: return "internal_error";
    }
    return "?";
}
inline const char* to_string(Backend b) { return b == Backend::embedded ? "embedded" : "external"; }

inline Backend parse_backend(const std::string& s) {
    if (s == "embedded" || s == "sat") return Backend::embedded;
    if (s == "external" || s == "pb") return Backend::external;
    fail(ErrorKind::invalid_input, "unknown backend '" + s + "' (expected embedded or external)");
}

inline constexpr double default_timeout_s = 600.0;

struct SolveOptions {
    Backend backend = Backend::embedded;
    std::uint64_t seed = 0;
    double timeout_s = default_timeout_s;
    std::string external_command;  // empty: environment variable or bundled wrapper
    CnfOptions cnf;
};

struct SolveOutcome {
    SolveStatus status = SolveStatus::internal_error;
    Assignment assignment;  // set when sat
    double wall_seconds = 0.0;
    std::string backend;
    std::uint64_t seed = 0;
    std::string detail;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

/// Loads a CNF into a solver; false when the clause set is trivially unsat.
inline bool load(sat::Solver& s, const Cnf& cnf) {
    while (s.num_vars() < cnf.num_vars) s.new_var();
    std::vector<sat::Lit> buf;
    for (const auto& c : cnf.clauses) {
        buf.clear();
        for (int l : c) buf.push_back(sat::Lit::make(std::abs(l) - 1, l < 0));
        if (!s.add_clause(buf)) return false;
    }
    return true;
}

inline void verify_into(const PbFormula& f, SolveOutcome& out) {
    if (out.status != SolveStatus::sat) return;
    if (auto bad = f.first_violation(out.assignment)) {
        out.status = SolveStatus::internal_error;
        out.detail = "verifier rejected backend answer at constraint " + std::to_string(*bad);
        out.assignment.clear();
    }
}

inline std::filesystem::path scratch_path(const std::string& stem) {
    static std::atomic<unsigned> counter{0};
    return std::filesystem::temp_directory_path() /
           ("porogen_" + std::to_string(::getpid()) + "_" + std::to_string(counter++) + "_" + stem);
}

} // namespace detail

/// Embedded solver that stays alive across calls, so blocking clauses can be
/// added between solutions.
class EmbeddedSession {
public:
    EmbeddedSession(const PbFormula& f, const SolveOptions& opt)
        : formula_(&f), opt_(opt), solver_(opt.seed) {
        const PbFormula lin = f.is_linear() ? f : f.linearized();
        cnf_ = pb_to_cnf(lin, opt.cnf, &stats_);
        ok_ = detail::load(solver_, cnf_);
    }

    SolveOutcome next() {
        const auto t0 = std::chrono::steady_clock::now();
        SolveOutcome out;
        out.backend = to_string(Backend::embedded);
        out.seed = opt_.seed;
        if (!ok_) {
            out.status = SolveStatus::unsat;
        } else {
            solver_.set_deadline(t0 + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                          std::chrono::duration<double>(opt_.timeout_s)));
            switch (solver_.solve()) {
            case sat::Result::sat:
                out.status = SolveStatus::sat;
                out.assignment.resize(formula_->num_vars());
                for (std::size_t v = 0; v < out.assignment.size(); ++v)
                    out.assignment[v] = solver_.model_value(static_cast<int>(v)) ? 1 : 0;
                break;
            case sat::Result::unsat: out.status = SolveStatus::unsat; break;
            case sat::Result::unknown: out.status = SolveStatus::timeout; break;
            }
        }
        detail::verify_into(*formula_, out);
        out.wall_seconds = detail::seconds_since(t0);
        return out;
    }

    /// Excludes every model that agrees with a on the given variables.
    void block(const Assignment& a, const std::vector<Var>& vars) {
        std::vector<sat::Lit> c;
        for (Var v : vars) c.push_back(sat::Lit::make(v, a.at(std::size_t(v)) != 0));
        if (!solver_.add_clause(c)) ok_ = false;
    }

    const CnfStats& cnf_stats() const { return stats_; }
    const Cnf& cnf() const { return cnf_; }
    const sat::Stats& sat_stats() const { return solver_.stats(); }

private:
    const PbFormula* formula_;
    SolveOptions opt_;
    sat::Solver solver_;
    Cnf cnf_;
    CnfStats stats_;
    bool ok_ = true;
};

inline SolveOutcome solve_external(const PbFormula& f, const SolveOptions& opt) {
    const auto t0 = std::chrono::steady_clock::now();
    SolveOutcome out;
    out.backend = to_string(Backend::external);
    out.seed = opt.seed;

    const auto opb = detail::scratch_path("f.opb");
    const auto log = detail::scratch_path("out.txt");
    {
        std::ofstream os(opb);
        if (!os) fail(ErrorKind::io, "cannot write " + opb.string());
        write_opb(os, f);
    }
    std::string cmd = opt.external_command.empty() ? default_solver_command() : opt.external_command;
    cmd = substitute(cmd, "{file}", shell_quote(opb.string()));
    cmd = substitute(cmd, "{seed}", std::to_string(opt.seed % 2147483647u));
    std::ostringstream limit;
    limit << opt.timeout_s;
    cmd = substitute(cmd, "{timeout}", limit.str());

    // Grace period for interpreter start-up and answer printing.
    const ProcessResult pr = run_command(cmd, opt.timeout_s + 5.0, log);
    std::error_code ec;
    std::filesystem::remove(opb, ec);
    std::filesystem::remove(log, ec);

    if (pr.timed_out) {
        out.status = SolveStatus::timeout;
    } else {
        std::istringstream is(pr.output);
        const ExternalAnswer ans = parse_solver_output(is, f.num_vars());
        switch (ans.status) {
        case ExternalStatus::sat:
            out.status = SolveStatus::sat;
            out.assignment = ans.assignment;
            break;
        case ExternalStatus::unsat: out.status = SolveStatus::unsat; break;
        case ExternalStatus::unknown: out.status = SolveStatus::timeout; break;
        case ExternalStatus::error:
            fail(ErrorKind::backend, "external solver failed (exit " + std::to_string(pr.exit_code) +
                                         "): " + (ans.detail.empty() ? pr.output.substr(0, 400) : ans.detail));
        }
    }
    detail::verify_into(f, out);
    out.wall_seconds = detail::seconds_since(t0);
    return out;
}

inline SolveOutcome solve(const PbFormula& f, const SolveOptions& opt = {}) {
    require(opt.timeout_s > 0, "solve: timeout must be positive");
    if (opt.backend == Backend::external) return solve_external(f, opt);
    const auto t0 = std::chrono::steady_clock::now();
    EmbeddedSession s(f, opt);
    SolveOutcome out = s.next();
    out.wall_seconds = detail::seconds_since(t0);
    return out;
}

/// Pixel variables when the formula has them, else every variable.
inline std::vector<Var> image_vars(const PbFormula& f) {
    std::vector<Var> vars;
    if (f.meta.has_pixels) {
        for (int k = 0; k < f.meta.t * f.meta.t; ++k) vars.push_back(f.meta.pixel_base + k);
    } else {
        for (std::size_t v = 0; v < f.num_vars(); ++v) vars.push_back(static_cast<Var>(v));
    }
    return vars;
}

/// Up to `count` solutions with pairwise distinct images, each blocked after
/// it is found. Stops early on unsat or timeout (the last outcome says which).
inline std::vector<SolveOutcome> solve_distinct(const PbFormula& f, std::size_t count, const SolveOptions& opt = {}) {
    require(opt.backend == Backend::embedded, "solve_distinct: enumeration needs the embedded backend");
    EmbeddedSession s(f, opt);
    const auto vars = image_vars(f);
    std::vector<SolveOutcome> out;
    while (out.size() < count) {
        out.push_back(s.next());
        if (out.back().status != SolveStatus::sat) break;
        s.block(out.back().assignment, vars);
    }
    return out;
}

struct Decoded {
    Image image;
    GrainLabels labels;
};

/// Reads the image and grain labeling out of a model of an encoded formula.
inline Decoded decode_image(const Assignment& a, const FormulaMeta& m) {
    require(m.has_cells, "decode_image: formula has no cell variables");
    const int t = m.t, w = m.w;
    Decoded d{Image(t), GrainLabels(std::size_t(t) * t, 0)};
    for (int i = 1; i <= t; ++i)
        for (int j = 1; j <= t; ++j) {
            const Cell c{i, j};
            int chosen = 0, hits = 0;
            for (int r = 1; r <= w + 1; ++r)
                if (a.at(std::size_t(cell_var(m, c, r)))) chosen = r, ++hits;
            if (hits != 1)
                fail(ErrorKind::internal, "decode_image: cell " + to_string(c) + " has " + std::to_string(hits) +
                                              " regions");
            const bool grain = chosen <= w;
            d.labels[linear(c, t)] = grain ? chosen : 0;
            d.image.set(c, grain ? 1 : 0);
            if (m.has_pixels && (a.at(std::size_t(pixel_var(m, c))) != 0) != grain)
                fail(ErrorKind::internal, "decode_image: pixel variable disagrees with cell " + to_string(c));
        }
    return d;
}

} // namespace porogen
