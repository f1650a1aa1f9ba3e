#pragma once

// A compact CDCL SAT solver: two watched literals with blockers, first-UIP
// learning with recursive minimization, VSIDS, phase saving, Luby restarts,
// LBD-based clause database reduction, and solving under assumptions.
// The seed randomizes initial phases and activities, which is how callers
// obtain different models of the same formula.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstring>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace porogen::sat {

struct Lit {
    std::uint32_t x = 0;

    static Lit make(int var, bool negated = false) { return Lit{std::uint32_t(var) * 2u + (negated ? 1u : 0u)}; }
    int var() const { return static_cast<int>(x >> 1); }
    bool negated() const { return x & 1u; }
    Lit operator~() const { return Lit{x ^ 1u}; }
    friend bool operator==(Lit a, Lit b) { return a.x == b.x; }
    friend bool operator!=(Lit a, Lit b) { return a.x != b.x; }
    friend bool operator<(Lit a, Lit b) { return a.x < b.x; }
};

enum class Result { sat, unsat, unknown };

struct Stats {
    std::uint64_t conflicts = 0, decisions = 0, propagations = 0, restarts = 0, learnts = 0;
};

class Solver {
public:
    using Clock = std::chrono::steady_clock;

    explicit Solver(std::uint64_t seed = 0) : rng_(seed) {}

    int new_var() {
        const int v = num_vars();
        assigns_.push_back(undef);
        level_.push_back(0);
        reason_.push_back(no_reason);
        seen_.push_back(0);
        activity_.push_back(std::uniform_real_distribution<double>(0.0, 1e-5)(rng_));
        phase_.push_back(std::uniform_int_distribution<int>(0, 1)(rng_));
        heap_pos_.push_back(-1);
        watches_.emplace_back();
        watches_.emplace_back();
        heap_insert(v);
        return v;
    }

    int num_vars() const { return static_cast<int>(assigns_.size()); }
    std::size_t num_clauses() const { return num_original_; }
    const Stats& stats() const { return stats_; }
    bool okay() const { return ok_; }

    /// Adds a clause at decision level 0. Returns false once the formula is
    /// known to be unsatisfiable.
    bool add_clause(std::span<const Lit> lits_in) {
        if (!ok_) return false;
        cancel_until(0);
        std::vector<Lit> lits(lits_in.begin(), lits_in.end());
        std::sort(lits.begin(), lits.end());
        std::size_t j = 0;
        Lit prev{~0u};
        for (Lit l : lits) {
            if (value(l) == ltrue || l == ~prev) return true;  // satisfied or tautology
            if (value(l) != lfalse && l != prev) lits[j++] = prev = l;
        }
        lits.resize(j);
        if (lits.empty()) return ok_ = false;
        if (lits.size() == 1) {
            enqueue(lits[0], no_reason);
            if (propagate() != no_reason) ok_ = false;
            return ok_;
        }
        const auto cref = alloc_clause(lits, false);
        attach(cref);
        ++num_original_;
        return true;
    }
    bool add_clause(std::initializer_list<Lit> lits) {
        return add_clause(std::span<const Lit>(lits.begin(), lits.size()));
    }

    void set_deadline(std::optional<Clock::time_point> d) { deadline_ = d; }
    void set_conflict_budget(std::optional<std::uint64_t> b) { budget_ = b; }

    Result solve(std::span<const Lit> assumptions = {}) {
        model_.clear();
        if (!ok_) return Result::unsat;
        assumptions_.assign(assumptions.begin(), assumptions.end());
        max_learnts_ = std::max<double>(num_original_ / 3.0, 2000.0);
        const std::uint64_t start_conflicts = stats_.conflicts;
        Result res = Result::unknown;
        for (int round = 0; res == Result::unknown; ++round) {
            const double budget = luby(2.0, round) * 100.0;
            res = search(static_cast<long>(budget), start_conflicts);
            if (res == Result::unknown && out_of_resources(start_conflicts)) break;
            ++stats_.restarts;
        }
        if (res == Result::sat) {
            model_.resize(num_vars());
            for (int v = 0; v < num_vars(); ++v) model_[v] = assigns_[v] == ltrue;
        }
        cancel_until(0);
        return res;
    }

    /// Value of var in the last model (valid after Result::sat).
    bool model_value(int var) const { return model_.at(std::size_t(var)); }
    const std::vector<bool>& model() const { return model_; }

private:
    using CRef = std::uint32_t;
    static constexpr CRef no_reason = ~CRef(0);
    static constexpr std::uint8_t ltrue = 0, lfalse = 1, undef = 2;
    static constexpr std::uint32_t header = 3;  // size, flags|lbd, activity

    struct Watcher {
        CRef cref;
        Lit blocker;
    };

    // ---- clause arena
    std::uint32_t& csize(CRef c) { return mem_[c]; }
    std::uint32_t csize(CRef c) const { return mem_[c]; }
    bool learnt(CRef c) const { return mem_[c + 1] & 1u; }
    bool deleted(CRef c) const { return mem_[c + 1] & 2u; }
    std::uint32_t lbd(CRef c) const { return mem_[c + 1] >> 2; }
    float& cact(CRef c) { return *reinterpret_cast<float*>(&mem_[c + 2]); }
    Lit* lits(CRef c) { return reinterpret_cast<Lit*>(&mem_[c + header]); }
    const Lit* lits(CRef c) const { return reinterpret_cast<const Lit*>(&mem_[c + header]); }

    CRef alloc_clause(const std::vector<Lit>& ls, bool is_learnt, std::uint32_t lbd_value = 0) {
        const CRef c = static_cast<CRef>(mem_.size());
        mem_.push_back(static_cast<std::uint32_t>(ls.size()));
        mem_.push_back((is_learnt ? 1u : 0u) | (lbd_value << 2));
        mem_.push_back(0);
        for (Lit l : ls) mem_.push_back(l.x);
        if (is_learnt) learnts_.push_back(c);
        return c;
    }

    void attach(CRef c) {
        const Lit* l = lits(c);
        watches_[(~l[0]).x].push_back({c, l[1]});
        watches_[(~l[1]).x].push_back({c, l[0]});
    }

    // ---- assignment
    std::uint8_t value(Lit l) const {
        const std::uint8_t a = assigns_[std::size_t(l.var())];
        return a == undef ? undef : std::uint8_t(a ^ std::uint8_t(l.negated()));
    }
    int decision_level() const { return static_cast<int>(trail_lim_.size()); }

    void enqueue(Lit l, CRef from) {
        const int v = l.var();
        assigns_[v] = l.negated() ? lfalse : ltrue;
        level_[v] = decision_level();
        reason_[v] = from;
        trail_.push_back(l);
    }

    void cancel_until(int lvl) {
        if (decision_level() <= lvl) return;
        for (std::size_t k = trail_.size(); k-- > std::size_t(trail_lim_[lvl]);) {
            const int v = trail_[k].var();
            phase_[v] = trail_[k].negated() ? 0 : 1;
            assigns_[v] = undef;
            reason_[v] = no_reason;
            if (heap_pos_[v] < 0) heap_insert(v);
        }
        trail_.resize(trail_lim_[lvl]);
        trail_lim_.resize(lvl);
        qhead_ = trail_.size();
    }

    CRef propagate() {
        CRef conflict = no_reason;
        while (qhead_ < trail_.size()) {
            const Lit p = trail_[qhead_++];
            const Lit false_lit = ~p;
            auto& ws = watches_[p.x];
            std::size_t i = 0, j = 0;
            const std::size_t n = ws.size();
            ++stats_.propagations;
            while (i < n) {
                const Watcher w = ws[i++];
                if (value(w.blocker) == ltrue) {
                    ws[j++] = w;
                    continue;
                }
                Lit* c = lits(w.cref);
                if (c[0] == false_lit) std::swap(c[0], c[1]);
                const Lit first = c[0];
                const Watcher w2{w.cref, first};
                if (first != w.blocker && value(first) == ltrue) {
                    ws[j++] = w2;
                    continue;
                }
                const std::uint32_t sz = csize(w.cref);
                bool moved = false;
                for (std::uint32_t k = 2; k < sz; ++k) {
                    if (value(c[k]) != lfalse) {
                        std::swap(c[1], c[k]);
                        watches_[(~c[1]).x].push_back(w2);
                        moved = true;
                        break;
                    }
                }
                if (moved) continue;
                ws[j++] = w2;
                if (value(first) == lfalse) {
                    conflict = w.cref;
                    qhead_ = trail_.size();
                    while (i < n) ws[j++] = ws[i++];
                } else {
                    enqueue(first, w.cref);
                }
            }
            ws.resize(j);
            if (conflict != no_reason) break;
        }
        return conflict;
    }

    // ---- conflict analysis
    std::uint32_t abstract_level(int v) const { return 1u << (level_[v] & 31); }

    bool lit_redundant(Lit p, std::uint32_t levels) {
        std::vector<Lit>& stack = analyze_stack_;
        stack.clear();
        stack.push_back(p);
        const std::size_t top = analyze_toclear_.size();
        while (!stack.empty()) {
            const CRef r = reason_[stack.back().var()];
            stack.pop_back();
            const Lit* c = lits(r);
            const std::uint32_t sz = csize(r);
            for (std::uint32_t k = 1; k < sz; ++k) {
                const Lit q = c[k];
                const int v = q.var();
                if (seen_[v] || level_[v] == 0) continue;
                if (reason_[v] != no_reason && (abstract_level(v) & levels)) {
                    seen_[v] = 1;
                    stack.push_back(q);
                    analyze_toclear_.push_back(q);
                } else {
                    for (std::size_t k2 = top; k2 < analyze_toclear_.size(); ++k2)
                        seen_[analyze_toclear_[k2].var()] = 0;
                    analyze_toclear_.resize(top);
                    return false;
                }
            }
        }
        return true;
    }

    void analyze(CRef conflict, std::vector<Lit>& out, int& out_level) {
        int path = 0;
        Lit p{~0u};
        out.clear();
        out.push_back(Lit{});  // slot for the asserting literal
        std::size_t index = trail_.size();
        do {
            if (learnt(conflict)) bump_clause(conflict);
            const Lit* c = lits(conflict);
            const std::uint32_t sz = csize(conflict);
            for (std::uint32_t k = (p.x == ~0u ? 0 : 1); k < sz; ++k) {
                const Lit q = c[k];
                const int v = q.var();
                if (!seen_[v] && level_[v] > 0) {
                    bump_var(v);
                    seen_[v] = 1;
                    if (level_[v] >= decision_level()) ++path;
                    else out.push_back(q);
                }
            }
            while (!seen_[trail_[--index].var()]) {}
            p = trail_[index];
            conflict = reason_[p.var()];
            seen_[p.var()] = 0;
            --path;
        } while (path > 0);
        out[0] = ~p;

        // Recursive minimization.
        analyze_toclear_.assign(out.begin(), out.end());
        std::uint32_t levels = 0;
        for (std::size_t k = 1; k < out.size(); ++k) levels |= abstract_level(out[k].var());
        std::size_t j = 1;
        for (std::size_t k = 1; k < out.size(); ++k)
            if (reason_[out[k].var()] == no_reason || !lit_redundant(out[k], levels)) out[j++] = out[k];
        out.resize(j);

        out_level = 0;
        if (out.size() > 1) {
            std::size_t max_k = 1;
            for (std::size_t k = 2; k < out.size(); ++k)
                if (level_[out[k].var()] > level_[out[max_k].var()]) max_k = k;
            std::swap(out[1], out[max_k]);
            out_level = level_[out[1].var()];
        }
        for (Lit l : analyze_toclear_) seen_[l.var()] = 0;
    }

    std::uint32_t compute_lbd(const std::vector<Lit>& ls) {
        ++lbd_stamp_;
        if (lbd_seen_.size() < std::size_t(decision_level() + 1)) lbd_seen_.resize(decision_level() + 1, 0);
        std::uint32_t n = 0;
        for (Lit l : ls) {
            const int lv = level_[l.var()];
            if (lbd_seen_[lv] != lbd_stamp_) {
                lbd_seen_[lv] = lbd_stamp_;
                ++n;
            }
        }
        return n;
    }

    // ---- VSIDS
    void bump_var(int v) {
        if ((activity_[v] += var_inc_) > 1e100) {
            for (auto& a : activity_) a *= 1e-100;
            var_inc_ *= 1e-100;
        }
        if (heap_pos_[v] >= 0) heap_up(heap_pos_[v]);
    }
    void bump_clause(CRef c) {
        if ((cact(c) += float(cla_inc_)) > 1e20f) {
            for (CRef l : learnts_) cact(l) *= 1e-20f;
            cla_inc_ *= 1e-20;
        }
    }

    bool heap_less(int a, int b) const { return activity_[a] > activity_[b]; }
    void heap_up(int pos) {
        const int v = heap_[pos];
        while (pos > 0) {
            const int parent = (pos - 1) / 2;
            if (!heap_less(v, heap_[parent])) break;
            heap_[pos] = heap_[parent];
            heap_pos_[heap_[pos]] = pos;
            pos = parent;
        }
        heap_[pos] = v;
        heap_pos_[v] = pos;
    }
    void heap_down(int pos) {
        const int v = heap_[pos];
        const int n = static_cast<int>(heap_.size());
        for (;;) {
            int child = 2 * pos + 1;
            if (child >= n) break;
            if (child + 1 < n && heap_less(heap_[child + 1], heap_[child])) ++child;
            if (!heap_less(heap_[child], v)) break;
            heap_[pos] = heap_[child];
            heap_pos_[heap_[pos]] = pos;
            pos = child;
        }
        heap_[pos] = v;
        heap_pos_[v] = pos;
    }
    void heap_insert(int v) {
        heap_pos_[v] = static_cast<int>(heap_.size());
        heap_.push_back(v);
        heap_up(heap_pos_[v]);
    }
    int heap_pop() {
        const int v = heap_.front();
        heap_pos_[v] = -1;
        const int last = heap_.back();
        heap_.pop_back();
        if (!heap_.empty()) {
            heap_[0] = last;
            heap_pos_[last] = 0;
            heap_down(0);
        }
        return v;
    }

    Lit pick_branch() {
        while (!heap_.empty()) {
            const int v = heap_pop();
            if (assigns_[v] == undef) return Lit::make(v, phase_[v] == 0);
        }
        return Lit{~0u};
    }

    // ---- clause database
    bool locked(CRef c) const {
        const Lit l = lits(c)[0];
        return value(l) == ltrue && reason_[l.var()] == c;
    }

    void reduce_db() {
        std::sort(learnts_.begin(), learnts_.end(), [&](CRef a, CRef b) {
            if (lbd(a) != lbd(b)) return lbd(a) > lbd(b);
            return cact(a) < cact(b);
        });
        std::vector<CRef> keep;
        const std::size_t half = learnts_.size() / 2;
        for (std::size_t k = 0; k < learnts_.size(); ++k) {
            const CRef c = learnts_[k];
            if (k < half && lbd(c) > 2 && csize(c) > 2 && !locked(c)) {
                mem_[c + 1] |= 2u;
                wasted_ += header + csize(c);
            } else {
                keep.push_back(c);
            }
        }
        learnts_ = std::move(keep);
        for (auto& ws : watches_)
            std::erase_if(ws, [&](const Watcher& w) { return deleted(w.cref); });
        if (wasted_ * 5 > mem_.size()) collect_garbage();
    }

    void collect_garbage() {
        std::vector<std::uint32_t> fresh;
        fresh.reserve(mem_.size() - wasted_);
        std::vector<CRef> remap_from, remap_to;
        // Walk the arena in order; clause headers are contiguous.
        std::vector<CRef> relocation(0);
        CRef c = 0;
        std::vector<std::pair<CRef, CRef>> moved;
        while (c < mem_.size()) {
            const std::uint32_t len = header + csize(c);
            if (!deleted(c)) {
                moved.emplace_back(c, static_cast<CRef>(fresh.size()));
                fresh.insert(fresh.end(), mem_.begin() + c, mem_.begin() + c + len);
            }
            c += len;
        }
        auto relocate = [&](CRef old) {
            auto it = std::lower_bound(moved.begin(), moved.end(), std::make_pair(old, CRef(0)));
            return it->second;
        };
        for (auto& ws : watches_)
            for (auto& w : ws) w.cref = relocate(w.cref);
        for (int v = 0; v < num_vars(); ++v)
            if (reason_[v] != no_reason && assigns_[v] != undef) reason_[v] = relocate(reason_[v]);
        for (auto& l : learnts_) l = relocate(l);
        mem_ = std::move(fresh);
        wasted_ = 0;
    }

    // ---- search
    static double luby(double y, int x) {
        int size = 1, seq = 0;
        while (size < x + 1) {
            ++seq;
            size = 2 * size + 1;
        }
        while (size - 1 != x) {
            size = (size - 1) >> 1;
            --seq;
            x = x % size;
        }
        double r = 1.0;
        for (int k = 0; k < seq; ++k) r *= y;
        return r;
    }

    bool out_of_resources(std::uint64_t start_conflicts) const {
        if (budget_ && stats_.conflicts - start_conflicts >= *budget_) return true;
        if (deadline_ && Clock::now() >= *deadline_) return true;
        return false;
    }

    Result search(long nof_conflicts, std::uint64_t start_conflicts) {
        long conflicts_here = 0;
        std::vector<Lit> learnt_clause;
        for (;;) {
            const CRef confl = propagate();
            if (confl != no_reason) {
                ++stats_.conflicts;
                ++conflicts_here;
                if (decision_level() == 0) {
                    ok_ = false;
                    return Result::unsat;
                }
                int back_level = 0;
                analyze(confl, learnt_clause, back_level);
                const auto l = compute_lbd(learnt_clause);
                cancel_until(back_level);
                if (learnt_clause.size() == 1) {
                    enqueue(learnt_clause[0], no_reason);
                } else {
                    const CRef c = alloc_clause(learnt_clause, true, l);
                    attach(c);
                    bump_clause(c);
                    enqueue(learnt_clause[0], c);
                    ++stats_.learnts;
                }
                var_inc_ /= 0.95;
                cla_inc_ /= 0.999;
                if ((stats_.conflicts & 255) == 0 && out_of_resources(start_conflicts)) {
                    cancel_until(0);
                    return Result::unknown;
                }
            } else {
                if (conflicts_here >= nof_conflicts || out_of_resources(start_conflicts)) {
                    cancel_until(0);
                    return Result::unknown;
                }
                if (double(learnts_.size()) - double(trail_.size()) >= max_learnts_) {
                    reduce_db();
                    max_learnts_ *= 1.1;
                }
                Lit next{~0u};
                while (decision_level() < int(assumptions_.size())) {
                    const Lit a = assumptions_[decision_level()];
                    if (value(a) == ltrue) {
                        trail_lim_.push_back(static_cast<int>(trail_.size()));  // dummy level
                    } else if (value(a) == lfalse) {
                        cancel_until(0);
                        return Result::unsat;  // unsatisfiable under assumptions
                    } else {
                        next = a;
                        break;
                    }
                }
                if (next.x == ~0u) {
                    ++stats_.decisions;
                    next = pick_branch();
                    if (next.x == ~0u) return Result::sat;
                }
                trail_lim_.push_back(static_cast<int>(trail_.size()));
                enqueue(next, no_reason);
            }
        }
    }

    std::mt19937_64 rng_;
    bool ok_ = true;
    std::vector<std::uint32_t> mem_;
    std::size_t wasted_ = 0;
    std::vector<CRef> learnts_;
    std::size_t num_original_ = 0;
    std::vector<std::vector<Watcher>> watches_;
    std::vector<std::uint8_t> assigns_;
    std::vector<int> level_;
    std::vector<CRef> reason_;
    std::vector<std::uint8_t> seen_;
    std::vector<double> activity_;
    std::vector<std::uint8_t> phase_;
    std::vector<int> heap_, heap_pos_;
    std::vector<Lit> trail_;
    std::vector<int> trail_lim_;
    std::size_t qhead_ = 0;
    std::vector<Lit> assumptions_;
    std::vector<Lit> analyze_stack_, analyze_toclear_;
    std::vector<std::uint32_t> lbd_seen_;
    std::uint32_t lbd_stamp_ = 0;
    double var_inc_ = 1.0, cla_inc_ = 1.0, max_learnts_ = 2000.0;
    Stats stats_;
    std::optional<Clock::time_point> deadline_;
    std::optional<std::uint64_t> budget_;
    std::vector<bool> model_;
};

} // namespace porogen::sat
