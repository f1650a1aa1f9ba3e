#pragma once

// OPB export in the pseudo-Boolean competition dialect.
//
//   * #variable= <n> #constraint= <m>
//   +2 x3 -1 x7 >= 1 ;
//
// Variable v of the formula is written as x<v+1>. Negated literals are
// expanded (c ~x = c - c x) so that only plain variables appear. Reified
// constraints are linearized first. Constraints keep formula order: plain
// ones first, then the two halves of each reified one.

#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "porogen/error.hpp"
#include "porogen/pb.hpp"

namespace porogen {

inline std::string opb_var(Var v) { return "x" + std::to_string(v + 1); }

/// Positive-literal form: sum of coef * x over distinct variables, bound adjusted.
inline PbConstraint positive_form(const PbConstraint& c) {
    PbConstraint out{{}, c.rel, c.bound};
    std::vector<Term> terms = c.terms;
    out.bound -= canonicalize(terms);
    for (const auto& t : terms) {
        if (t.lit.negated) {
            out.bound -= t.coef;
            out.terms.push_back({-t.coef, pos(t.lit.var)});
        } else {
            out.terms.push_back(t);
        }
    }
    return out;
}

inline void write_opb_constraint(std::ostream& os, const PbConstraint& c) {
    const PbConstraint p = positive_form(c);
    for (const auto& t : p.terms) os << (t.coef >= 0 ? "+" : "") << t.coef << ' ' << opb_var(t.lit.var) << ' ';
    if (p.terms.empty()) os << "+0 x1 ";  // the grammar wants at least one term
    os << to_string(p.rel) << ' ' << p.bound << " ;\n";
}

inline void write_opb(std::ostream& os, const PbFormula& f) {
    const PbFormula lin = f.is_linear() ? f : f.linearized();
    os << "* #variable= " << lin.num_vars() << " #constraint= " << lin.constraints().size() << '\n';
    if (lin.meta.t > 0)
        os << "* porogen t= " << lin.meta.t << " w= " << lin.meta.w << " lo= " << lin.meta.lo
           << " hi= " << lin.meta.hi << '\n';
    for (const auto& c : lin.constraints()) write_opb_constraint(os, c);
}

inline std::string to_opb(const PbFormula& f) {
    std::ostringstream os;
    write_opb(os, f);
    return os.str();
}

/// Sidecar map from OPB names to formula variable names.
inline nlohmann::json opb_var_map(const PbFormula& f) {
    nlohmann::json j = nlohmann::json::object();
    for (std::size_t v = 0; v < f.num_vars(); ++v) j[opb_var(static_cast<Var>(v))] = f.name(static_cast<Var>(v));
    return j;
}

inline void save_opb(const std::filesystem::path& path, const PbFormula& f) {
    std::ofstream os(path);
    if (!os) fail(ErrorKind::io, "cannot write " + path.string());
    write_opb(os, f);
    std::filesystem::path map = path;
    map += ".vars.json";
    std::ofstream ms(map);
    if (!ms) fail(ErrorKind::io, "cannot write " + map.string());
    ms << opb_var_map(f).dump(1) << '\n';
}

} // namespace porogen
