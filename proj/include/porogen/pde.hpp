#pragma once

// Effective x-axis dispersion coefficient of a binary porous medium.
//
// Void pixels are nodes of a unit-conductance network (side-adjacent void
// pairs are linked, grain faces and the top/bottom edges carry no flux).
// Column 1 void pixels link to an inlet held at u = 1 and column t void
// pixels link to an outlet held at u = 0, each through a unit conductance.
// The coefficient is the net inlet-to-outlet flux divided by the flux through
// the all-void medium of the same size, t / (t + 1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "porogen/error.hpp"
#include "porogen/grid.hpp"

namespace porogen {

struct DispersionResult {
    double d_real = 0.0;  // in [0, 1]
    int d_int = 0;        // quantize(d_real)
    int solver_iters = 0;
    double residual = 0.0;  // final relative residual of the CG solve
};

/// round(100 * d), ties half-up. The small guard absorbs representation error
/// in decimal inputs such as 0.455.
inline int quantize(double d_real) {
    require(std::isfinite(d_real) && d_real >= 0.0 && d_real <= 1.0,
            "quantize: value must lie in [0, 1]");
    const double scaled = d_real * 100.0;
    int q = static_cast<int>(std::floor(scaled + 0.5 + 1e-9));
    return std::clamp(q, 0, 100);
}

inline double empty_medium_flux(int t) { return double(t) / double(t + 1); }

/// The linear system restricted to void pixels that can exchange flux with the
/// inlet or the outlet. Other void pockets are floating and carry no flux.
struct VoidNetwork {
    int t = 0;
    std::vector<int> node_of;           // per pixel: node index or -1
    std::vector<std::size_t> pixel_of;  // per node
    std::vector<std::vector<int>> adj;  // void-void links between nodes
    std::vector<std::uint8_t> at_inlet, at_outlet;

    std::size_t size() const { return pixel_of.size(); }
};

inline VoidNetwork build_void_network(const Image& img) {
    const int t = img.side();
    VoidNetwork net;
    net.t = t;
    net.node_of.assign(img.size(), -1);

    // Flood from every void pixel touching column 1 or column t.
    std::vector<std::uint8_t> seen(img.size(), 0);
    std::vector<std::size_t> stack;
    for (int i = 1; i <= t; ++i) {
        for (Cell c : {Cell{i, 1}, Cell{i, t}}) {
            auto k = linear(c, t);
            if (img[c] == 0 && !seen[k]) {
                seen[k] = 1;
                stack.push_back(k);
            }
        }
    }
    while (!stack.empty()) {
        auto k = stack.back();
        stack.pop_back();
        for_each_neighbor(cell_at(k, t), t, [&](Cell nb) {
            auto nk = linear(nb, t);
            if (img[nb] == 0 && !seen[nk]) {
                seen[nk] = 1;
                stack.push_back(nk);
            }
        });
    }
    for (std::size_t k = 0; k < img.size(); ++k) {
        if (!seen[k]) continue;
        net.node_of[k] = static_cast<int>(net.pixel_of.size());
        net.pixel_of.push_back(k);
    }
    const std::size_t n = net.pixel_of.size();
    net.adj.resize(n);
    net.at_inlet.assign(n, 0);
    net.at_outlet.assign(n, 0);
    for (std::size_t a = 0; a < n; ++a) {
        Cell c = cell_at(net.pixel_of[a], t);
        net.at_inlet[a] = c.j == 1;
        net.at_outlet[a] = c.j == t;
        for_each_neighbor(c, t, [&](Cell nb) {
            int b = net.node_of[linear(nb, t)];
            if (b >= 0) net.adj[a].push_back(b);
        });
    }
    return net;
}

/// Dissipated power of potential field u on the network (inlet at 1, outlet
/// at 0). At the exact solution this equals the net flux; for any other field
/// it is larger, with error quadratic in the field error.
inline double dissipation(const VoidNetwork& net, const std::vector<double>& u) {
    double e = 0.0;
    for (std::size_t a = 0; a < net.size(); ++a) {
        for (int b : net.adj[a])
            if (static_cast<std::size_t>(b) > a) e += (u[a] - u[b]) * (u[a] - u[b]);
        if (net.at_inlet[a]) e += (1.0 - u[a]) * (1.0 - u[a]);
        if (net.at_outlet[a]) e += u[a] * u[a];
    }
    return e;
}

/// Net flux leaving the inlet for potential field u.
inline double inlet_flux(const VoidNetwork& net, const std::vector<double>& u) {
    double f = 0.0;
    for (std::size_t a = 0; a < net.size(); ++a)
        if (net.at_inlet[a]) f += 1.0 - u[a];
    return f;
}

struct CgOutcome {
    std::vector<double> u;
    int iters = 0;
    double residual = 0.0;
    bool converged = false;
};

/// Conjugate gradients on the (symmetric positive definite) network Laplacian
/// with Dirichlet links folded into the diagonal.
inline CgOutcome solve_potential(const VoidNetwork& net, double tol, int max_iters) {
    const std::size_t n = net.size();
    CgOutcome out;
    out.u.assign(n, 0.0);
    if (n == 0) {
        out.converged = true;
        return out;
    }
    std::vector<double> diag(n);
    std::vector<double> b(n, 0.0);
    for (std::size_t a = 0; a < n; ++a) {
        diag[a] = double(net.adj[a].size()) + net.at_inlet[a] + net.at_outlet[a];
        b[a] = net.at_inlet[a] ? 1.0 : 0.0;
    }
    auto apply = [&](const std::vector<double>& x, std::vector<double>& y) {
        for (std::size_t a = 0; a < n; ++a) {
            double s = diag[a] * x[a];
            for (int nb : net.adj[a]) s -= x[nb];
            y[a] = s;
        }
    };
    auto dot = [](const std::vector<double>& x, const std::vector<double>& y) {
        double s = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) s += x[k] * y[k];
        return s;
    };

    const double bnorm = std::sqrt(dot(b, b));
    if (bnorm == 0.0) {
        out.converged = true;
        return out;
    }
    std::vector<double> r(n), p(n), ap(n);
    // Outer loop restarts from the true residual whenever the recursively
    // updated one has drifted below tolerance while the true one has not.
    for (;;) {
        apply(out.u, ap);
        for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - ap[k];
        double rr = dot(r, r);
        out.residual = std::sqrt(rr) / bnorm;
        if (out.residual <= tol) {
            out.converged = true;
            break;
        }
        if (out.iters >= max_iters) break;
        p = r;
        while (std::sqrt(rr) / bnorm > tol && out.iters < max_iters) {
            apply(p, ap);
            const double alpha = rr / dot(p, ap);
            for (std::size_t k = 0; k < n; ++k) {
                out.u[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            const double rr_next = dot(r, r);
            const double beta = rr_next / rr;
            for (std::size_t k = 0; k < n; ++k) p[k] = r[k] + beta * p[k];
            rr = rr_next;
            ++out.iters;
        }
    }
    return out;
}

inline constexpr double default_pde_tolerance = 1e-10;

inline DispersionResult dispersion_x(const Image& img, double tol = default_pde_tolerance) {
    require(tol > 0.0, "dispersion_x: tolerance must be positive");
    const int t = img.side();
    require(t >= 1, "dispersion_x: empty image");
    const auto net = build_void_network(img);
    const int cap = 50 * t * t;
    auto cg = solve_potential(net, tol, cap);
    if (!cg.converged)
        fail(ErrorKind::numeric, "dispersion_x: CG did not reach tolerance " + std::to_string(tol) + " within " +
                                     std::to_string(cap) + " iterations (residual " +
                                     std::to_string(cg.residual) + ")");
    DispersionResult res;
    res.solver_iters = cg.iters;
    res.residual = cg.residual;
    res.d_real = std::clamp(dissipation(net, cg.u) / empty_medium_flux(t), 0.0, 1.0);
    res.d_int = quantize(res.d_real);
    return res;
}

} // namespace porogen
