#pragma once

// The multi-center function H(P) = sum_i int_{V_i} f(|q - p_i|) phi(q) dq,
// its gradient, the one-center function H_1(p, W) and the fixed-partition
// function H_e(P, W).
//
// With pieces f_alpha = c0 + c1 x + c2 x^2 and closed-form radial moments
// m_j = int rho^j phi(p + rho u) drho, the polar integrand about p is
//   value:    c0 m1 + c1 m2 + c2 m3
//   interior: -u (c1 m1 + 2 c2 m2)
// per annulus. Each jump at R_alpha adds
//   (f_alpha(R_alpha) - f_{alpha+1}(R_alpha)) * sum_k int_{arc_k} n phi.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <boost/container/small_vector.hpp>

#include "covkit/density.hpp"
#include "covkit/errors.hpp"
#include "covkit/geometry.hpp"
#include "covkit/performance.hpp"
#include "covkit/quadrature.hpp"

namespace covkit {

struct JumpTerm {
    std::size_t alpha = 0;  // breakpoint index
    std::size_t arc = 0;    // arc index within the region at R_alpha
    Vec2 contribution;
};

struct GradientReport {
    Vec2 gradient;
    Vec2 interior_term;
    std::vector<JumpTerm> jump_terms;
};

struct OneCenterResult {
    double value = 0.0;
    GradientReport gradient;
};

namespace detail {

using EdgeBuffer = boost::container::small_vector<double, 8>;

inline EdgeBuffer annulus_edges(const PerformanceFunction& f, double reach) {
    EdgeBuffer edges{0.0};
    for (double rb : f.breakpoints()) {
        if (rb < reach) edges.push_back(rb);
    }
    edges.push_back(reach);
    return edges;
}

inline void require_inside(const ConvexPolygon& w, const Point2& p) {
    double diam = polygon_diameter(w);
    if (!w.contains(p, 1e-9 * diam)) throw DomainError("one-center function: point outside its region");
}

// Value (index 0) and interior gradient (1, 2) in one angular pass.
inline Bundle<3> one_center_bulk(const Point2& p, const ConvexPolygon& w, const PerformanceFunction& f,
                                 const DensityField& phi, const QuadratureSpec& spec, bool with_gradient) {
    const PolarSweep sweep(w, p, std::numeric_limits<double>::infinity());
    const auto& pieces = f.pieces();
    auto integrand = [&](double, const Vec2& u, double reach) {
        Bundle<3> out;
        if (!(reach > 0.0)) return out;
        const auto edges = annulus_edges(f, reach);
        boost::container::small_vector<std::array<double, 4>, 8> moments(edges.size() - 1, std::array<double, 4>{});
        phi.radial_moment_profile(p, u, std::span<const double>(edges.data(), edges.size()),
                                  std::span<std::array<double, 4>>(moments.data(), moments.size()));
        for (std::size_t a = 0; a + 1 < edges.size(); ++a) {
            const auto& m = moments[a];
            const auto& c = pieces[a];
            out[0] += c.c0 * m[1] + c.c1 * m[2] + c.c2 * m[3];
            if (with_gradient) {
                const double s = -(c.c1 * m[1] + 2.0 * c.c2 * m[2]);
                out[1] += s * u.x;
                out[2] += s * u.y;
            }
        }
        return out;
    };
    return require_converged(integrate_theta<Bundle<3>>(sweep, f.breakpoints(), integrand, spec), "one-center");
}

}  // namespace detail

/// H_1(p, W) and its gradient. p must lie in W.
inline OneCenterResult one_center(const Point2& p, const ConvexPolygon& w, const PerformanceFunction& f,
                                  const DensityField& phi, const QuadratureSpec& spec = {},
                                  bool with_gradient = true) {
    spec.validate();
    detail::require_inside(w, p);
    const Bundle<3> bulk = detail::one_center_bulk(p, w, f, phi, spec, with_gradient);
    OneCenterResult out;
    out.value = bulk[0];
    if (!with_gradient) return out;
    out.gradient.interior_term = {bulk[1], bulk[2]};
    Vec2 total = out.gradient.interior_term;
    auto density = [&](const Point2& q) { return phi(q); };
    for (std::size_t a = 0; a < f.breakpoints().size(); ++a) {
        const double jump = f.jump(a);
        if (std::abs(jump) <= 1e-15 * (std::abs(f.pieces()[a](f.breakpoints()[a])) + 1.0)) continue;
        const CellRegion region = cell_ball_region(w, ClosedBall{p, f.breakpoints()[a]});
        std::size_t k = 0;
        for (const auto& piece : region.boundary) {
            if (piece.kind != BoundaryPiece::Kind::arc) continue;
            const Vec2 c = arc_line_integral(piece, density, spec) * jump;
            out.gradient.jump_terms.push_back({a, k++, c});
            total += c;
        }
    }
    out.gradient.gradient = total;
    return out;
}

inline double one_center_value(const Point2& p, const ConvexPolygon& w, const PerformanceFunction& f,
                               const DensityField& phi, const QuadratureSpec& spec = {}) {
    return one_center(p, w, f, phi, spec, false).value;
}

inline Vec2 one_center_gradient(const Point2& p, const ConvexPolygon& w, const PerformanceFunction& f,
                                const DensityField& phi, const QuadratureSpec& spec = {}) {
    return one_center(p, w, f, phi, spec).gradient.gradient;
}

/// Per-agent value and gradient over precomputed Voronoi cells.
struct MulticenterEvaluation {
    double value = 0.0;
    std::vector<double> agent_values;
    std::vector<GradientReport> gradients;

    double max_gradient_norm() const {
        double m = 0.0;
        for (const auto& g : gradients) m = std::max(m, norm(g.gradient));
        return m;
    }
};

inline MulticenterEvaluation evaluate_on_cells(std::span<const Point2> agents, std::span<const ConvexPolygon> cells,
                                               const PerformanceFunction& f, const DensityField& phi,
                                               const QuadratureSpec& spec, bool with_gradient) {
    MulticenterEvaluation ev;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        auto r = one_center(agents[i], cells[i], f, phi, spec, with_gradient);
        ev.agent_values.push_back(r.value);
        ev.value += r.value;
        if (with_gradient) ev.gradients.push_back(std::move(r.gradient));
    }
    return ev;
}

inline MulticenterEvaluation evaluate_multicenter(const ConvexPolygon& q, std::span<const Point2> agents,
                                                  const PerformanceFunction& f, const DensityField& phi,
                                                  const QuadratureSpec& spec = {}, bool with_gradient = true) {
    const auto cells = voronoi_cells(q, agents);
    return evaluate_on_cells(agents, cells, f, phi, spec, with_gradient);
}

inline double multicenter_value(const ConvexPolygon& q, std::span<const Point2> agents,
                                const PerformanceFunction& f, const DensityField& phi,
                                const QuadratureSpec& spec = {}) {
    return evaluate_multicenter(q, agents, f, phi, spec, false).value;
}

inline std::vector<GradientReport> multicenter_gradient(const ConvexPolygon& q, std::span<const Point2> agents,
                                                        const PerformanceFunction& f, const DensityField& phi,
                                                        const QuadratureSpec& spec = {}) {
    return evaluate_multicenter(q, agents, f, phi, spec, true).gradients;
}

/// H_e(P, W) = sum_i H_1(p_i, W_i). W must tile Q and contain the p_i.
inline double fixed_partition_value(const ConvexPolygon& q, std::span<const Point2> agents,
                                    std::span<const ConvexPolygon> partition, const PerformanceFunction& f,
                                    const DensityField& phi, const QuadratureSpec& spec = {}) {
    if (partition.size() != agents.size()) {
        throw ValidationError("partition must have one region per agent");
    }
    double area_sum = 0.0;
    for (const auto& w : partition) area_sum += w.area();
    if (std::abs(area_sum - q.area()) > 1e-9 * q.area()) {
        throw ValidationError("partition does not tile the environment (area mismatch)");
    }
    const double tol = geometric_tolerance(q);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (const auto& v : partition[i].vertices()) {
            if (!q.contains(v, tol)) {
                throw ValidationError("partition region " + std::to_string(i) + " leaves the environment",
                                      static_cast<long>(i));
            }
        }
        if (!partition[i].contains(agents[i], tol)) {
            throw ValidationError("agent " + std::to_string(i) + " is not inside its partition region",
                                  static_cast<long>(i));
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) total += one_center_value(agents[i], partition[i], f, phi, spec);
    return total;
}

/// phi-weighted area of the environment.
inline double weighted_area(const ConvexPolygon& q, const DensityField& phi, const QuadratureSpec& spec = {}) {
    return weighted_area(whole_cell_region(q, q.centroid()), phi, spec);
}

/// phi-weighted area of Q covered by the union of the balls B_radius(p_i).
inline double covered_weighted_area(const ConvexPolygon& q, std::span<const Point2> agents, double radius,
                                    const DensityField& phi, const QuadratureSpec& spec = {}) {
    const auto cells = voronoi_cells(q, agents);
    double covered = 0.0;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        covered += weighted_area(cell_ball_region(cells[i], ClosedBall{agents[i], radius}), phi, spec);
    }
    return covered;
}

struct ApproximationBounds {
    double beta = 0.0;
    double pi = 0.0;     // (f(r/2) - f(diam)) * area_phi(Q minus the union of B_{r/2}(p_i))
    double kappa = 0.0;  // (f(r/2) - f(diam)) * area_phi(Q)
    double h = 0.0;
    double h_truncated = 0.0;
    double tolerance = 0.0;  // slack used in the checks below
    bool lower_chain = false;  // H_{r/2} <= H <= beta H_{r/2} < 0
    bool upper_chain = false;  // H <= H_{r/2} + Pi
};

/// beta = f(r/2) / f(diam Q) without evaluating any integral.
inline double approximation_beta(const PerformanceFunction& f, double r, double diam) {
    const double fd = f(diam);
    if (fd == 0.0) throw DomainError("approximation bounds need f(diam Q) != 0");
    return f(0.5 * r) / fd;
}

inline ApproximationBounds approximation_bounds(const ConvexPolygon& q, std::span<const Point2> agents,
                                                const PerformanceFunction& f, const DensityField& phi, double r,
                                                const QuadratureSpec& spec = {}) {
    const double diam = polygon_diameter(q);
    ApproximationBounds out;
    out.beta = approximation_beta(f, r, diam);
    const double gap = f(0.5 * r) - f(diam);
    const double total = weighted_area(q, phi, spec);
    const double covered = covered_weighted_area(q, agents, 0.5 * r, phi, spec);
    out.pi = gap * std::max(0.0, total - covered);
    out.kappa = gap * total;
    const auto truncated = truncate_performance(f, r, diam);
    const auto cells = voronoi_cells(q, agents);
    out.h = evaluate_on_cells(agents, cells, f, phi, spec, false).value;
    out.h_truncated = evaluate_on_cells(agents, cells, truncated, phi, spec, false).value;
    const double scale = std::max({std::abs(out.h), std::abs(out.h_truncated), 1.0});
    out.tolerance = 10.0 * std::max(spec.abs_tol, spec.rel_tol * scale);
    out.lower_chain = out.h_truncated <= out.h + out.tolerance && out.h <= out.beta * out.h_truncated + out.tolerance &&
                      out.beta * out.h_truncated < 0.0;
    out.upper_chain = out.h <= out.h_truncated + out.pi + out.tolerance;
    return out;
}

}  // namespace covkit
