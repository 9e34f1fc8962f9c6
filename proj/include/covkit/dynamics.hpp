#pragma once

// Gradient ascent of H: forward Euler on the gradient flow, the line-search
// map T_ls and the cell-maximizer map T_max.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/tools/toms748_solve.hpp>

#include "covkit/density.hpp"
#include "covkit/errors.hpp"
#include "covkit/geometry.hpp"
#include "covkit/objective.hpp"
#include "covkit/performance.hpp"
#include "covkit/quadrature.hpp"

namespace covkit {

enum class Algorithm { continuous_euler, line_search, max_step };
enum class Termination { grad_tol, max_steps };

inline const char* to_string(Algorithm a) {
    switch (a) {
        case Algorithm::continuous_euler: return "continuous_euler";
        case Algorithm::line_search: return "line_search";
        case Algorithm::max_step: return "max_step";
    }
    return "?";
}

inline const char* to_string(Termination t) { return t == Termination::grad_tol ? "grad_tol" : "max_steps"; }

struct Scenario {
    ConvexPolygon q;
    std::vector<Point2> agents;
    DensityField density;
    PerformanceFunction performance;
    double r = 0.0;
    Algorithm algorithm = Algorithm::line_search;
    double dt = 0.05;
    long max_steps = 10000;
    std::optional<double> grad_tol;  // default 1e-6 (|H(P0)| + 1)
    std::uint64_t seed = 0;
    QuadratureSpec quadrature;

    void validate() const {
        if (q.size() < 3) throw ValidationError("scenario has no environment polygon");
        density.validate();
        quadrature.validate();
        if (!(r > 0.0) || !std::isfinite(r)) throw ValidationError("sensing radius r must be finite and > 0");
        if (algorithm == Algorithm::continuous_euler && !(dt > 0.0 && std::isfinite(dt))) {
            throw ValidationError("dt must be finite and > 0 in continuous mode");
        }
        if (max_steps < 0) throw ValidationError("max_steps must be >= 0");
        if (grad_tol && !(*grad_tol > 0.0)) throw ValidationError("grad_tol must be > 0");
        if (agents.empty()) throw ValidationError("scenario has no agents");
        validate_agents(q, agents, geometric_tolerance(q), min_agent_separation(q));
    }
};

struct StepRecord {
    long step = 0;
    std::vector<Point2> positions;
    double h = 0.0;
    double max_grad_norm = 0.0;
    std::vector<double> step_sizes;  // delta_i of the step that produced this record
};

struct AscentReport {
    std::vector<StepRecord> trajectory;
    Termination terminated_by = Termination::max_steps;
    double final_h = 0.0;
    double grad_tol = 0.0;
    double wall_clock_seconds = 0.0;
    long lyapunov_violations = 0;
    std::vector<std::string> warnings;
};

/// Largest t >= 0 with p + t d inside the polygon.
inline double ray_exit(const ConvexPolygon& w, const Point2& p, const Vec2& d) {
    double t = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < w.size(); ++k) {
        const double c = dot(w.outward_normal(k), d);
        if (c > 0.0) t = std::min(t, std::max(0.0, w.inner_distance(k, p)) / c);
    }
    return t;
}

struct AgentStep {
    Point2 position;
    double delta = 0.0;  // multiple of the gradient that was applied
    double epsilon = 0.0;
    double reach = 0.0;  // epsilon |g|, reusable as the next hint
    std::vector<std::string> flags;
};

/// One T_ls move for a single agent in a fixed region W: p' = p + delta g with
/// delta = epsilon / 2, epsilon the first positive equal-value point of H_1
/// along the gradient ray. `hint` is a guess of epsilon |g| (a distance), e.g.
/// from the previous step; it only changes where the bracketing starts.
inline AgentStep line_search_agent(const Point2& p, const ConvexPolygon& w, const Vec2& g, double h0,
                                   const PerformanceFunction& f, const DensityField& phi,
                                   const QuadratureSpec& spec, double hint = 0.0) {
    AgentStep out;
    out.position = p;
    if (!(norm(g) > 0.0)) return out;
    const double t_exit = ray_exit(w, p, g);
    if (!(t_exit > 0.0) || !std::isfinite(t_exit)) {
        out.flags.push_back("gradient ray leaves the cell immediately; agent skipped");
        return out;
    }
    auto rise = [&](double t) { return one_center_value(p + g * t, w, f, phi, spec) - h0; };
    // Trial moves shorter than this are below geometric resolution.
    const double t_floor = 1e-9 * polygon_diameter(w) / norm(g);

    // Bracket the first sign change: halve until H_1 rises, then double
    // until it no longer does or the ray leaves the cell.
    double lo = hint > 0.0 ? std::min(hint / norm(g), t_exit) : t_exit / 64.0;
    double f_lo = rise(lo);
    double hi = 0.0;
    double f_hi = 0.0;
    for (int halvings = 0; !(f_lo > 0.0); ++halvings) {
        if (halvings == 60 || lo < t_floor) {
            out.flags.push_back("no increase along the gradient ray; agent skipped");
            return out;
        }
        hi = lo;
        f_hi = f_lo;
        lo *= 0.5;
        f_lo = rise(lo);
    }
    bool exited = false;
    if (hi == 0.0) {
        hi = lo;
        f_hi = f_lo;
        while (f_hi > 0.0) {
            if (hi >= t_exit) {
                exited = true;
                break;
            }
            lo = hi;
            f_lo = f_hi;
            hi = std::min(2.0 * hi, t_exit);
            f_hi = rise(hi);
        }
    }

    double eps = t_exit;
    if (exited) {
        out.flags.push_back("no equal-value point before the cell boundary; epsilon = ray exit");
    } else {
        // First sign change of rise in (lo, hi], rise(lo) > 0 >= rise(hi).
        std::uintmax_t max_iter = 100;
        const auto root = boost::math::tools::toms748_solve(
            rise, lo, hi, f_lo, f_hi, [](double a, double b) { return b - a <= 1e-6 * b; }, max_iter);
        eps = 0.5 * (root.first + root.second);
    }
    out.epsilon = eps;
    out.reach = eps * norm(g);

    double delta = 0.5 * eps;
    if (!(rise(delta) > 0.0)) {
        delta = eps / 3.0;
        bool ok = rise(delta) > 0.0;
        for (int k = 0; k < 40 && !ok && delta >= t_floor; ++k) {
            delta *= 0.5;
            ok = rise(delta) > 0.0;
        }
        if (!ok) {
            out.flags.push_back("no increasing step found below epsilon; agent skipped");
            return out;
        }
        out.flags.push_back("delta reduced below epsilon/2 to keep H_1 increasing");
    }
    out.delta = delta;
    out.position = p + g * delta;
    return out;
}

enum class MaxRule { centroid, r_centroid, inner_ascent };

/// Which cell maximizer applies to f: the centroid for a single concave
/// quadratic, the R-centroid fixed point for quadratic-then-flat, otherwise
/// inner ascent.
inline MaxRule max_rule_for(const PerformanceFunction& f, double* radius = nullptr) {
    const auto& pc = f.pieces();
    if (pc.size() == 1 && pc[0].c1 == 0.0 && pc[0].c2 < 0.0) return MaxRule::centroid;
    if (pc.size() == 2 && pc[0].c1 == 0.0 && pc[0].c2 < 0.0 && pc[1].is_constant()) {
        const double rb = f.breakpoints()[0];
        if (std::abs(f.jump(0)) <= 1e-12 * std::max(1.0, std::abs(pc[1].c0))) {
            if (radius) *radius = rb;
            return MaxRule::r_centroid;
        }
    }
    return MaxRule::inner_ascent;
}

namespace detail {

inline constexpr int kMaxInnerIterations = 200;

/// Maximizes H_1 over W by BFGS ascent with Armijo backtracking, starting
/// from p. Returns the point once the gradient norm drops below grad_tol.
inline std::optional<Point2> inner_maximizer(const Point2& p, const ConvexPolygon& w, const Vec2& g, double h0,
                                             const PerformanceFunction& f, const DensityField& phi,
                                             const QuadratureSpec& spec, double grad_tol, double hint) {
    // Inverse Hessian of -H_1, stored as [a b; b c].
    double scale = hint > 0.0 ? hint / norm(g) : 1.0;
    double a = scale, b = 0.0, c = scale;
    Point2 x = p;
    Vec2 gx = g;
    double hx = h0;
    for (int it = 0; it < kMaxInnerIterations; ++it) {
        if (norm(gx) < grad_tol) return x;
        Vec2 d{a * gx.x + b * gx.y, b * gx.x + c * gx.y};
        if (!(dot(d, gx) > 0.0)) {
            a = c = scale;
            b = 0.0;
            d = gx * scale;
        }
        const double t_exit = ray_exit(w, x, d);
        double t = std::min(1.0, 0.99 * t_exit);
        bool moved = false;
        OneCenterResult r;
        for (int k = 0; k < 40 && t > 0.0; ++k, t *= 0.5) {
            r = one_center(x + d * t, w, f, phi, spec);
            if (r.value >= hx + 1e-4 * t * dot(d, gx) && r.value > hx) {
                moved = true;
                break;
            }
        }
        if (!moved) return std::nullopt;
        const Vec2 s = d * t;
        const Vec2 y = gx - r.gradient.gradient;  // gradient change of -H_1
        x = x + s;
        gx = r.gradient.gradient;
        hx = r.value;
        const double sy = dot(s, y);
        if (sy > 1e-12 * norm(s) * norm(y)) {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            const double rho = 1.0 / sy;
            const double hy_x = a * y.x + b * y.y, hy_y = b * y.x + c * y.y;
            const double yhy = y.x * hy_x + y.y * hy_y;
            const double k2 = rho * rho * yhy + rho;
            a += k2 * s.x * s.x - rho * 2.0 * hy_x * s.x;
            b += k2 * s.x * s.y - rho * (hy_x * s.y + hy_y * s.x);
            c += k2 * s.y * s.y - rho * 2.0 * hy_y * s.y;
            scale = sy / dot(y, y);
        }
    }
    return std::nullopt;
}

inline AgentStep max_agent(const Point2& p, const ConvexPolygon& w, const Vec2& g, double h0,
                           const PerformanceFunction& f, const DensityField& phi, const QuadratureSpec& spec,
                           double grad_tol, double length_scale, double hint) {
    AgentStep out;
    out.position = p;
    if (!(norm(g) > 0.0)) return out;
    auto accept = [&](const Point2& target) {
        const double h = one_center_value(target, w, f, phi, spec);
        if (h >= h0) {
            out.position = target;
            out.delta = distance(target, p) / norm(g);
            return true;
        }
        // A maximizer that only differs from p by quadrature noise: stay put.
        return h >= h0 - spec.abs_tol - 1e-12 * std::abs(h0);
    };
    double radius = 0.0;
    switch (max_rule_for(f, &radius)) {
        case MaxRule::centroid: {
            const auto mc = mass_and_centroid(whole_cell_region(w, p), phi, spec);
            if (accept(mc.centroid)) return out;
            break;
        }
        case MaxRule::r_centroid: {
            Point2 x = p;
            for (int it = 0; it < kMaxInnerIterations; ++it) {
                const auto mc = mass_and_centroid(cell_ball_region(w, ClosedBall{x, radius}), phi, spec);
                const double move = distance(mc.centroid, x);
                x = mc.centroid;
                if (move <= 1e-10 * length_scale) {
                    if (accept(x)) return out;
                    break;
                }
            }
            break;
        }
        case MaxRule::inner_ascent: {
            if (const auto x = detail::inner_maximizer(p, w, g, h0, f, phi, spec, grad_tol, hint)) {
                if (accept(*x)) {
                    out.reach = distance(*x, p);
                    return out;
                }
            }
            break;
        }
    }
    out = line_search_agent(p, w, g, h0, f, phi, spec, hint);
    out.flags.push_back("cell maximizer not reached; fell back to a line-search step");
    return out;
}

}  // namespace detail

struct StepResult {
    std::vector<Point2> positions;
    std::vector<double> step_sizes;
    std::vector<double> hints;
    std::vector<std::string> warnings;
};

namespace detail {

// Shrink the displacements toward the old positions until the configuration
// is admissible again; throws after 10 halvings.
inline void enforce_separation(const ConvexPolygon& q, std::span<const Point2> old, StepResult& s) {
    const double tol = geometric_tolerance(q);
    const double sep = min_agent_separation(q);
    for (int attempt = 0;; ++attempt) {
        try {
            validate_agents(q, s.positions, tol, sep);
            return;
        } catch (const CoincidentAgents& e) {
            if (attempt == 10) {
                throw CoincidentAgents(e.first(), e.second(), distance(s.positions[e.first()], s.positions[e.second()]));
            }
            for (std::size_t i = 0; i < old.size(); ++i) {
                s.positions[i] = old[i] + (s.positions[i] - old[i]) * 0.5;
                s.step_sizes[i] *= 0.5;
            }
            s.warnings.push_back("step halved to keep agents separated");
        }
    }
}

inline std::string agent_flag(std::size_t i, const std::string& what) {
    return "agent " + std::to_string(i) + ": " + what;
}

}  // namespace detail

/// Forward Euler p_i += dt dH/dp_i; moves leaving Q stop on its boundary.
inline StepResult continuous_step(const ConvexPolygon& q, std::span<const Point2> agents,
                                  std::span<const GradientReport> gradients, double dt) {
    StepResult s;
    const double tol = geometric_tolerance(q);
    const double sep = min_agent_separation(q);
    for (int attempt = 0;; ++attempt) {
        s.positions.assign(agents.begin(), agents.end());
        s.step_sizes.assign(agents.size(), dt);
        for (std::size_t i = 0; i < agents.size(); ++i) {
            const Vec2 d = gradients[i].gradient * dt;
            const double t = std::min(1.0, ray_exit(q, agents[i], d));
            s.positions[i] = agents[i] + d * t;
            s.step_sizes[i] = dt * t;
        }
        try {
            validate_agents(q, s.positions, tol, sep);
            return s;
        } catch (const CoincidentAgents& e) {
            if (attempt == 10) throw;
            dt *= 0.5;
            s.warnings.push_back("dt halved to keep agents separated");
        }
    }
}

inline StepResult continuous_step(const ConvexPolygon& q, std::span<const Point2> agents,
                                  const PerformanceFunction& f, const DensityField& phi, double dt,
                                  const QuadratureSpec& spec = {}) {
    const auto grads = multicenter_gradient(q, agents, f, phi, spec);
    return continuous_step(q, agents, grads, dt);
}

/// T_ls over precomputed cells and one-center values/gradients. `hints`
/// (optional, one per agent) seed the bracketing of each line search.
inline StepResult line_search_step(const ConvexPolygon& q, std::span<const Point2> agents,
                                   std::span<const ConvexPolygon> cells, const MulticenterEvaluation& ev,
                                   const PerformanceFunction& f, const DensityField& phi,
                                   const QuadratureSpec& spec, std::span<const double> hints = {}) {
    StepResult s;
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const double hint = i < hints.size() ? hints[i] : 0.0;
        auto a = line_search_agent(agents[i], cells[i], ev.gradients[i].gradient, ev.agent_values[i], f, phi, spec,
                                   hint);
        s.positions.push_back(a.position);
        s.step_sizes.push_back(a.delta);
        s.hints.push_back(a.delta > 0.0 ? a.reach : hint);
        for (const auto& fl : a.flags) s.warnings.push_back(detail::agent_flag(i, fl));
    }
    detail::enforce_separation(q, agents, s);
    return s;
}

inline StepResult line_search_step(const ConvexPolygon& q, std::span<const Point2> agents,
                                   const PerformanceFunction& f, const DensityField& phi,
                                   const QuadratureSpec& spec = {}) {
    const auto cells = voronoi_cells(q, agents);
    const auto ev = evaluate_on_cells(agents, cells, f, phi, spec, true);
    return line_search_step(q, agents, cells, ev, f, phi, spec);
}

/// T_max over precomputed cells. grad_tol bounds the inner ascent.
inline StepResult max_step(const ConvexPolygon& q, std::span<const Point2> agents,
                           std::span<const ConvexPolygon> cells, const MulticenterEvaluation& ev,
                           const PerformanceFunction& f, const DensityField& phi, const QuadratureSpec& spec,
                           double grad_tol, std::span<const double> hints = {}) {
    StepResult s;
    const double scale = polygon_diameter(q);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const double hint = i < hints.size() ? hints[i] : 0.0;
        auto a = detail::max_agent(agents[i], cells[i], ev.gradients[i].gradient, ev.agent_values[i], f, phi, spec,
                                   grad_tol, scale, hint);
        s.positions.push_back(a.position);
        s.step_sizes.push_back(a.delta);
        s.hints.push_back(a.reach > 0.0 ? a.reach : hint);
        for (const auto& fl : a.flags) s.warnings.push_back(detail::agent_flag(i, fl));
    }
    detail::enforce_separation(q, agents, s);
    return s;
}

inline StepResult max_step(const ConvexPolygon& q, std::span<const Point2> agents, const PerformanceFunction& f,
                           const DensityField& phi, double grad_tol, const QuadratureSpec& spec = {}) {
    const auto cells = voronoi_cells(q, agents);
    const auto ev = evaluate_on_cells(agents, cells, f, phi, spec, true);
    return max_step(q, agents, cells, ev, f, phi, spec, grad_tol);
}

/// Iterate the scenario's algorithm until the largest gradient norm drops
/// below grad_tol or max_steps steps have been taken.
inline AscentReport run(const Scenario& sc) {
    sc.validate();
    const auto started = std::chrono::steady_clock::now();
    AscentReport report;
    std::vector<Point2> p = sc.agents;
    const bool discrete = sc.algorithm != Algorithm::continuous_euler;
    const double lyapunov_tol = 10.0 * sc.quadrature.abs_tol;
    std::vector<double> last_steps(p.size(), 0.0);
    std::vector<double> hints;
    for (long step = 0;; ++step) {
        const auto cells = voronoi_cells(sc.q, p);
        const auto ev = evaluate_on_cells(p, cells, sc.performance, sc.density, sc.quadrature, true);
        if (step == 0) report.grad_tol = sc.grad_tol.value_or(1e-6 * (std::abs(ev.value) + 1.0));
        if (discrete && !report.trajectory.empty() && ev.value < report.trajectory.back().h - lyapunov_tol) {
            ++report.lyapunov_violations;
            report.warnings.push_back("step " + std::to_string(step) + ": H decreased");
        }
        report.trajectory.push_back({step, p, ev.value, ev.max_gradient_norm(), last_steps});
        if (ev.max_gradient_norm() < report.grad_tol) {
            report.terminated_by = Termination::grad_tol;
            break;
        }
        if (step >= sc.max_steps) {
            report.terminated_by = Termination::max_steps;
            break;
        }
        StepResult s;
        switch (sc.algorithm) {
            case Algorithm::continuous_euler:
                s = continuous_step(sc.q, p, ev.gradients, sc.dt);
                break;
            case Algorithm::line_search:
                s = line_search_step(sc.q, p, cells, ev, sc.performance, sc.density, sc.quadrature, hints);
                break;
            case Algorithm::max_step:
                s = max_step(sc.q, p, cells, ev, sc.performance, sc.density, sc.quadrature, report.grad_tol, hints);
                break;
        }
        for (const auto& w : s.warnings) report.warnings.push_back("step " + std::to_string(step + 1) + ": " + w);
        p = std::move(s.positions);
        last_steps = std::move(s.step_sizes);
        hints = std::move(s.hints);
    }
    report.final_h = report.trajectory.back().h;
    report.wall_clock_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

}  // namespace covkit
