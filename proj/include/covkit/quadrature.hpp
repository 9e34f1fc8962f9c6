#pragma once

// Integration over cell regions in polar coordinates about the owner point.
//
// A region V ∩ B_R(c) with c ∈ V is star-shaped about c, so it is
// {c + rho u(theta) : 0 <= rho <= reach(theta)} with
// reach(theta) = min(R, distance to the polygon boundary along u(theta)).
// reach is smooth between polygon vertex angles and circle/edge crossing
// angles; those angles become panel breakpoints of an adaptive
// Gauss-Kronrod rule in theta. Radial integrals are split at the
// performance-function breakpoints so no panel straddles a jump.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "covkit/density.hpp"
#include "covkit/errors.hpp"
#include "covkit/geometry.hpp"

namespace covkit {

struct QuadratureSpec {
    double rel_tol = 1e-7;
    double abs_tol = 1e-10;
    int max_subdivisions = 12;
    std::vector<double> radial_breakpoints;

    void validate() const {
        if (!(rel_tol > 0.0) || !(abs_tol > 0.0)) throw ValidationError("quadrature tolerances must be positive");
        if (max_subdivisions < 0) throw ValidationError("quadrature max_subdivisions must be >= 0");
        if (!std::is_sorted(radial_breakpoints.begin(), radial_breakpoints.end())) {
            throw ValidationError("quadrature radial breakpoints must be sorted ascending");
        }
    }
};

/// Fixed-size bundle of reals so several integrals share one adaptive pass.
template <std::size_t N>
struct Bundle {
    std::array<double, N> v{};

    double& operator[](std::size_t k) { return v[k]; }
    double operator[](std::size_t k) const { return v[k]; }
    Bundle& operator+=(const Bundle& o) {
        for (std::size_t k = 0; k < N; ++k) v[k] += o.v[k];
        return *this;
    }
    friend Bundle operator+(Bundle a, const Bundle& b) { return a += b; }
    friend Bundle operator-(Bundle a, const Bundle& b) {
        for (std::size_t k = 0; k < N; ++k) a.v[k] -= b.v[k];
        return a;
    }
    friend Bundle operator*(Bundle a, double s) {
        for (auto& x : a.v) x *= s;
        return a;
    }
    friend Bundle operator*(double s, Bundle a) { return a * s; }
};

template <std::size_t N>
double max_abs(const Bundle<N>& b) {
    double m = 0.0;
    for (double x : b.v) m = std::max(m, std::abs(x));
    return m;
}

namespace detail {

// 15-point Kronrod extension of the 7-point Gauss rule (QUADPACK qk15).
inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class T>
struct PanelEstimate {
    T value{};
    double error = 0.0;
};

template <class T, class F>
PanelEstimate<T> gauss_kronrod_15(F& f, double a, double b) {
    const double half = 0.5 * (b - a);
    const double mid = 0.5 * (a + b);
    const T fc = f(mid);
    T kronrod = fc * kKronrodWeights[7];
    T gauss = fc * kGaussWeights[3];
    for (std::size_t k = 0; k < 7; ++k) {
        const double dx = half * kKronrodNodes[k];
        const T sum = f(mid - dx) + f(mid + dx);
        kronrod += sum * kKronrodWeights[k];
        if (k % 2 == 1) gauss += sum * kGaussWeights[k / 2];
    }
    return {kronrod * half, max_abs(kronrod * half - gauss * half)};
}

template <class T>
struct AdaptiveResult {
    T value{};
    double error = 0.0;
    bool converged = true;
};

template <class T, class F>
void refine(F& f, double a, double b, const PanelEstimate<T>& est, double tol_per_length, int depth,
            const QuadratureSpec& spec, AdaptiveResult<T>& out) {
    const double budget = tol_per_length * (b - a);
    if (est.error <= budget || depth >= spec.max_subdivisions) {
        out.value += est.value;
        out.error += est.error;
        if (est.error > budget) out.converged = false;
        return;
    }
    const double m = 0.5 * (a + b);
    const auto left = gauss_kronrod_15<T>(f, a, m);
    const auto right = gauss_kronrod_15<T>(f, m, b);
    refine<T>(f, a, m, left, tol_per_length, depth + 1, spec, out);
    refine<T>(f, m, b, right, tol_per_length, depth + 1, spec, out);
}

/// Adaptive Gauss-Kronrod over consecutive panels [breaks[k], breaks[k+1]].
/// Deterministic: fixed bisection order, tolerance shared by length.
template <class T, class F>
AdaptiveResult<T> integrate_panels(F&& f, std::span<const double> breaks, const QuadratureSpec& spec,
                                   double tol_scale = 1.0) {
    AdaptiveResult<T> out;
    if (breaks.size() < 2) return out;
    std::vector<PanelEstimate<T>> first;
    first.reserve(breaks.size() - 1);
    T total{};
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        if (breaks[k + 1] > breaks[k]) {
            first.push_back(gauss_kronrod_15<T>(f, breaks[k], breaks[k + 1]));
        } else {
            first.push_back({});
        }
        total += first.back().value;
    }
    const double length = breaks.back() - breaks.front();
    if (!(length > 0.0)) return out;
    const double tol = tol_scale * std::max(spec.abs_tol, spec.rel_tol * max_abs(total));
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        if (!(breaks[k + 1] > breaks[k])) continue;
        refine<T>(f, breaks[k], breaks[k + 1], first[k], tol / length, 0, spec, out);
    }
    return out;
}

inline void sort_unique(std::vector<double>& v, double tol) {
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (double x : v) {
        if (out.empty() || x - out.back() > tol) out.push_back(x);
    }
    v = std::move(out);
}

// Insert extra breakpoints so no panel is wider than max_width.
inline void cap_panel_width(std::vector<double>& breaks, double max_width) {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k];
        const double b = breaks[k + 1];
        const int pieces = std::max(1, static_cast<int>(std::ceil((b - a) / max_width)));
        for (int p = 0; p < pieces; ++p) out.push_back(a + (b - a) * p / pieces);
    }
    if (!breaks.empty()) out.push_back(breaks.back());
    breaks = std::move(out);
}

}  // namespace detail

/// Star-shaped polar description of (convex polygon) ∩ B_R(center).
class PolarSweep {
public:
    PolarSweep(const ConvexPolygon& polygon, const Point2& center, double outer_radius)
        : center_(center), outer_(outer_radius) {
        const std::size_t n = polygon.size();
        normals_.reserve(n);
        offsets_.reserve(n);
        vertices_ = polygon.vertices();
        for (std::size_t k = 0; k < n; ++k) {
            normals_.push_back(polygon.outward_normal(k));
            offsets_.push_back(std::max(0.0, polygon.inner_distance(k, center)));
        }
    }

    const Point2& center() const { return center_; }
    double outer_radius() const { return outer_; }

    /// Distance from the center to the polygon boundary along unit u.
    double boundary_distance(const Vec2& u) const {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < normals_.size(); ++k) {
            const double c = dot(normals_[k], u);
            if (c > 1e-15) best = std::min(best, offsets_[k] / c);
        }
        return best;
    }

    double reach(const Vec2& u) const { return std::min(outer_, boundary_distance(u)); }

    struct Wall {
        double distance;  // from the center to the edge's supporting line
        double theta_n;   // direction of the outward normal
    };

    /// The edge that limits the reach along u, or nothing when the outer
    /// circle does.
    std::optional<Wall> governing_wall(const Vec2& u) const {
        double best = std::numeric_limits<double>::infinity();
        std::size_t arg = normals_.size();
        for (std::size_t k = 0; k < normals_.size(); ++k) {
            const double c = dot(normals_[k], u);
            if (c > 1e-15 && offsets_[k] / c < best) {
                best = offsets_[k] / c;
                arg = k;
            }
        }
        if (arg == normals_.size() || !(best < outer_)) return std::nullopt;
        return Wall{offsets_[arg], angle_of(normals_[arg])};
    }

    /// theta - theta_n wrapped to [-pi, pi].
    static double relative_angle(double theta, double theta_n) {
        constexpr double pi = std::numbers::pi;
        double t = theta - theta_n;
        while (t < -pi) t += 2.0 * pi;
        while (t > pi) t -= 2.0 * pi;
        return t;
    }

    /// Angles in [-pi, pi] where reach (or min(radius, boundary)) has kinks.
    std::vector<double> angular_breaks(std::span<const double> radii) const {
        constexpr double pi = std::numbers::pi;
        std::vector<double> breaks{-pi, pi};
        auto wrap = [](double t) {
            while (t < -pi) t += 2.0 * pi;
            while (t > pi) t -= 2.0 * pi;
            return t;
        };
        double scale = 0.0;
        for (const auto& v : vertices_) scale = std::max(scale, distance(v, center_));
        for (const auto& v : vertices_) {
            if (distance(v, center_) > 1e-12 * scale) breaks.push_back(angle_of(v - center_));
        }
        // Angles where the circle of radius rho crosses an edge segment.
        auto add_circle = [&](double rho) {
            if (!(rho > 0.0) || !std::isfinite(rho)) return;
            const std::size_t n = vertices_.size();
            for (std::size_t k = 0; k < n; ++k) {
                if (offsets_[k] >= rho) continue;
                const Vec2 w = vertices_[k] - center_;
                const Vec2 d = vertices_[(k + 1) % n] - vertices_[k];
                const double dd = norm2(d);
                const double half_b = dot(d, w);
                const double disc = half_b * half_b - dd * (norm2(w) - rho * rho);
                if (disc < 0.0) continue;
                const double sq = std::sqrt(disc);
                for (double t : {(-half_b - sq) / dd, (-half_b + sq) / dd}) {
                    if (t >= -1e-9 && t <= 1.0 + 1e-9) breaks.push_back(wrap(angle_of(w + d * t)));
                }
            }
        };
        for (double rho : radii) add_circle(rho);
        add_circle(outer_);
        detail::sort_unique(breaks, 1e-13);
        detail::cap_panel_width(breaks, pi / 4.0);
        return breaks;
    }

private:
    Point2 center_;
    double outer_;
    std::vector<Point2> vertices_;
    std::vector<Vec2> normals_;
    std::vector<double> offsets_;
};

inline PolarSweep sweep_of(const CellRegion& region) {
    return PolarSweep(region.base_cell, region.ball.center, region.ball.radius);
}

namespace detail {

template <class T>
T require_converged(const AdaptiveResult<T>& r, const char* what) {
    if (!r.converged) {
        double best = 0.0;
        if constexpr (std::is_same_v<T, double>) best = r.value;
        else best = max_abs(r.value);
        throw QuadratureAccuracyError(std::string(what) + ": subdivision limit reached", best, r.error);
    }
    return r.value;
}

/// theta integral of integrand(theta, u, reach) over the sweep. A panel whose
/// reach is set by one polygon edge at distance d is integrated in
/// x = tan(theta - theta_n), where reach = d sqrt(1 + x^2) and the integrand
/// stays smooth even when the center is almost on that edge. Tolerance is
/// shared between panels in proportion to their angular width.
template <class T, class F>
AdaptiveResult<T> integrate_theta(const PolarSweep& sweep, std::span<const double> radii, F&& integrand,
                                  const QuadratureSpec& spec) {
    const auto breaks = sweep.angular_breaks(radii);
    struct Panel {
        double lo, hi;  // integration variable range
        double width;   // angular width
        bool wall;
        double theta_n, d;
    };
    std::vector<Panel> panels;
    panels.reserve(breaks.size());
    for (std::size_t k = 0; k + 1 < breaks.size(); ++k) {
        const double a = breaks[k];
        const double b = breaks[k + 1];
        if (!(b > a)) continue;
        Panel p{a, b, b - a, false, 0.0, 0.0};
        if (const auto w = sweep.governing_wall(unit_from_angle(0.5 * (a + b)))) {
            const double ta = sweep.relative_angle(a, w->theta_n);
            const double tb = sweep.relative_angle(b, w->theta_n);
            if (w->distance > 0.0 && ta < tb && std::max(-ta, tb) < 0.5 * std::numbers::pi) p = {std::tan(ta), std::tan(tb), b - a, true, w->theta_n, w->distance};
        }
        panels.push_back(p);
    }
    AdaptiveResult<T> out;
    if (panels.empty()) return out;
    auto eval = [&](const Panel& p, double x) {
        if (!p.wall) {
            const Vec2 u = unit_from_angle(x);
            return integrand(x, u, sweep.reach(u));
        }
        const double theta = p.theta_n + std::atan(x);
        const double sec2 = 1.0 + x * x;
        const Vec2 u = unit_from_angle(theta);
        return integrand(theta, u, std::min(sweep.outer_radius(), p.d * std::sqrt(sec2))) * (1.0 / sec2);
    };
    std::vector<PanelEstimate<T>> first;
    first.reserve(panels.size());
    T total{};
    double width = 0.0;
    for (const auto& p : panels) {
        auto f = [&](double x) { return eval(p, x); };
        first.push_back(gauss_kronrod_15<T>(f, p.lo, p.hi));
        total += first.back().value;
        width += p.width;
    }
    const double tol = std::max(spec.abs_tol, spec.rel_tol * max_abs(total));
    for (std::size_t k = 0; k < panels.size(); ++k) {
        const auto& p = panels[k];
        auto f = [&](double x) { return eval(p, x); };
        refine<T>(f, p.lo, p.hi, first[k], tol * (p.width / width) / (p.hi - p.lo), 0, spec, out);
    }
    return out;
}

/// Radial integral of h(rho) on [0, reach] split at the spec breakpoints.
template <class T, class H>
AdaptiveResult<T> integrate_radial(H&& h, double reach, const QuadratureSpec& spec) {
    std::vector<double> breaks{0.0};
    for (double rb : spec.radial_breakpoints) {
        if (rb > 0.0 && rb < reach) breaks.push_back(rb);
    }
    breaks.push_back(reach);
    return integrate_panels<T>(h, breaks, spec, 0.1);
}

template <class T, class Field>
T integrate_region_generic(const CellRegion& region, Field&& g, const QuadratureSpec& spec, const char* what) {
    spec.validate();
    const PolarSweep sweep = sweep_of(region);
    const Point2 c = region.ball.center;
    bool inner_ok = true;
    auto integrand = [&](double, const Vec2& u, double reach) {
        if (!(reach > 0.0)) return T{};
        auto h = [&](double rho) { return T(g(c + u * rho)) * rho; };
        const auto r = integrate_radial<T>(h, reach, spec);
        inner_ok = inner_ok && r.converged;
        return r.value;
    };
    auto result = integrate_theta<T>(sweep, spec.radial_breakpoints, integrand, spec);
    result.converged = result.converged && inner_ok;
    return require_converged(result, what);
}

}  // namespace detail

/// Integral of a scalar field over the region.
template <class Field>
double integrate_scalar(const CellRegion& region, Field&& g, const QuadratureSpec& spec = {}) {
    return detail::integrate_region_generic<double>(region, g, spec, "integrate_scalar");
}

/// Componentwise integral of a vector field over the region.
template <class Field>
Vec2 integrate_vector(const CellRegion& region, Field&& g, const QuadratureSpec& spec = {}) {
    return detail::integrate_region_generic<Vec2>(region, g, spec, "integrate_vector");
}

/// Integral of phi times the outward unit normal along an arc.
template <class Field>
Vec2 arc_line_integral(const BoundaryPiece& arc, Field&& phi, const QuadratureSpec& spec = {}) {
    if (arc.kind != BoundaryPiece::Kind::arc) throw DomainError("arc_line_integral: piece is not an arc");
    spec.validate();
    std::vector<double> breaks{arc.theta_lo, arc.theta_hi};
    detail::cap_panel_width(breaks, std::numbers::pi / 8.0);
    auto f = [&](double theta) {
        const Vec2 u = unit_from_angle(theta);
        return u * (phi(arc.center + u * arc.radius) * arc.radius);
    };
    return detail::require_converged(detail::integrate_panels<Vec2>(f, breaks, spec), "arc_line_integral");
}

struct MassAndCentroid {
    double mass = 0.0;
    Point2 centroid;
};

template <class Field>
MassAndCentroid mass_and_centroid(const CellRegion& region, Field&& phi, const QuadratureSpec& spec = {}) {
    auto g = [&](const Point2& q) {
        const double w = phi(q);
        return Bundle<3>{{w, w * q.x, w * q.y}};
    };
    const auto b = detail::integrate_region_generic<Bundle<3>>(region, g, spec, "mass_and_centroid");
    if (!(b[0] > spec.abs_tol)) throw DomainError("mass_and_centroid: region has no mass");
    return {b[0], Point2{b[1] / b[0], b[2] / b[0]}};
}

/// Closed-form radial moments for a Gaussian-mixture density.
inline MassAndCentroid mass_and_centroid(const CellRegion& region, const DensityField& phi,
                                         const QuadratureSpec& spec = {}) {
    spec.validate();
    const PolarSweep sweep = sweep_of(region);
    const Point2 c = region.ball.center;
    auto integrand = [&](double, const Vec2& u, double reach) {
        const auto m = phi.radial_moments(c, u, 0.0, reach);
        return Bundle<3>{{m[1], c.x * m[1] + u.x * m[2], c.y * m[1] + u.y * m[2]}};
    };
    const auto b = detail::require_converged(
        detail::integrate_theta<Bundle<3>>(sweep, {}, integrand, spec), "mass_and_centroid");
    if (!(b[0] > spec.abs_tol)) throw DomainError("mass_and_centroid: region has no mass");
    return {b[0], Point2{b[1] / b[0], b[2] / b[0]}};
}

/// Integral of |q - p|^2 phi(q) over the region.
template <class Field>
double polar_moment(const CellRegion& region, const Point2& p, Field&& phi, const QuadratureSpec& spec = {}) {
    auto g = [&](const Point2& q) { return norm2(q - p) * phi(q); };
    return detail::integrate_region_generic<double>(region, g, spec, "polar_moment");
}

inline double polar_moment(const CellRegion& region, const Point2& p, const DensityField& phi,
                           const QuadratureSpec& spec = {}) {
    spec.validate();
    const PolarSweep sweep = sweep_of(region);
    const Point2 c = region.ball.center;
    const Vec2 off = c - p;
    auto integrand = [&](double, const Vec2& u, double reach) {
        const auto m = phi.radial_moments(c, u, 0.0, reach);
        return norm2(off) * m[1] + 2.0 * dot(off, u) * m[2] + m[3];
    };
    return detail::require_converged(detail::integrate_theta<double>(sweep, {}, integrand, spec), "polar_moment");
}

/// phi-weighted area of the region.
inline double weighted_area(const CellRegion& region, const DensityField& phi, const QuadratureSpec& spec = {}) {
    spec.validate();
    const PolarSweep sweep = sweep_of(region);
    const Point2 c = region.ball.center;
    auto integrand = [&](double, const Vec2& u, double reach) { return phi.radial_moments(c, u, 0.0, reach)[1]; };
    return detail::require_converged(detail::integrate_theta<double>(sweep, {}, integrand, spec), "weighted_area");
}

/// Whole-polygon region about an interior point (ball of infinite radius).
inline CellRegion whole_cell_region(const ConvexPolygon& cell, const Point2& owner_point, long owner = -1) {
    return cell_ball_region(cell, ClosedBall{owner_point, std::numeric_limits<double>::infinity()}, owner);
}

}  // namespace covkit
