#pragma once

// Planar primitives: convex polygons with labelled edges, half-plane
// clipping, bounded Voronoi cells and the boundary decomposition of a
// cell intersected with a closed disk.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covkit/errors.hpp"
#include "covkit/vec2.hpp"

namespace covkit {

/// Origin of a polygon edge: a face of the environment or a Voronoi bisector.
struct EdgeTag {
    enum class Kind { wall, bisector };
    Kind kind = Kind::wall;
    long index = -1;  // wall: environment edge index (or -1); bisector: neighbour agent

    static constexpr EdgeTag wall(long i = -1) { return {Kind::wall, i}; }
    static constexpr EdgeTag bisector(long j) { return {Kind::bisector, j}; }
    friend constexpr bool operator==(const EdgeTag&, const EdgeTag&) = default;
};

inline double polygon_signed_area(std::span<const Point2> v) {
    double twice = 0.0;
    for (std::size_t k = 0; k < v.size(); ++k) {
        twice += cross(v[k], v[(k + 1) % v.size()]);
    }
    return 0.5 * twice;
}

/// Counterclockwise convex polygon. Edge k runs from vertex k to vertex k+1
/// and carries a tag recording where it came from.
class ConvexPolygon {
public:
    ConvexPolygon() = default;

    /// Validating constructor. Throws ValidationError naming the offending vertex.
    static ConvexPolygon from_vertices(std::vector<Point2> vertices) {
        const std::size_t n = vertices.size();
        if (n < 3) {
            throw ValidationError("polygon needs at least 3 vertices, got " + std::to_string(n));
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (!is_finite(vertices[k])) {
                throw ValidationError("polygon vertex " + std::to_string(k) + " is not finite",
                                      static_cast<long>(k));
            }
        }
        double extent = 0.0;
        for (const auto& a : vertices) {
            for (const auto& b : vertices) extent = std::max(extent, distance(a, b));
        }
        for (std::size_t k = 0; k < n; ++k) {
            if (distance(vertices[k], vertices[(k + 1) % n]) <= 1e-12 * extent) {
                throw ValidationError("polygon has a repeated vertex at index " + std::to_string((k + 1) % n),
                                      static_cast<long>((k + 1) % n));
            }
        }
        if (polygon_signed_area(vertices) <= 0.0) {
            throw ValidationError("polygon vertices must be listed counterclockwise", 0);
        }
        double turning = 0.0;
        for (std::size_t k = 0; k < n; ++k) {
            const Vec2 e0 = vertices[k] - vertices[(k + n - 1) % n];
            const Vec2 e1 = vertices[(k + 1) % n] - vertices[k];
            const double c = cross(e0, e1);
            if (c < -1e-9 * norm(e0) * norm(e1)) {
                throw ValidationError("polygon is not convex at vertex " + std::to_string(k),
                                      static_cast<long>(k));
            }
            turning += std::atan2(c, dot(e0, e1));
        }
        if (std::abs(turning - 2.0 * std::numbers::pi) > 1e-6) {
            throw ValidationError("polygon is self-intersecting (winds more than once)", 0);
        }
        std::vector<EdgeTag> tags(n);
        for (std::size_t k = 0; k < n; ++k) tags[k] = EdgeTag::wall(static_cast<long>(k));
        return ConvexPolygon(std::move(vertices), std::move(tags));
    }

    /// Trusted constructor for results of clipping; no validation.
    static ConvexPolygon unchecked(std::vector<Point2> vertices, std::vector<EdgeTag> tags) {
        return ConvexPolygon(std::move(vertices), std::move(tags));
    }

    const std::vector<Point2>& vertices() const { return vertices_; }
    const std::vector<EdgeTag>& edge_tags() const { return tags_; }
    std::size_t size() const { return vertices_.size(); }
    const Point2& vertex(std::size_t k) const { return vertices_[k % vertices_.size()]; }

    double area() const { return polygon_signed_area(vertices_); }

    Point2 centroid() const {
        double a = 0.0;
        Vec2 c{};
        const std::size_t n = vertices_.size();
        for (std::size_t k = 0; k < n; ++k) {
            const Point2& p = vertices_[k];
            const Point2& q = vertices_[(k + 1) % n];
            const double w = cross(p, q);
            a += w;
            c += (p + q) * w;
        }
        return c / (3.0 * a);
    }

    /// Unit outward normal of edge k.
    Vec2 outward_normal(std::size_t k) const {
        const Vec2 d = vertex(k + 1) - vertex(k);
        return Vec2{d.y, -d.x} / norm(d);
    }

    /// Signed distance from p to the supporting line of edge k, positive inside.
    double inner_distance(std::size_t k, const Point2& p) const {
        return dot(vertex(k) - p, outward_normal(k));
    }

    bool contains(const Point2& p, double tol = 0.0) const {
        for (std::size_t k = 0; k < vertices_.size(); ++k) {
            if (inner_distance(k, p) < -tol) return false;
        }
        return true;
    }

private:
    ConvexPolygon(std::vector<Point2> v, std::vector<EdgeTag> t) : vertices_(std::move(v)), tags_(std::move(t)) {}

    std::vector<Point2> vertices_;
    std::vector<EdgeTag> tags_;
};

struct ClosedBall {
    Point2 center;
    double radius = 0.0;
};

inline double polygon_diameter(const ConvexPolygon& poly) {
    if (poly.size() < 3) throw ValidationError("polygon needs at least 3 vertices");
    double d = 0.0;
    for (const auto& a : poly.vertices()) {
        for (const auto& b : poly.vertices()) d = std::max(d, distance(a, b));
    }
    return d;
}

/// Default geometric tolerance for an environment.
inline double geometric_tolerance(const ConvexPolygon& q) { return 1e-9 * polygon_diameter(q); }

/// Intersection of poly with {q : a.q + b >= 0}. The new edge (if any) is
/// tagged with `tag`. Returns nullopt when the intersection has no area.
inline std::optional<ConvexPolygon> clip_halfplane(const ConvexPolygon& poly, Vec2 a, double b,
                                                   EdgeTag tag = EdgeTag::wall()) {
    const double len = norm(a);
    if (!(len > 0.0)) throw DomainError("clip_halfplane: zero normal");
    a = a / len;
    b /= len;

    const auto& v = poly.vertices();
    const auto& tags = poly.edge_tags();
    const std::size_t n = v.size();
    double extent = 0.0;
    for (const auto& p : v) extent = std::max({extent, std::abs(p.x), std::abs(p.y)});
    for (std::size_t k = 1; k < n; ++k) extent = std::max(extent, distance(v[k], v[0]));
    const double tol = 1e-13 * std::max(extent, 1e-300);

    std::vector<double> side(n);
    bool all_in = true;
    bool all_out = true;
    for (std::size_t k = 0; k < n; ++k) {
        side[k] = dot(a, v[k]) + b;
        all_in = all_in && side[k] >= -tol;
        all_out = all_out && side[k] < -tol;
    }
    if (all_in) return poly;
    if (all_out) return std::nullopt;

    std::vector<Point2> out;
    std::vector<EdgeTag> out_tags;
    out.reserve(n + 1);
    out_tags.reserve(n + 1);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t e = (k + 1) % n;
        const bool in_s = side[k] >= -tol;
        const bool in_e = side[e] >= -tol;
        if (in_s) {
            out.push_back(v[k]);
            out_tags.push_back(tags[k]);
            if (!in_e) {
                const double t = side[k] / (side[k] - side[e]);
                out.push_back(v[k] + (v[e] - v[k]) * t);
                out_tags.push_back(tag);
            }
        } else if (in_e) {
            const double t = side[k] / (side[k] - side[e]);
            out.push_back(v[k] + (v[e] - v[k]) * t);
            out_tags.push_back(tags[k]);
        }
    }

    // Collapse zero-length edges; the surviving vertex keeps the tag of the
    // edge leaving it.
    const double merge = 1e-12 * std::max(extent, 1e-300);
    std::vector<Point2> pts;
    std::vector<EdgeTag> pt_tags;
    for (std::size_t k = 0; k < out.size(); ++k) {
        if (!pts.empty() && distance(pts.back(), out[k]) <= merge) {
            pts.back() = out[k];
            pt_tags.back() = out_tags[k];
            continue;
        }
        pts.push_back(out[k]);
        pt_tags.push_back(out_tags[k]);
    }
    while (pts.size() > 1 && distance(pts.back(), pts.front()) <= merge) {
        pts.pop_back();
        pt_tags.pop_back();
    }
    if (pts.size() < 3) return std::nullopt;
    if (polygon_signed_area(pts) <= 1e-24 * extent * extent) return std::nullopt;
    return ConvexPolygon::unchecked(std::move(pts), std::move(pt_tags));
}

/// Throws unless every agent lies in q (within tol) and all pairwise
/// separations are at least min_separation.
inline void validate_agents(const ConvexPolygon& q, std::span<const Point2> agents, double tol,
                            double min_separation) {
    for (std::size_t i = 0; i < agents.size(); ++i) {
        if (!is_finite(agents[i])) {
            throw ValidationError("agent " + std::to_string(i) + " has non-finite coordinates",
                                  static_cast<long>(i));
        }
        if (!q.contains(agents[i], tol)) {
            throw ValidationError("agent " + std::to_string(i) + " lies outside the environment",
                                  static_cast<long>(i));
        }
    }
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            const double d = distance(agents[i], agents[j]);
            if (d < min_separation) throw CoincidentAgents(i, j, d);
        }
    }
}

inline double min_agent_separation(const ConvexPolygon& q) { return 1e-6 * polygon_diameter(q); }

/// Bisector half-plane clip of `cell` keeping the side of p_i against p_j.
inline std::optional<ConvexPolygon> clip_by_bisector(const ConvexPolygon& cell, const Point2& pi,
                                                     const Point2& pj, long j) {
    const Vec2 a = pi - pj;
    const Point2 mid = (pi + pj) * 0.5;
    return clip_halfplane(cell, a, -dot(a, mid), EdgeTag::bisector(j));
}

/// Voronoi cells of `agents` restricted to q; cell i has bisector edges
/// tagged with the neighbouring agent index.
inline std::vector<ConvexPolygon> voronoi_cells(const ConvexPolygon& q, std::span<const Point2> agents) {
    validate_agents(q, agents, geometric_tolerance(q), min_agent_separation(q));
    std::vector<ConvexPolygon> cells;
    cells.reserve(agents.size());
    for (std::size_t i = 0; i < agents.size(); ++i) {
        ConvexPolygon cell = q;
        for (std::size_t j = 0; j < agents.size(); ++j) {
            if (j == i) continue;
            auto clipped = clip_by_bisector(cell, agents[i], agents[j], static_cast<long>(j));
            if (!clipped) throw std::logic_error("voronoi_cells: empty cell for agent " + std::to_string(i));
            cell = std::move(*clipped);
        }
        cells.push_back(std::move(cell));
    }
    return cells;
}

/// One piece of the boundary of V_i ∩ B: a Voronoi face (chord), an
/// environment face (wall) or a circular arc of the ball.
struct BoundaryPiece {
    enum class Kind { chord, arc, wall };
    Kind kind = Kind::wall;
    Point2 start;
    Point2 end;
    // Arc data (kind == arc): counterclockwise from theta_lo to theta_hi.
    Point2 center;
    double radius = 0.0;
    double theta_lo = 0.0;
    double theta_hi = 0.0;
    // chord: neighbour agent; wall: environment edge index (or -1); arc: -1.
    long label = -1;

    double arc_span() const { return theta_hi - theta_lo; }
};

struct CellRegion {
    long owner = -1;
    ConvexPolygon base_cell;
    ClosedBall ball;
    std::vector<BoundaryPiece> boundary;
    std::map<std::size_t, std::size_t> neighbor_of_chord;  // boundary index -> agent j

    std::size_t arc_count() const {
        return static_cast<std::size_t>(std::count_if(boundary.begin(), boundary.end(), [](const auto& p) {
            return p.kind == BoundaryPiece::Kind::arc;
        }));
    }

    std::vector<BoundaryPiece> arcs() const {
        std::vector<BoundaryPiece> out;
        for (const auto& p : boundary) {
            if (p.kind == BoundaryPiece::Kind::arc) out.push_back(p);
        }
        return out;
    }

    /// Exact area from the boundary loop (Green's theorem about the ball center).
    double area() const {
        double twice = 0.0;
        for (const auto& p : boundary) {
            if (p.kind == BoundaryPiece::Kind::arc) {
                twice += p.radius * p.radius * p.arc_span();
            } else {
                twice += cross(p.start - ball.center, p.end - ball.center);
            }
        }
        return 0.5 * twice;
    }
};

/// Boundary decomposition of cell ∩ ball. Edges of the cell inside the ball
/// become chords (bisector edges) or walls; gaps between them are arcs.
inline CellRegion cell_ball_region(const ConvexPolygon& cell, const ClosedBall& ball, long owner = -1,
                                   std::optional<double> eps = std::nullopt) {
    const double tol = eps.value_or(1e-9 * polygon_diameter(cell));
    if (!(ball.radius >= 0.0)) throw DomainError("cell_ball_region: negative radius");
    if (!cell.contains(ball.center, tol)) throw DomainError("cell_ball_region: ball center outside cell");

    CellRegion region;
    region.owner = owner;
    region.base_cell = cell;
    region.ball = ball;

    const Point2 c = ball.center;
    const double r = ball.radius;
    const std::size_t n = cell.size();
    const auto& tags = cell.edge_tags();

    auto edge_piece = [&](std::size_t k, Point2 a, Point2 b) {
        BoundaryPiece piece;
        piece.start = a;
        piece.end = b;
        piece.label = tags[k].index;
        piece.kind = tags[k].kind == EdgeTag::Kind::bisector ? BoundaryPiece::Kind::chord
                                                            : BoundaryPiece::Kind::wall;
        return piece;
    };

    std::vector<BoundaryPiece> straight;
    for (std::size_t k = 0; k < n; ++k) {
        const Point2 a = cell.vertex(k);
        const Point2 b = cell.vertex(k + 1);
        if (!std::isfinite(r)) {
            straight.push_back(edge_piece(k, a, b));
            continue;
        }
        const double h = cell.inner_distance(k, c);
        if (h >= r - tol) continue;  // edge outside or tangent
        const Vec2 d = b - a;
        const Vec2 w = a - c;
        const double dd = norm2(d);
        const double half_b = dot(d, w);
        const double cc = norm2(w) - r * r;
        const double disc = half_b * half_b - dd * cc;
        if (disc <= 0.0) continue;
        const double sq = std::sqrt(disc);
        const double t0 = std::max(0.0, (-half_b - sq) / dd);
        const double t1 = std::min(1.0, (-half_b + sq) / dd);
        if ((t1 - t0) * std::sqrt(dd) <= tol) continue;
        const Point2 p0 = t0 == 0.0 ? a : a + d * t0;
        const Point2 p1 = t1 == 1.0 ? b : a + d * t1;
        straight.push_back(edge_piece(k, p0, p1));
    }

    auto make_arc = [&](Point2 from, Point2 to, bool full) {
        BoundaryPiece arc;
        arc.kind = BoundaryPiece::Kind::arc;
        arc.center = c;
        arc.radius = r;
        arc.start = from;
        arc.end = to;
        arc.theta_lo = angle_of(from - c);
        double span = 2.0 * std::numbers::pi;
        if (!full) {
            span = angle_of(to - c) - arc.theta_lo;
            while (span <= 0.0) span += 2.0 * std::numbers::pi;
            while (span > 2.0 * std::numbers::pi) span -= 2.0 * std::numbers::pi;
        }
        arc.theta_hi = arc.theta_lo + span;
        return arc;
    };

    if (straight.empty()) {
        // Disk strictly inside the cell.
        const Point2 p = c + Vec2{r, 0.0};
        region.boundary.push_back(make_arc(p, p, true));
        return region;
    }

    for (std::size_t k = 0; k < straight.size(); ++k) {
        region.boundary.push_back(straight[k]);
        const BoundaryPiece& next = straight[(k + 1) % straight.size()];
        if (distance(straight[k].end, next.start) > tol) {
            region.boundary.push_back(make_arc(straight[k].end, next.start, false));
        }
    }
    for (std::size_t k = 0; k < region.boundary.size(); ++k) {
        const auto& p = region.boundary[k];
        if (p.kind == BoundaryPiece::Kind::chord) {
            region.neighbor_of_chord[k] = static_cast<std::size_t>(p.label);
        }
    }
    return region;
}

/// Area of B_R(p2) minus its overlap with B_R(p), for |p - p2| <= R.
inline double lens_area(const Point2& p, const Point2& p2, double radius) {
    if (!(radius >= 0.0)) throw DomainError("lens_area: negative radius");
    const double sep = distance(p, p2);
    if (sep > radius * (1.0 + 1e-12)) throw DomainError("lens_area: centers farther apart than the radius");
    const double half = std::min(0.5 * sep, radius);
    if (radius == 0.0) return 0.0;
    const double angle = std::acos(half / radius);
    return radius * radius * (std::numbers::pi - 2.0 * angle) +
           2.0 * half * std::sqrt(std::max(0.0, radius * radius - half * half));
}

inline double point_segment_distance(const Point2& p, const Point2& a, const Point2& b) {
    const Vec2 d = b - a;
    const double dd = norm2(d);
    if (dd == 0.0) return distance(p, a);
    const double t = std::clamp(dot(p - a, d) / dd, 0.0, 1.0);
    return distance(p, a + d * t);
}

}  // namespace covkit
