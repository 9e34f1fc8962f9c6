#pragma once

// Proximity graphs over a planar point set: Delaunay, r-disk, r-Delaunay,
// r-limited Delaunay, Gabriel and Euclidean minimum spanning tree.

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <ostream>
#include <queue>
#include <set>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "covkit/geometry.hpp"

namespace covkit {

using Edge = std::pair<std::size_t, std::size_t>;

/// Undirected graph on agent positions; edges stored as sorted (i < j) pairs.
class ProximityGraph {
public:
    ProximityGraph() = default;
    explicit ProximityGraph(std::vector<Point2> positions) : positions_(std::move(positions)) {}

    std::size_t size() const { return positions_.size(); }
    const std::vector<Point2>& positions() const { return positions_; }
    const std::set<Edge>& edges() const { return edges_; }
    std::size_t edge_count() const { return edges_.size(); }

    void add_edge(std::size_t i, std::size_t j) {
        if (i == j) throw std::invalid_argument("ProximityGraph: self-loop");
        if (i >= size() || j >= size()) throw std::out_of_range("ProximityGraph: vertex index");
        edges_.insert(std::minmax(i, j));
    }

    bool has_edge(std::size_t i, std::size_t j) const { return edges_.contains(std::minmax(i, j)); }

    std::vector<std::size_t> neighbors(std::size_t i) const {
        std::vector<std::size_t> out;
        for (const auto& [a, b] : edges_) {
            if (a == i) out.push_back(b);
            if (b == i) out.push_back(a);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

    double total_length() const {
        double w = 0.0;
        for (const auto& [a, b] : edges_) w += distance(positions_[a], positions_[b]);
        return w;
    }

    friend bool operator==(const ProximityGraph&, const ProximityGraph&) = default;

private:
    std::vector<Point2> positions_;
    std::set<Edge> edges_;
};

/// Edge-list text: one "i j" line per edge, sorted.
inline void write_edge_list(std::ostream& os, const ProximityGraph& g) {
    for (const auto& [a, b] : g.edges()) os << a << ' ' << b << '\n';
}

namespace detail {

inline void require_same_vertices(const ProximityGraph& a, const ProximityGraph& b) {
    if (a.positions() != b.positions()) throw std::invalid_argument("graph operation on mismatched vertex sets");
}

/// Portion of cell i lying on the bisector with j, as the pair of extreme
/// points along the bisector direction. Empty when the cells do not touch.
struct Face {
    bool present = false;
    Point2 a;
    Point2 b;
};

inline Face shared_face(const ConvexPolygon& cell_i, const Point2& pi, const Point2& pj, double tol) {
    const Vec2 normal = (pj - pi) / distance(pi, pj);
    const Point2 mid = (pi + pj) * 0.5;
    const Vec2 along = perp_ccw(normal);
    Face face;
    double lo = 0.0;
    double hi = 0.0;
    for (const auto& v : cell_i.vertices()) {
        if (std::abs(dot(v - mid, normal)) > tol) continue;
        const double s = dot(v - mid, along);
        if (!face.present) {
            face.present = true;
            lo = hi = s;
            face.a = face.b = v;
        } else if (s < lo) {
            lo = s;
            face.a = v;
        } else if (s > hi) {
            hi = s;
            face.b = v;
        }
    }
    return face;
}

}  // namespace detail

inline ProximityGraph intersect(const ProximityGraph& a, const ProximityGraph& b) {
    detail::require_same_vertices(a, b);
    ProximityGraph g(a.positions());
    for (const auto& [i, j] : a.edges()) {
        if (b.has_edge(i, j)) g.add_edge(i, j);
    }
    return g;
}

inline ProximityGraph graph_union(const ProximityGraph& a, const ProximityGraph& b) {
    detail::require_same_vertices(a, b);
    ProximityGraph g = a;
    for (const auto& [i, j] : b.edges()) g.add_edge(i, j);
    return g;
}

/// True when every edge of `sub` is an edge of `super`.
inline bool is_subgraph(const ProximityGraph& sub, const ProximityGraph& super) {
    detail::require_same_vertices(sub, super);
    return std::all_of(sub.edges().begin(), sub.edges().end(),
                       [&](const Edge& e) { return super.has_edge(e.first, e.second); });
}

inline bool is_connected(const ProximityGraph& g) {
    const std::size_t n = g.size();
    if (n <= 1) return true;
    std::vector<std::vector<std::size_t>> adj(n);
    for (const auto& [a, b] : g.edges()) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    std::vector<bool> seen(n, false);
    std::queue<std::size_t> frontier;
    frontier.push(0);
    seen[0] = true;
    std::size_t reached = 1;
    while (!frontier.empty()) {
        const std::size_t v = frontier.front();
        frontier.pop();
        for (std::size_t w : adj[v]) {
            if (!seen[w]) {
                seen[w] = true;
                ++reached;
                frontier.push(w);
            }
        }
    }
    return reached == n;
}

/// Edge iff the (environment-restricted) Voronoi cells share a face or a vertex.
inline ProximityGraph delaunay_graph(const ConvexPolygon& q, std::span<const Point2> agents) {
    const auto cells = voronoi_cells(q, agents);
    const double tol = geometric_tolerance(q);
    ProximityGraph g({agents.begin(), agents.end()});
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            if (detail::shared_face(cells[i], agents[i], agents[j], tol).present ||
                detail::shared_face(cells[j], agents[j], agents[i], tol).present) {
                g.add_edge(i, j);
            }
        }
    }
    return g;
}

inline ProximityGraph disk_graph(std::span<const Point2> agents, double r) {
    if (r < 0.0) throw DomainError("disk_graph: negative radius");
    ProximityGraph g({agents.begin(), agents.end()});
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            if (distance(agents[i], agents[j]) <= r) g.add_edge(i, j);
        }
    }
    return g;
}

inline ProximityGraph r_delaunay_graph(const ConvexPolygon& q, std::span<const Point2> agents, double r) {
    return intersect(disk_graph(agents, r), delaunay_graph(q, agents));
}

/// Edge iff the shared Voronoi face meets B_{r/2}(p_i) (equivalently
/// B_{r/2}(p_j): face points are equidistant from both agents).
inline ProximityGraph limited_delaunay_graph(const ConvexPolygon& q, std::span<const Point2> agents, double r) {
    if (r < 0.0) throw DomainError("limited_delaunay_graph: negative radius");
    const auto cells = voronoi_cells(q, agents);
    const double tol = geometric_tolerance(q);
    ProximityGraph g({agents.begin(), agents.end()});
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            if (distance(agents[i], agents[j]) > r) continue;
            double reach = std::numeric_limits<double>::infinity();
            const auto fi = detail::shared_face(cells[i], agents[i], agents[j], tol);
            if (fi.present) reach = std::min(reach, point_segment_distance(agents[i], fi.a, fi.b));
            const auto fj = detail::shared_face(cells[j], agents[j], agents[i], tol);
            if (fj.present) reach = std::min(reach, point_segment_distance(agents[j], fj.a, fj.b));
            if (reach <= 0.5 * r + tol) g.add_edge(i, j);
        }
    }
    return g;
}

/// Limited-Delaunay neighbours of one agent computed from its own position
/// and the agents within distance r only. The environment is shared
/// knowledge, not neighbour state.
inline std::vector<std::size_t> local_limited_delaunay(const ConvexPolygon& q, const Point2& p,
                                                       std::span<const std::pair<std::size_t, Point2>> disk_neighbors,
                                                       double r) {
    const double tol = geometric_tolerance(q);
    ConvexPolygon cell = q;
    for (const auto& [j, pj] : disk_neighbors) {
        auto clipped = clip_by_bisector(cell, p, pj, static_cast<long>(j));
        if (!clipped) throw std::logic_error("local_limited_delaunay: empty local cell");
        cell = std::move(*clipped);
    }
    std::vector<std::size_t> out;
    for (const auto& [j, pj] : disk_neighbors) {
        const auto face = detail::shared_face(cell, p, pj, tol);
        if (face.present && point_segment_distance(p, face.a, face.b) <= 0.5 * r + tol) out.push_back(j);
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Edge iff no other point lies strictly inside the diametral disk.
inline ProximityGraph gabriel_graph(std::span<const Point2> agents) {
    ProximityGraph g({agents.begin(), agents.end()});
    for (std::size_t i = 0; i < agents.size(); ++i) {
        for (std::size_t j = i + 1; j < agents.size(); ++j) {
            const Point2 mid = (agents[i] + agents[j]) * 0.5;
            const double rad2 = 0.25 * norm2(agents[i] - agents[j]);
            bool empty = true;
            for (std::size_t k = 0; k < agents.size() && empty; ++k) {
                if (k == i || k == j) continue;
                empty = norm2(agents[k] - mid) >= rad2 * (1.0 - 1e-12);
            }
            if (empty) g.add_edge(i, j);
        }
    }
    return g;
}

/// Kruskal over the complete graph; equal weights resolved by (i, j) order.
inline ProximityGraph emst(std::span<const Point2> agents) {
    const std::size_t n = agents.size();
    struct Candidate {
        double w2;
        std::size_t i;
        std::size_t j;
    };
    std::vector<Candidate> cand;
    cand.reserve(n * (n - (n > 0)) / 2);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) cand.push_back({norm2(agents[i] - agents[j]), i, j});
    }
    std::sort(cand.begin(), cand.end(), [](const Candidate& a, const Candidate& b) {
        if (a.w2 != b.w2) return a.w2 < b.w2;
        if (a.i != b.i) return a.i < b.i;
        return a.j < b.j;
    });
    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    ProximityGraph g({agents.begin(), agents.end()});
    for (const auto& c : cand) {
        const std::size_t a = find(c.i);
        const std::size_t b = find(c.j);
        if (a == b) continue;
        parent[a] = b;
        g.add_edge(c.i, c.j);
        if (g.edge_count() + 1 == n) break;
    }
    return g;
}

}  // namespace covkit
