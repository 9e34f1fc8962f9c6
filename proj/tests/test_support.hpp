#pragma once

// Fixtures shared by the unit tests and the acceptance suite.

#include <cstdint>
#include <random>
#include <vector>

#include "covkit/density.hpp"
#include "covkit/geometry.hpp"

namespace covkit::testing {

inline ConvexPolygon unit_square() { return ConvexPolygon::from_vertices({{0, 0}, {1, 0}, {1, 1}, {0, 1}}); }

/// The eight-vertex environment used throughout the examples.
inline ConvexPolygon example_domain() {
    return ConvexPolygon::from_vertices({{0, 0},
                                         {2.125, 0},
                                         {2.9325, 1.5},
                                         {2.975, 1.6},
                                         {2.9325, 1.7},
                                         {2.295, 2.1},
                                         {0.85, 2.3},
                                         {0.17, 1.2}});
}

/// Five Gaussian bumps 5 exp(-6 |q - c|^2).
inline DensityField example_density() {
    DensityField phi;
    for (const Point2 c : {Point2{2, 0.25}, Point2{1, 2.25}, Point2{1.9, 1.9}, Point2{2.35, 1.25}, Point2{0.1, 0.1}}) {
        phi.gaussians.push_back({5.0, c, 6.0});
    }
    return phi;
}

/// n points uniform in q (rejection sampling), at least `sep` apart.
inline std::vector<Point2> random_agents(const ConvexPolygon& q, std::size_t n, std::uint64_t seed, double sep = 1e-3) {
    std::mt19937_64 rng(seed);
    double x0 = q.vertex(0).x, x1 = x0, y0 = q.vertex(0).y, y1 = y0;
    for (const auto& v : q.vertices()) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    std::vector<Point2> out;
    while (out.size() < n) {
        const Point2 p{ux(rng), uy(rng)};
        if (!q.contains(p)) continue;
        bool far = true;
        for (const auto& o : out) far = far && distance(o, p) >= sep;
        if (far) out.push_back(p);
    }
    return out;
}

}  // namespace covkit::testing
