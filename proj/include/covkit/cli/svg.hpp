#pragma once

// Static SVG snapshots: density bands, Voronoi cells, the regions
// V_i ∩ B_{r/2}(p_i), limited-Delaunay edges, trails and agents. Every
// group id is always present; a disabled layer yields an empty group.

#include <algorithm>
#include <array>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "covkit/density.hpp"
#include "covkit/geometry.hpp"
#include "covkit/proximity.hpp"

namespace covkit::cli {

struct RenderInput {
    ConvexPolygon q;
    std::vector<Point2> agents;
    DensityField density;
    double r = 0.0;
    std::vector<std::vector<Point2>> trails;  // per agent, oldest first
    std::vector<std::string> layers;
    int width = 800;
    int height = 800;
    std::string title;
};

inline constexpr int kDensityGrid = 200;
inline constexpr int kDensityBands = 8;

namespace detail {

struct Canvas {
    double x0 = 0.0, y0 = 0.0, scale = 1.0;
    double pad_x = 0.0, pad_y = 0.0;  // pixels left and below the drawing
    int height = 0;

    double sx(double x) const { return pad_x + (x - x0) * scale; }
    double sy(double y) const { return height - pad_y - (y - y0) * scale; }
};

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string xml_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string point_str(const Canvas& cv, const Point2& p) { return num(cv.sx(p.x)) + "," + num(cv.sy(p.y)); }

inline std::string polygon_path(const Canvas& cv, std::span<const Point2> pts) {
    std::string d;
    for (std::size_t k = 0; k < pts.size(); ++k) d += (k ? "L" : "M") + point_str(cv, pts[k]);
    return d + "Z";
}

// Boundary loop of a cell-ball region. Arcs are counterclockwise in world
// coordinates, which is sweep-flag 0 once y is flipped; arcs are split so
// no piece exceeds a half turn.
inline std::string region_path(const Canvas& cv, const CellRegion& region) {
    std::string d;
    bool first = true;
    for (const auto& piece : region.boundary) {
        if (first) {
            d += "M" + point_str(cv, piece.start);
            first = false;
        }
        if (piece.kind != BoundaryPiece::Kind::arc) {
            d += "L" + point_str(cv, piece.end);
            continue;
        }
        const int parts = piece.arc_span() > 3.0 ? 4 : 1;
        const double rad = piece.radius * cv.scale;
        for (int k = 1; k <= parts; ++k) {
            const double theta = piece.theta_lo + piece.arc_span() * k / parts;
            const Point2 end = k == parts ? piece.end : piece.center + unit_from_angle(theta) * piece.radius;
            d += "A" + num(rad) + "," + num(rad) + " 0 0 0 " + point_str(cv, end);
        }
    }
    return d + "Z";
}

inline std::string band_color(int k) {
    // Light-to-dark blue ramp.
    static const std::array<const char*, kDensityBands> ramp = {"#f7fbff", "#deebf7", "#c6dbef", "#9ecae1",
                                                                "#6baed6", "#4292c6", "#2171b5", "#08519c"};
    return ramp[static_cast<std::size_t>(std::clamp(k, 0, kDensityBands - 1))];
}

// Superlevel set {phi >= level} on one grid square via marching squares
// (linear interpolation along the square's edges).
inline std::vector<Point2> square_superlevel(const std::array<Point2, 4>& corner, const std::array<double, 4>& v,
                                             double level) {
    std::vector<Point2> out;
    for (std::size_t k = 0; k < 4; ++k) {
        const std::size_t e = (k + 1) % 4;
        const bool in_s = v[k] >= level;
        const bool in_e = v[e] >= level;
        if (in_s) out.push_back(corner[k]);
        if (in_s != in_e) {
            const double t = (level - v[k]) / (v[e] - v[k]);
            out.push_back(corner[k] + (corner[e] - corner[k]) * t);
        }
    }
    return out;
}

inline void density_layer(std::ostream& os, const Canvas& cv, const RenderInput& in) {
    double x0 = in.q.vertex(0).x, x1 = x0, y0 = in.q.vertex(0).y, y1 = y0;
    for (const auto& v : in.q.vertices()) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    const int n = kDensityGrid;
    const double hx = (x1 - x0) / (n - 1);
    const double hy = (y1 - y0) / (n - 1);
    std::vector<double> val(static_cast<std::size_t>(n) * n);
    double vmax = 0.0;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            const double v = in.density(Point2{x0 + i * hx, y0 + j * hy});
            val[static_cast<std::size_t>(j) * n + i] = v;
            vmax = std::max(vmax, v);
        }
    }
    auto at = [&](int i, int j) { return val[static_cast<std::size_t>(j) * n + i]; };
    os << "<rect x=\"" << num(cv.sx(x0)) << "\" y=\"" << num(cv.sy(y1)) << "\" width=\"" << num((x1 - x0) * cv.scale)
       << "\" height=\"" << num((y1 - y0) * cv.scale) << "\" fill=\"" << band_color(0) << "\"/>\n";
    if (!(vmax > 0.0)) return;
    for (int band = 1; band < kDensityBands; ++band) {
        const double level = vmax * band / kDensityBands;
        std::string d;
        for (int j = 0; j + 1 < n; ++j) {
            int run_start = -1;
            auto flush = [&](int end) {
                if (run_start < 0) return;
                const std::array<Point2, 4> rect = {Point2{x0 + run_start * hx, y0 + j * hy},
                                                    Point2{x0 + end * hx, y0 + j * hy},
                                                    Point2{x0 + end * hx, y0 + (j + 1) * hy},
                                                    Point2{x0 + run_start * hx, y0 + (j + 1) * hy}};
                d += polygon_path(cv, rect);
                run_start = -1;
            };
            for (int i = 0; i + 1 < n; ++i) {
                const std::array<double, 4> v = {at(i, j), at(i + 1, j), at(i + 1, j + 1), at(i, j + 1)};
                const bool full = std::all_of(v.begin(), v.end(), [&](double x) { return x >= level; });
                if (full) {
                    if (run_start < 0) run_start = i;
                    continue;
                }
                flush(i);
                if (std::none_of(v.begin(), v.end(), [&](double x) { return x >= level; })) continue;
                const std::array<Point2, 4> sq = {Point2{x0 + i * hx, y0 + j * hy}, Point2{x0 + (i + 1) * hx, y0 + j * hy},
                                                  Point2{x0 + (i + 1) * hx, y0 + (j + 1) * hy},
                                                  Point2{x0 + i * hx, y0 + (j + 1) * hy}};
                const auto poly = square_superlevel(sq, v, level);
                if (poly.size() >= 3) d += polygon_path(cv, poly);
            }
            flush(n - 1);
        }
        if (d.empty()) continue;
        const std::string c = band_color(band);
        os << "<path fill=\"" << c << "\" stroke=\"" << c << "\" stroke-width=\"0.3\" d=\"" << d << "\"/>\n";
    }
}

}  // namespace detail

inline bool layer_on(const RenderInput& in, const std::string& layer) {
    return std::find(in.layers.begin(), in.layers.end(), layer) != in.layers.end();
}

inline std::string render_svg(const RenderInput& in) {
    detail::Canvas cv;
    double x0 = in.q.vertex(0).x, x1 = x0, y0 = in.q.vertex(0).y, y1 = y0;
    for (const auto& v : in.q.vertices()) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    const double margin = 0.04 * std::min(in.width, in.height);
    cv.scale = std::min((in.width - 2 * margin) / (x1 - x0), (in.height - 2 * margin) / (y1 - y0));
    // Center the environment in the canvas.
    cv.pad_x = 0.5 * (in.width - cv.scale * (x1 - x0));
    cv.pad_y = 0.5 * (in.height - cv.scale * (y1 - y0));
    cv.x0 = x0;
    cv.y0 = y0;
    cv.height = in.height;

    using detail::num;
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << in.width << "\" height=\"" << in.height
       << "\" viewBox=\"0 0 " << in.width << ' ' << in.height << "\">\n";
    os << "<title>" << detail::xml_escape(in.title) << "</title>\n";
    const std::string env_path = detail::polygon_path(cv, in.q.vertices());
    os << "<defs><clipPath id=\"clip-environment\"><path d=\"" << env_path << "\"/></clipPath></defs>\n";
    os << "<rect id=\"background\" width=\"" << in.width << "\" height=\"" << in.height << "\" fill=\"#ffffff\"/>\n";

    os << "<g id=\"density\" clip-path=\"url(#clip-environment)\">\n";
    if (layer_on(in, "density")) detail::density_layer(os, cv, in);
    os << "</g>\n";

    os << "<g id=\"environment\" fill=\"none\" stroke=\"#000000\" stroke-width=\"2\">\n<path d=\"" << env_path
       << "\"/>\n</g>\n";

    const bool need_cells = layer_on(in, "cells") || layer_on(in, "balls");
    const auto cells = need_cells ? voronoi_cells(in.q, in.agents) : std::vector<ConvexPolygon>{};

    os << "<g id=\"balls\" fill=\"#bdbdbd\" fill-opacity=\"0.6\" stroke=\"none\">\n";
    if (layer_on(in, "balls")) {
        for (std::size_t i = 0; i < in.agents.size(); ++i) {
            const auto region = cell_ball_region(cells[i], ClosedBall{in.agents[i], 0.5 * in.r}, static_cast<long>(i));
            os << "<path d=\"" << detail::region_path(cv, region) << "\"/>\n";
        }
    }
    os << "</g>\n";

    os << "<g id=\"cells\" fill=\"none\" stroke=\"#333333\" stroke-width=\"1\">\n";
    if (layer_on(in, "cells")) {
        for (const auto& c : cells) os << "<path d=\"" << detail::polygon_path(cv, c.vertices()) << "\"/>\n";
    }
    os << "</g>\n";

    os << "<g id=\"edges\" stroke=\"#d62728\" stroke-width=\"1.5\">\n";
    if (layer_on(in, "edges")) {
        const auto g = limited_delaunay_graph(in.q, in.agents, in.r);
        for (const auto& [a, b] : g.edges()) {
            os << "<line x1=\"" << num(cv.sx(in.agents[a].x)) << "\" y1=\"" << num(cv.sy(in.agents[a].y))
               << "\" x2=\"" << num(cv.sx(in.agents[b].x)) << "\" y2=\"" << num(cv.sy(in.agents[b].y)) << "\"/>\n";
        }
    }
    os << "</g>\n";

    os << "<g id=\"trails\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1\">\n";
    if (layer_on(in, "trails")) {
        for (const auto& trail : in.trails) {
            if (trail.size() < 2) continue;
            os << "<polyline points=\"";
            for (std::size_t k = 0; k < trail.size(); ++k) os << (k ? " " : "") << detail::point_str(cv, trail[k]);
            os << "\"/>\n";
        }
    }
    os << "</g>\n";

    os << "<g id=\"agents\" fill=\"#000000\">\n";
    for (const auto& p : in.agents) {
        os << "<circle cx=\"" << num(cv.sx(p.x)) << "\" cy=\"" << num(cv.sy(p.y)) << "\" r=\"3\"/>\n";
    }
    os << "</g>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace covkit::cli
