#pragma once

// Scenario files: a YAML document describing the environment, density,
// performance preset, agents and run settings. See docs/formats.md.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "covkit/dynamics.hpp"
#include "covkit/errors.hpp"
#include "covkit/geometry.hpp"
#include "covkit/performance.hpp"

namespace covkit::cli {

/// Validation failure tied to a line of the scenario file (1-based; 0 if unknown).
class ScenarioError : public ValidationError {
public:
    ScenarioError(const std::string& what, int line)
        : ValidationError(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

inline const std::vector<std::string>& all_layers() {
    static const std::vector<std::string> layers{"density", "cells", "balls", "edges", "trails"};
    return layers;
}

struct PerformanceSpec {
    std::string preset = "centroid";  // centroid | area | mixed_continuous | mixed_discontinuous
    std::optional<double> radius;     // R; defaults to r/2
    std::optional<double> b;          // mixed_discontinuous tail value; defaults to -diam(Q)^2
    bool truncate = false;            // replace f by its r/2 truncation
    friend bool operator==(const PerformanceSpec&, const PerformanceSpec&) = default;
};

struct AgentsSpec {
    std::vector<Point2> positions;
    std::optional<long> count;  // sample this many uniformly in Q when positions is empty
    std::uint64_t seed = 0;
    friend bool operator==(const AgentsSpec&, const AgentsSpec&) = default;
};

struct RenderSettings {
    int width = 800;
    int height = 800;
    std::vector<std::string> layers = all_layers();
    friend bool operator==(const RenderSettings&, const RenderSettings&) = default;
};

struct OutputsSpec {
    std::string dir = "covkit_out";
    std::string format = "csv";
    RenderSettings render;
    friend bool operator==(const OutputsSpec&, const OutputsSpec&) = default;
};

struct ScenarioFile {
    std::vector<Point2> polygon;
    DensityField density;
    PerformanceSpec performance;
    double radius = 0.0;
    AgentsSpec agents;
    Algorithm algorithm = Algorithm::line_search;
    double dt = 0.05;
    long max_steps = 10000;
    std::optional<double> grad_tol;
    QuadratureSpec quadrature;
    OutputsSpec outputs;

    // Source lines for error reporting; not part of equality.
    std::map<std::string, int> lines;

    friend bool operator==(const ScenarioFile& a, const ScenarioFile& b) {
        return a.polygon == b.polygon && a.density == b.density && a.performance == b.performance &&
               a.radius == b.radius && a.agents == b.agents && a.algorithm == b.algorithm && a.dt == b.dt &&
               a.max_steps == b.max_steps && a.grad_tol == b.grad_tol &&
               a.quadrature.rel_tol == b.quadrature.rel_tol && a.quadrature.abs_tol == b.quadrature.abs_tol &&
               a.quadrature.max_subdivisions == b.quadrature.max_subdivisions && a.outputs == b.outputs;
    }

    int line_of(const std::string& key) const {
        auto it = lines.find(key);
        return it == lines.end() ? 0 : it->second;
    }
};

namespace detail {

inline int line_of(const YAML::Node& n) { return n.Mark().line >= 0 ? n.Mark().line + 1 : 0; }

inline void check_keys(const YAML::Node& map, const std::vector<std::string>& allowed, const std::string& where) {
    for (const auto& kv : map) {
        const auto key = kv.first.as<std::string>();
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
            throw ScenarioError("unknown key '" + key + "' in " + where, line_of(kv.first));
        }
    }
}

inline const YAML::Node require_map(const YAML::Node& n, const std::string& what) {
    if (!n.IsMap()) throw ScenarioError(what + " must be a mapping", line_of(n));
    return n;
}

template <class T>
T scalar(const YAML::Node& n, const std::string& what) {
    if (!n.IsScalar()) throw ScenarioError(what + " must be a scalar", line_of(n));
    try {
        return n.as<T>();
    } catch (const YAML::Exception&) {
        throw ScenarioError(what + " has an invalid value '" + n.Scalar() + "'", line_of(n));
    }
}

inline double real(const YAML::Node& n, const std::string& what) {
    const double v = scalar<double>(n, what);
    if (!std::isfinite(v)) throw ScenarioError(what + " must be finite", line_of(n));
    return v;
}

inline Point2 point(const YAML::Node& n, const std::string& what) {
    if (!n.IsSequence() || n.size() != 2) throw ScenarioError(what + " must be a pair [x, y]", line_of(n));
    return {real(n[0], what + ".x"), real(n[1], what + ".y")};
}

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string fmt_point(const Point2& p) { return "[" + fmt(p.x) + ", " + fmt(p.y) + "]"; }

}  // namespace detail

inline Algorithm parse_algorithm(const std::string& s, int line = 0) {
    if (s == "continuous_euler") return Algorithm::continuous_euler;
    if (s == "line_search") return Algorithm::line_search;
    if (s == "max_step") return Algorithm::max_step;
    throw ScenarioError("unknown algorithm '" + s + "' (continuous_euler | line_search | max_step)", line);
}

inline ScenarioFile parse_scenario_text(const std::string& text) {
    using namespace detail;
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::ParserException& e) {
        throw ScenarioError("YAML syntax error: " + e.msg, e.mark.line + 1);
    }
    if (!root.IsMap()) throw ScenarioError("scenario must be a YAML mapping", 1);
    check_keys(root,
               {"polygon", "density", "performance", "radius", "agents", "algorithm", "dt", "max_steps", "grad_tol",
                "quadrature", "outputs"},
               "scenario");

    ScenarioFile sf;
    auto need = [&](const char* key) {
        if (!root[key]) throw ScenarioError(std::string("missing required key '") + key + "'", 0);
        return root[key];
    };

    const YAML::Node poly = need("polygon");
    if (!poly.IsSequence()) throw ScenarioError("polygon must be a list of [x, y] vertices", line_of(poly));
    sf.lines["polygon"] = line_of(poly);
    for (std::size_t k = 0; k < poly.size(); ++k) {
        const std::string key = "polygon[" + std::to_string(k) + "]";
        sf.polygon.push_back(point(poly[k], key));
        sf.lines[key] = line_of(poly[k]);
    }

    if (const auto d = root["density"]) {
        require_map(d, "density");
        check_keys(d, {"uniform", "gaussians"}, "density");
        sf.lines["density"] = line_of(d);
        if (d["uniform"]) sf.density.uniform_offset = real(d["uniform"], "density.uniform");
        if (const auto gs = d["gaussians"]) {
            if (!gs.IsSequence()) throw ScenarioError("density.gaussians must be a list", line_of(gs));
            for (std::size_t k = 0; k < gs.size(); ++k) {
                const std::string key = "density.gaussians[" + std::to_string(k) + "]";
                require_map(gs[k], key);
                check_keys(gs[k], {"amplitude", "center", "sharpness"}, key);
                for (const char* field : {"amplitude", "center", "sharpness"}) {
                    if (!gs[k][field]) throw ScenarioError(key + " is missing '" + field + "'", line_of(gs[k]));
                }
                GaussianBump g;
                g.amplitude = real(gs[k]["amplitude"], key + ".amplitude");
                g.center = point(gs[k]["center"], key + ".center");
                g.sharpness = real(gs[k]["sharpness"], key + ".sharpness");
                sf.density.gaussians.push_back(g);
                sf.lines[key] = line_of(gs[k]);
            }
        }
    } else {
        sf.density.uniform_offset = 1.0;
    }

    if (const auto pf = root["performance"]) {
        require_map(pf, "performance");
        check_keys(pf, {"preset", "R", "b", "truncate"}, "performance");
        sf.lines["performance"] = line_of(pf);
        if (pf["preset"]) sf.performance.preset = scalar<std::string>(pf["preset"], "performance.preset");
        if (pf["R"]) sf.performance.radius = real(pf["R"], "performance.R");
        if (pf["b"]) sf.performance.b = real(pf["b"], "performance.b");
        if (pf["truncate"]) sf.performance.truncate = scalar<bool>(pf["truncate"], "performance.truncate");
    }

    sf.radius = real(need("radius"), "radius");
    sf.lines["radius"] = line_of(root["radius"]);

    const YAML::Node ag = need("agents");
    require_map(ag, "agents");
    check_keys(ag, {"positions", "count", "seed"}, "agents");
    sf.lines["agents"] = line_of(ag);
    if (const auto ps = ag["positions"]) {
        if (!ps.IsSequence()) throw ScenarioError("agents.positions must be a list of [x, y]", line_of(ps));
        for (std::size_t k = 0; k < ps.size(); ++k) {
            const std::string key = "agents.positions[" + std::to_string(k) + "]";
            sf.agents.positions.push_back(point(ps[k], key));
            sf.lines[key] = line_of(ps[k]);
        }
    }
    if (ag["count"]) sf.agents.count = scalar<long>(ag["count"], "agents.count");
    if (ag["seed"]) sf.agents.seed = scalar<std::uint64_t>(ag["seed"], "agents.seed");
    if (sf.agents.positions.empty() && !sf.agents.count) {
        throw ScenarioError("agents needs either 'positions' or 'count'", line_of(ag));
    }
    if (sf.agents.count && *sf.agents.count <= 0) {
        throw ScenarioError("agents.count must be positive", line_of(ag["count"]));
    }

    if (root["algorithm"]) {
        sf.algorithm = parse_algorithm(scalar<std::string>(root["algorithm"], "algorithm"), line_of(root["algorithm"]));
    }
    if (root["dt"]) sf.dt = real(root["dt"], "dt");
    if (root["max_steps"]) sf.max_steps = scalar<long>(root["max_steps"], "max_steps");
    if (root["grad_tol"]) sf.grad_tol = real(root["grad_tol"], "grad_tol");
    for (const char* key : {"dt", "max_steps", "grad_tol", "algorithm"}) {
        if (root[key]) sf.lines[key] = line_of(root[key]);
    }

    if (const auto qd = root["quadrature"]) {
        require_map(qd, "quadrature");
        check_keys(qd, {"rel_tol", "abs_tol", "max_subdivisions"}, "quadrature");
        sf.lines["quadrature"] = line_of(qd);
        if (qd["rel_tol"]) sf.quadrature.rel_tol = real(qd["rel_tol"], "quadrature.rel_tol");
        if (qd["abs_tol"]) sf.quadrature.abs_tol = real(qd["abs_tol"], "quadrature.abs_tol");
        if (qd["max_subdivisions"]) {
            sf.quadrature.max_subdivisions = scalar<int>(qd["max_subdivisions"], "quadrature.max_subdivisions");
        }
    }

    if (const auto out = root["outputs"]) {
        require_map(out, "outputs");
        check_keys(out, {"dir", "format", "render"}, "outputs");
        if (out["dir"]) sf.outputs.dir = scalar<std::string>(out["dir"], "outputs.dir");
        if (out["format"]) sf.outputs.format = scalar<std::string>(out["format"], "outputs.format");
        if (sf.outputs.format != "csv" && sf.outputs.format != "json") {
            throw ScenarioError("outputs.format must be csv or json", line_of(out["format"]));
        }
        if (const auto r = out["render"]) {
            require_map(r, "outputs.render");
            check_keys(r, {"width", "height", "layers"}, "outputs.render");
            if (r["width"]) sf.outputs.render.width = scalar<int>(r["width"], "outputs.render.width");
            if (r["height"]) sf.outputs.render.height = scalar<int>(r["height"], "outputs.render.height");
            if (sf.outputs.render.width <= 0 || sf.outputs.render.height <= 0) {
                throw ScenarioError("render width and height must be positive", line_of(r));
            }
            if (const auto ls = r["layers"]) {
                if (!ls.IsSequence()) throw ScenarioError("outputs.render.layers must be a list", line_of(ls));
                sf.outputs.render.layers.clear();
                for (const auto& l : ls) {
                    const auto name = scalar<std::string>(l, "layer");
                    const auto& known = all_layers();
                    if (std::find(known.begin(), known.end(), name) == known.end()) {
                        throw ScenarioError("unknown render layer '" + name + "'", line_of(l));
                    }
                    sf.outputs.render.layers.push_back(name);
                }
                if (sf.outputs.render.layers.empty()) {
                    throw ScenarioError("outputs.render.layers needs at least one layer", line_of(ls));
                }
            }
        }
    }
    return sf;
}

inline ScenarioFile parse_scenario_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ScenarioError("cannot open scenario file '" + path + "'", 0);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scenario_text(ss.str());
}

/// Canonical text form; parse_scenario_text(serialize(s)) == s.
inline std::string serialize(const ScenarioFile& sf) {
    using detail::fmt;
    using detail::fmt_point;
    std::ostringstream os;
    os << "# covkit scenario v1\n";
    os << "polygon:\n";
    for (const auto& v : sf.polygon) os << "  - " << fmt_point(v) << "\n";
    os << "density:\n";
    os << "  uniform: " << fmt(sf.density.uniform_offset) << "\n";
    os << "  gaussians:";
    if (sf.density.gaussians.empty()) os << " []";
    os << "\n";
    for (const auto& g : sf.density.gaussians) {
        os << "    - {amplitude: " << fmt(g.amplitude) << ", center: " << fmt_point(g.center)
           << ", sharpness: " << fmt(g.sharpness) << "}\n";
    }
    os << "performance:\n";
    os << "  preset: " << sf.performance.preset << "\n";
    if (sf.performance.radius) os << "  R: " << fmt(*sf.performance.radius) << "\n";
    if (sf.performance.b) os << "  b: " << fmt(*sf.performance.b) << "\n";
    os << "  truncate: " << (sf.performance.truncate ? "true" : "false") << "\n";
    os << "radius: " << fmt(sf.radius) << "\n";
    os << "agents:\n";
    if (!sf.agents.positions.empty()) {
        os << "  positions:\n";
        for (const auto& p : sf.agents.positions) os << "    - " << fmt_point(p) << "\n";
    }
    if (sf.agents.count) os << "  count: " << *sf.agents.count << "\n";
    os << "  seed: " << sf.agents.seed << "\n";
    os << "algorithm: " << to_string(sf.algorithm) << "\n";
    os << "dt: " << fmt(sf.dt) << "\n";
    os << "max_steps: " << sf.max_steps << "\n";
    if (sf.grad_tol) os << "grad_tol: " << fmt(*sf.grad_tol) << "\n";
    os << "quadrature:\n";
    os << "  rel_tol: " << fmt(sf.quadrature.rel_tol) << "\n";
    os << "  abs_tol: " << fmt(sf.quadrature.abs_tol) << "\n";
    os << "  max_subdivisions: " << sf.quadrature.max_subdivisions << "\n";
    os << "outputs:\n";
    os << "  dir: \"" << sf.outputs.dir << "\"\n";
    os << "  format: " << sf.outputs.format << "\n";
    os << "  render:\n";
    os << "    width: " << sf.outputs.render.width << "\n";
    os << "    height: " << sf.outputs.render.height << "\n";
    os << "    layers: [";
    for (std::size_t k = 0; k < sf.outputs.render.layers.size(); ++k) {
        os << (k ? ", " : "") << sf.outputs.render.layers[k];
    }
    os << "]\n";
    return os.str();
}

namespace detail {

// Uniform double in [0, 1) from the top 53 bits; portable across standard libraries.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

/// Rejection-sample `count` agents uniformly in q, pairwise separated by at
/// least the minimum agent separation.
inline std::vector<Point2> sample_agents(const ConvexPolygon& q, long count, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    double x0 = q.vertex(0).x, x1 = x0, y0 = q.vertex(0).y, y1 = y0;
    for (const auto& v : q.vertices()) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    const double sep = min_agent_separation(q);
    std::vector<Point2> out;
    long attempts = 0;
    while (static_cast<long>(out.size()) < count) {
        if (++attempts > 1000000 + 1000 * count) throw ScenarioError("could not sample agents inside the polygon", 0);
        const Point2 p{x0 + (x1 - x0) * detail::unit_uniform(rng), y0 + (y1 - y0) * detail::unit_uniform(rng)};
        if (!q.contains(p)) continue;
        bool far = true;
        for (const auto& o : out) far = far && distance(o, p) >= sep;
        if (far) out.push_back(p);
    }
    return out;
}

struct ResolvedScenario {
    ScenarioFile file;  // with explicit agent positions
    Scenario scenario;
    PerformanceFunction base_performance;  // before truncation
    std::vector<std::string> warnings;
};

inline PerformanceFunction build_performance(const PerformanceSpec& ps, double r, double diam, int line = 0) {
    const double radius = ps.radius.value_or(0.5 * r);
    if (ps.preset == "centroid") return presets::centroid();
    if (!(radius > 0.0)) throw ScenarioError("performance.R must be > 0", line);
    if (ps.preset == "area") return presets::area(radius);
    if (ps.preset == "mixed_continuous") return presets::mixed_continuous(radius);
    if (ps.preset == "mixed_discontinuous") return presets::mixed_discontinuous(radius, ps.b.value_or(-diam * diam));
    throw ScenarioError("unknown performance preset '" + ps.preset +
                            "' (centroid | area | mixed_continuous | mixed_discontinuous)",
                        line);
}

/// Validate and turn a parsed file into a runnable Scenario. A seed override
/// replaces agents.seed before sampling.
inline ResolvedScenario resolve(const ScenarioFile& sf, std::optional<std::uint64_t> seed_override = std::nullopt) {
    ResolvedScenario rs;
    rs.file = sf;
    if (seed_override) rs.file.agents.seed = *seed_override;
    Scenario& sc = rs.scenario;

    try {
        sc.q = ConvexPolygon::from_vertices(sf.polygon);
    } catch (const ValidationError& e) {
        const int line = e.index() >= 0 ? sf.line_of("polygon[" + std::to_string(e.index()) + "]")
                                        : sf.line_of("polygon");
        throw ScenarioError(std::string("polygon: ") + e.what(), line);
    }
    try {
        sf.density.validate();
    } catch (const ValidationError& e) {
        const int line = e.index() >= 0 ? sf.line_of("density.gaussians[" + std::to_string(e.index()) + "]")
                                        : sf.line_of("density");
        throw ScenarioError(std::string("density: ") + e.what(), line);
    }
    sc.density = sf.density;
    if (!(sf.radius > 0.0)) throw ScenarioError("radius must be > 0", sf.line_of("radius"));
    sc.r = sf.radius;
    const double diam = polygon_diameter(sc.q);

    try {
        rs.base_performance = build_performance(sf.performance, sf.radius, diam, sf.line_of("performance"));
        sc.performance = sf.performance.truncate ? truncate_performance(rs.base_performance, sf.radius, diam)
                                                 : rs.base_performance;
    } catch (const ScenarioError&) {
        throw;
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("performance: ") + e.what(), sf.line_of("performance"));
    }
    for (const auto& w : sc.performance.warnings()) rs.warnings.push_back("performance: " + w);

    if (rs.file.agents.positions.empty()) {
        rs.file.agents.positions = sample_agents(sc.q, *sf.agents.count, rs.file.agents.seed);
    } else if (sf.agents.count && *sf.agents.count != static_cast<long>(sf.agents.positions.size())) {
        throw ScenarioError("agents.count disagrees with the number of positions", sf.line_of("agents"));
    }
    sc.agents = rs.file.agents.positions;
    sc.seed = rs.file.agents.seed;
    try {
        validate_agents(sc.q, sc.agents, geometric_tolerance(sc.q), min_agent_separation(sc.q));
    } catch (const CoincidentAgents& e) {
        throw ScenarioError("agents " + std::to_string(e.first()) + " and " + std::to_string(e.second()) +
                                " coincide (CoincidentAgents): " + e.what(),
                            sf.line_of("agents.positions[" + std::to_string(e.second()) + "]"));
    } catch (const ValidationError& e) {
        throw ScenarioError(e.what(), sf.line_of("agents.positions[" + std::to_string(e.index()) + "]"));
    }

    sc.algorithm = sf.algorithm;
    sc.dt = sf.dt;
    sc.max_steps = sf.max_steps;
    sc.grad_tol = sf.grad_tol;
    sc.quadrature = sf.quadrature;
    try {
        sc.validate();
    } catch (const ValidationError& e) {
        throw ScenarioError(e.what(), 0);
    }
    return rs;
}

}  // namespace covkit::cli
