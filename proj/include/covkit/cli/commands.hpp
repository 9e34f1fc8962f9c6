#pragma once

// The five subcommands. Each writes a machine-readable report to `out`
// (CSV blocks or one JSON document), diagnostics to `err`, and returns the
// process exit code: 0 ok, 1 runtime failure, 2 validation failure.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>
#include <yaml-cpp/yaml.h>

#include "covkit/cli/csv.hpp"
#include "covkit/cli/scenario_file.hpp"
#include "covkit/cli/svg.hpp"
#include "covkit/dynamics.hpp"
#include "covkit/objective.hpp"
#include "covkit/proximity.hpp"

namespace covkit::cli {

enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitValidation = 2 };

struct CommandOptions {
    std::string scenario_path;
    std::optional<std::string> out_dir;  // overrides outputs.dir
    std::optional<std::uint64_t> seed;   // overrides agents.seed
    std::optional<std::string> format;   // overrides outputs.format
    bool assert_monotone = false;
    std::string frame = "initial";       // initial | final | step index
};

using Json = nlohmann::ordered_json;

namespace detail {

inline std::string json_cell(const Json& v) {
    if (v.is_string()) return v.get<std::string>();
    if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
    if (v.is_number_float()) return csv_real(v.get<double>());
    if (v.is_null()) return "nan";
    return v.dump();
}

// Reals that may be undefined travel as null in JSON and "nan" in CSV.
inline Json real_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

// One header row plus one value row.
inline void csv_record(std::ostream& os, const std::string& kind, const Json& record) {
    csv_banner(os, kind);
    std::string header, row;
    bool first = true;
    for (const auto& [key, value] : record.items()) {
        header += (first ? "" : ",") + key;
        row += (first ? "" : ",") + json_cell(value);
        first = false;
    }
    os << header << '\n' << row << '\n';
}

inline void csv_table(std::ostream& os, const std::string& kind, const Json& rows) {
    csv_banner(os, kind);
    if (rows.empty()) return;
    bool first = true;
    for (const auto& [key, value] : rows.front().items()) {
        os << (first ? "" : ",") << key;
        first = false;
    }
    os << '\n';
    for (const auto& row : rows) {
        first = true;
        for (const auto& [key, value] : row.items()) {
            os << (first ? "" : ",") << json_cell(value);
            first = false;
        }
        os << '\n';
    }
}

// Files are staged under a temporary name and renamed on commit; anything
// left uncommitted is deleted, so an aborted command leaves no partial files.
class OutputTransaction {
public:
    explicit OutputTransaction(std::filesystem::path dir) : dir_(std::move(dir)) {}
    OutputTransaction(const OutputTransaction&) = delete;
    OutputTransaction& operator=(const OutputTransaction&) = delete;
    ~OutputTransaction() {
        std::error_code ec;
        for (const auto& [tmp, final_path] : staged_) std::filesystem::remove(tmp, ec);
    }

    void write(const std::string& name, const std::string& content) {
        std::filesystem::create_directories(dir_);
        const auto final_path = dir_ / name;
        auto tmp = final_path;
        tmp += ".partial";
        std::ofstream os(tmp, std::ios::binary);
        staged_.emplace_back(tmp, final_path);
        os << content;
        os.close();
        if (!os) throw std::runtime_error("cannot write " + final_path.string());
    }

    std::vector<std::filesystem::path> commit() {
        std::vector<std::filesystem::path> written;
        for (const auto& [tmp, final_path] : staged_) {
            std::filesystem::rename(tmp, final_path);
            written.push_back(final_path);
        }
        staged_.clear();
        return written;
    }

private:
    std::filesystem::path dir_;
    std::vector<std::pair<std::filesystem::path, std::filesystem::path>> staged_;
};

inline std::string output_format(const CommandOptions& opt, const ResolvedScenario& rs) {
    const std::string f = opt.format.value_or(rs.file.outputs.format);
    if (f != "csv" && f != "json") throw ValidationError("--format must be csv or json");
    return f;
}

inline std::filesystem::path output_dir(const CommandOptions& opt, const ResolvedScenario& rs) {
    return opt.out_dir.value_or(rs.file.outputs.dir);
}

inline ResolvedScenario load(const CommandOptions& opt, std::ostream& err) {
    auto rs = resolve(parse_scenario_file(opt.scenario_path), opt.seed);
    for (const auto& w : rs.warnings) err << "covkit: warning: " << w << '\n';
    return rs;
}

inline double coverage_fraction(const Scenario& sc, std::span<const Point2> agents, double total) {
    if (!(total > 0.0)) return std::numeric_limits<double>::quiet_NaN();
    return covered_weighted_area(sc.q, agents, 0.5 * sc.r, sc.density, sc.quadrature) / total;
}

}  // namespace detail

inline int cmd_validate(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    const auto rs = detail::load(opt, err);
    const auto format = detail::output_format(opt, rs);
    const Scenario& sc = rs.scenario;
    Json rec;
    rec["status"] = "valid";
    rec["vertices"] = sc.q.size();
    rec["convex"] = true;
    rec["agents"] = sc.agents.size();
    rec["agents_admissible"] = true;
    rec["density_sup"] = sc.density.sup();
    rec["density_nonnegative"] = true;
    rec["performance"] = rs.file.performance.preset;
    rec["performance_nonincreasing"] = sc.performance.warnings().empty();
    rec["diam"] = polygon_diameter(sc.q);
    rec["area"] = sc.q.area();
    rec["area_phi"] = weighted_area(sc.q, sc.density, sc.quadrature);
    if (format == "json") {
        out << rec.dump(2) << '\n';
    } else {
        detail::csv_record(out, "validate", rec);
    }
    return kExitOk;
}

inline int cmd_eval(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    const auto rs = detail::load(opt, err);
    const auto format = detail::output_format(opt, rs);
    const Scenario& sc = rs.scenario;
    const auto cells = voronoi_cells(sc.q, sc.agents);
    const auto ev = evaluate_on_cells(sc.agents, cells, sc.performance, sc.density, sc.quadrature, true);
    const double total = weighted_area(sc.q, sc.density, sc.quadrature);

    // The bounds are stated for f with f(0) = 0; shift the untruncated
    // preset accordingly. Undefined bounds are reported as nan.
    const double nan = std::numeric_limits<double>::quiet_NaN();
    double beta = nan, pi = nan, kappa = nan, h_truncated = nan;
    try {
        const auto f0 = rs.base_performance.shifted(-rs.base_performance(0.0));
        const auto b = approximation_bounds(sc.q, sc.agents, f0, sc.density, sc.r, sc.quadrature);
        beta = b.beta;
        pi = b.pi;
        kappa = b.kappa;
        h_truncated = b.h_truncated;
    } catch (const DomainError& e) {
        err << "covkit: note: approximation bounds undefined: " << e.what() << '\n';
    }

    Json rec;
    rec["H"] = ev.value;
    rec["max_grad_norm"] = ev.max_gradient_norm();
    rec["beta"] = detail::real_or_null(beta);
    rec["pi"] = detail::real_or_null(pi);
    rec["kappa"] = detail::real_or_null(kappa);
    rec["H_truncated_normalized"] = detail::real_or_null(h_truncated);
    rec["coverage_fraction"] = detail::real_or_null(detail::coverage_fraction(sc, sc.agents, total));
    Json agents = Json::array();
    for (std::size_t i = 0; i < sc.agents.size(); ++i) {
        const auto& g = ev.gradients[i].gradient;
        agents.push_back({{"agent", i},
                          {"x", sc.agents[i].x},
                          {"y", sc.agents[i].y},
                          {"value", ev.agent_values[i]},
                          {"grad_x", g.x},
                          {"grad_y", g.y},
                          {"grad_norm", norm(g)}});
    }
    if (format == "json") {
        Json doc = rec;
        doc["agents"] = agents;
        out << doc.dump(2) << '\n';
    } else {
        detail::csv_record(out, "eval", rec);
        detail::csv_table(out, "eval-agents", agents);
    }
    return kExitOk;
}

inline int cmd_graphs(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    const auto rs = detail::load(opt, err);
    const auto format = detail::output_format(opt, rs);
    const Scenario& sc = rs.scenario;
    const std::vector<std::pair<std::string, ProximityGraph>> graphs = {
        {"delaunay", delaunay_graph(sc.q, sc.agents)},
        {"disk", disk_graph(sc.agents, sc.r)},
        {"r_delaunay", r_delaunay_graph(sc.q, sc.agents, sc.r)},
        {"limited_delaunay", limited_delaunay_graph(sc.q, sc.agents, sc.r)},
        {"gabriel", gabriel_graph(sc.agents)},
        {"emst", emst(sc.agents)},
    };
    auto get = [&](const std::string& name) -> const ProximityGraph& {
        for (const auto& [n, g] : graphs) {
            if (n == name) return g;
        }
        throw std::logic_error("no graph " + name);
    };

    detail::OutputTransaction tx(detail::output_dir(opt, rs));
    Json table = Json::array();
    for (const auto& [name, g] : graphs) {
        std::ostringstream os;
        write_edge_list(os, g);
        tx.write(name + ".txt", os.str());
        table.push_back({{"graph", name}, {"edges", g.edges().size()}, {"connected", is_connected(g)}});
    }

    const std::size_t n = sc.agents.size();
    const auto& disk = get("disk");
    const auto& ld = get("limited_delaunay");
    Json checks;
    checks["agents"] = n;
    checks["r"] = sc.r;
    checks["disk_gabriel_in_limited_delaunay"] = is_subgraph(intersect(disk, get("gabriel")), ld);
    checks["limited_delaunay_in_disk_delaunay"] = is_subgraph(ld, intersect(disk, get("delaunay")));
    checks["connectivity_equivalent"] = is_connected(disk) == is_connected(ld);
    checks["limited_delaunay_planar_bound"] = n < 3 || ld.edges().size() <= 3 * n - 6;
    checks["emst_edges_n_minus_1"] = get("emst").edges().size() + 1 == n;
    checks["emst_in_gabriel"] = is_subgraph(get("emst"), get("gabriel"));
    checks["gabriel_in_delaunay"] = is_subgraph(get("gabriel"), get("delaunay"));
    tx.commit();

    if (format == "json") {
        out << Json{{"graphs", table}, {"checks", checks}}.dump(2) << '\n';
    } else {
        detail::csv_table(out, "graphs", table);
        detail::csv_record(out, "graphs-checks", checks);
    }
    return kExitOk;
}

inline int cmd_run(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    const auto rs = detail::load(opt, err);
    const auto format = detail::output_format(opt, rs);
    const Scenario& sc = rs.scenario;
    const auto report = run(sc);

    const double total = weighted_area(sc.q, sc.density, sc.quadrature);
    std::vector<double> coverage;
    coverage.reserve(report.trajectory.size());
    for (const auto& rec : report.trajectory) coverage.push_back(detail::coverage_fraction(sc, rec.positions, total));

    const double tol = 10.0 * sc.quadrature.abs_tol;
    long first_decrease = -1;
    for (std::size_t k = 1; k < report.trajectory.size() && first_decrease < 0; ++k) {
        if (report.trajectory[k].h < report.trajectory[k - 1].h - tol) first_decrease = static_cast<long>(k);
    }

    std::ostringstream traj, metrics, warnings;
    write_trajectory_csv(traj, report);
    write_metrics_csv(metrics, report, coverage);
    for (const auto& w : rs.warnings) warnings << w << '\n';
    for (const auto& w : report.warnings) warnings << w << '\n';

    detail::OutputTransaction tx(detail::output_dir(opt, rs));
    tx.write("trajectory.csv", traj.str());
    tx.write("metrics.csv", metrics.str());
    tx.write("resolved_scenario.yaml", serialize(rs.file));
    tx.write("warnings.log", warnings.str());
    tx.commit();

    Json rec;
    rec["terminated_by"] = to_string(report.terminated_by);
    rec["steps"] = report.trajectory.back().step;
    rec["initial_H"] = report.trajectory.front().h;
    rec["final_H"] = report.final_h;
    rec["max_grad_norm"] = report.trajectory.back().max_grad_norm;
    rec["grad_tol"] = report.grad_tol;
    rec["lyapunov_violations"] = report.lyapunov_violations;
    rec["warnings"] = rs.warnings.size() + report.warnings.size();
    rec["monotone"] = first_decrease < 0;
    rec["wall_clock_seconds"] = report.wall_clock_seconds;
    if (format == "json") {
        out << rec.dump(2) << '\n';
    } else {
        detail::csv_record(out, "run", rec);
    }
    if (opt.assert_monotone && first_decrease >= 0) {
        err << "covkit: assert-monotone failed: H decreased at step " << first_decrease << " ("
            << detail::fmt(report.trajectory[static_cast<std::size_t>(first_decrease) - 1].h) << " -> "
            << detail::fmt(report.trajectory[static_cast<std::size_t>(first_decrease)].h) << ")\n";
        return kExitRuntime;
    }
    return kExitOk;
}

inline int cmd_render(const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    const auto rs = detail::load(opt, err);
    const Scenario& sc = rs.scenario;
    const auto dir = detail::output_dir(opt, rs);

    RenderInput in;
    in.q = sc.q;
    in.density = sc.density;
    in.r = sc.r;
    in.layers = rs.file.outputs.render.layers;
    in.width = rs.file.outputs.render.width;
    in.height = rs.file.outputs.render.height;
    std::string label = opt.frame;
    long step = 0;
    if (opt.frame == "initial") {
        in.agents = sc.agents;
    } else {
        std::optional<long> wanted;
        if (opt.frame != "final") {
            std::size_t used = 0;
            try {
                wanted = std::stol(opt.frame, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != opt.frame.size() || !wanted || *wanted < 0) {
                throw ValidationError("--frame must be initial, final or a non-negative step index");
            }
        }
        const auto path = dir / "trajectory.csv";
        std::ifstream is(path);
        if (!is) throw std::runtime_error("missing trajectory " + path.string() + " (run the scenario first)");
        const auto frames = read_trajectory_csv(is);
        if (frames.steps.empty()) throw std::runtime_error(path.string() + " has no frames");
        std::size_t k = frames.steps.size() - 1;
        if (wanted) {
            auto it = std::find(frames.steps.begin(), frames.steps.end(), *wanted);
            if (it == frames.steps.end()) {
                throw std::runtime_error("step " + opt.frame + " is not in " + path.string() + " (last step " +
                                         std::to_string(frames.steps.back()) + ")");
            }
            k = static_cast<std::size_t>(it - frames.steps.begin());
        }
        if (frames.positions[k].size() != sc.agents.size()) {
            throw std::runtime_error(path.string() + " has a different number of agents than the scenario");
        }
        in.agents = frames.positions[k];
        step = frames.steps[k];
        in.trails.assign(sc.agents.size(), {});
        for (std::size_t s = 0; s <= k; ++s) {
            for (std::size_t i = 0; i < sc.agents.size(); ++i) in.trails[i].push_back(frames.positions[s][i]);
        }
    }
    in.title = "covkit frame " + label + " (step " + std::to_string(step) + ")";

    detail::OutputTransaction tx(dir);
    const std::string name = "frame_" + label + ".svg";
    tx.write(name, render_svg(in));
    const auto written = tx.commit();
    out << written.front().string() << '\n';
    return kExitOk;
}

/// Run a subcommand and map exceptions to exit codes.
inline int dispatch(const std::string& command, const CommandOptions& opt, std::ostream& out, std::ostream& err) {
    try {
        if (command == "validate") return cmd_validate(opt, out, err);
        if (command == "eval") return cmd_eval(opt, out, err);
        if (command == "graphs") return cmd_graphs(opt, out, err);
        if (command == "run") return cmd_run(opt, out, err);
        if (command == "render") return cmd_render(opt, out, err);
        err << "covkit: unknown command '" << command << "'\n";
        return kExitValidation;
    } catch (const ScenarioError& e) {
        err << "covkit: invalid scenario: " << e.what() << '\n';
        return kExitValidation;
    } catch (const ValidationError& e) {
        err << "covkit: invalid input: " << e.what() << '\n';
        return kExitValidation;
    } catch (const YAML::Exception& e) {
        err << "covkit: invalid scenario: line " << e.mark.line + 1 << ": " << e.msg << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "covkit: error: " << e.what() << '\n';
        return kExitRuntime;
    }
}

}  // namespace covkit::cli
