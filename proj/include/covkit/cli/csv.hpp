#pragma once

// CSV outputs. Every file starts with a "# covkit-<kind> v<N>" comment line,
// then a header row. Reals are printed with %.17g so values round-trip.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "covkit/cli/scenario_file.hpp"
#include "covkit/dynamics.hpp"

namespace covkit::cli {

inline constexpr int kCsvVersion = 1;

inline std::string csv_real(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    return detail::fmt(v);
}

inline void csv_banner(std::ostream& os, const std::string& kind) {
    os << "# covkit-" << kind << " v" << kCsvVersion << "\n";
}

inline void write_trajectory_csv(std::ostream& os, const AscentReport& report) {
    csv_banner(os, "trajectory");
    os << "step,agent,x,y\n";
    for (const auto& rec : report.trajectory) {
        for (std::size_t i = 0; i < rec.positions.size(); ++i) {
            os << rec.step << ',' << i << ',' << csv_real(rec.positions[i].x) << ','
               << csv_real(rec.positions[i].y) << '\n';
        }
    }
}

inline void write_metrics_csv(std::ostream& os, const AscentReport& report, std::span<const double> coverage) {
    csv_banner(os, "metrics");
    os << "step,H,max_grad_norm,coverage_fraction\n";
    for (std::size_t k = 0; k < report.trajectory.size(); ++k) {
        const auto& rec = report.trajectory[k];
        os << rec.step << ',' << csv_real(rec.h) << ',' << csv_real(rec.max_grad_norm) << ','
           << csv_real(k < coverage.size() ? coverage[k] : std::nan("")) << '\n';
    }
}

struct TrajectoryFrames {
    std::vector<long> steps;
    std::vector<std::vector<Point2>> positions;  // one entry per step, agents in order
};

/// Parse a trajectory.csv written by write_trajectory_csv.
inline TrajectoryFrames read_trajectory_csv(std::istream& in) {
    TrajectoryFrames out;
    std::string line;
    bool header = false;
    long lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        if (!header) {
            if (line != "step,agent,x,y") throw std::runtime_error("trajectory.csv: unexpected header");
            header = true;
            continue;
        }
        std::istringstream ss(line);
        std::string a, b, c, d;
        if (!std::getline(ss, a, ',') || !std::getline(ss, b, ',') || !std::getline(ss, c, ',') ||
            !std::getline(ss, d)) {
            throw std::runtime_error("trajectory.csv: malformed row at line " + std::to_string(lineno));
        }
        const long step = std::stol(a);
        const std::size_t agent = std::stoul(b);
        if (out.steps.empty() || out.steps.back() != step) {
            out.steps.push_back(step);
            out.positions.emplace_back();
        }
        if (agent != out.positions.back().size()) {
            throw std::runtime_error("trajectory.csv: agents out of order at line " + std::to_string(lineno));
        }
        out.positions.back().push_back({std::stod(c), std::stod(d)});
    }
    if (!header) throw std::runtime_error("trajectory.csv: missing header");
    return out;
}

}  // namespace covkit::cli
