#pragma once

// Piecewise performance functions f(x) = f_alpha(x) on [R_{alpha-1}, R_alpha),
// each piece a quadratic c0 + c1 x + c2 x^2. Pieces are right-open: at a
// breakpoint the right piece applies.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "covkit/errors.hpp"

namespace covkit {

struct QuadraticPiece {
    double c0 = 0.0;
    double c1 = 0.0;
    double c2 = 0.0;

    double operator()(double x) const { return c0 + x * (c1 + x * c2); }
    double derivative(double x) const { return c1 + 2.0 * c2 * x; }
    bool is_constant() const { return c1 == 0.0 && c2 == 0.0; }
    friend bool operator==(const QuadraticPiece&, const QuadraticPiece&) = default;
};

class PerformanceFunction {
public:
    PerformanceFunction() : pieces_{QuadraticPiece{}} {}

    /// pieces.size() must equal breakpoints.size() + 1. Throws when a piece
    /// increases on its interval. Upward jumps are accepted but reported by
    /// warnings().
    static PerformanceFunction make(std::vector<double> breakpoints, std::vector<QuadraticPiece> pieces) {
        if (pieces.size() != breakpoints.size() + 1) {
            throw ValidationError("performance function needs exactly one more piece than breakpoints");
        }
        for (std::size_t k = 0; k < breakpoints.size(); ++k) {
            if (!(breakpoints[k] > 0.0) || !std::isfinite(breakpoints[k])) {
                throw ValidationError("breakpoint " + std::to_string(k) + " must be finite and > 0",
                                      static_cast<long>(k));
            }
            if (k > 0 && !(breakpoints[k] > breakpoints[k - 1])) {
                throw ValidationError("breakpoints must be strictly increasing", static_cast<long>(k));
            }
        }
        PerformanceFunction f;
        f.breaks_ = std::move(breakpoints);
        f.pieces_ = std::move(pieces);
        for (std::size_t a = 0; a < f.pieces_.size(); ++a) {
            const auto& p = f.pieces_[a];
            if (!std::isfinite(p.c0) || !std::isfinite(p.c1) || !std::isfinite(p.c2)) {
                throw ValidationError("piece " + std::to_string(a) + " has non-finite coefficients",
                                      static_cast<long>(a));
            }
            const double lo = f.lower(a);
            const double hi = f.upper(a);
            bool increasing = p.derivative(lo) > 0.0;
            if (std::isfinite(hi)) {
                increasing = increasing || p.derivative(hi) > 0.0;
            } else {
                increasing = increasing || p.c2 > 0.0 || (p.c2 == 0.0 && p.c1 > 0.0);
            }
            if (increasing) {
                throw ValidationError("piece " + std::to_string(a) + " increases on its interval",
                                      static_cast<long>(a));
            }
        }
        for (std::size_t a = 0; a < f.breaks_.size(); ++a) {
            if (f.jump(a) < 0.0) {
                f.warnings_.push_back("jump at R = " + std::to_string(f.breaks_[a]) +
                                      " increases f; the function is not non-increasing");
            }
        }
        return f;
    }

    const std::vector<double>& breakpoints() const { return breaks_; }
    const std::vector<QuadraticPiece>& pieces() const { return pieces_; }
    const std::vector<std::string>& warnings() const { return warnings_; }

    double lower(std::size_t a) const { return a == 0 ? 0.0 : breaks_[a - 1]; }
    double upper(std::size_t a) const {
        return a < breaks_.size() ? breaks_[a] : std::numeric_limits<double>::infinity();
    }

    std::size_t piece_index(double x) const {
        std::size_t a = 0;
        while (a < breaks_.size() && x >= breaks_[a]) ++a;
        return a;
    }

    double operator()(double x) const {
        if (!(x >= 0.0)) throw DomainError("performance function evaluated at a negative distance");
        return pieces_[piece_index(x)](x);
    }

    /// f_alpha(R_alpha) - f_{alpha+1}(R_alpha) for breakpoint index a.
    double jump(std::size_t a) const { return pieces_[a](breaks_[a]) - pieces_[a + 1](breaks_[a]); }

    /// f + c.
    PerformanceFunction shifted(double c) const {
        PerformanceFunction g = *this;
        for (auto& p : g.pieces_) p.c0 += c;
        return g;
    }

    friend bool operator==(const PerformanceFunction& a, const PerformanceFunction& b) {
        return a.breaks_ == b.breaks_ && a.pieces_ == b.pieces_;
    }

private:
    std::vector<double> breaks_;
    std::vector<QuadraticPiece> pieces_;
    std::vector<std::string> warnings_;
};

namespace presets {

/// f(x) = -x^2.
inline PerformanceFunction centroid() { return PerformanceFunction::make({}, {{0.0, 0.0, -1.0}}); }

/// Indicator of [0, R).
inline PerformanceFunction area(double radius) {
    return PerformanceFunction::make({radius}, {{1.0, 0.0, 0.0}, {0.0, 0.0, 0.0}});
}

/// -x^2 below R, -R^2 beyond (continuous).
inline PerformanceFunction mixed_continuous(double radius) {
    return PerformanceFunction::make({radius}, {{0.0, 0.0, -1.0}, {-radius * radius, 0.0, 0.0}});
}

/// -x^2 below R, b beyond. Non-increasing only for b <= -R^2.
inline PerformanceFunction mixed_discontinuous(double radius, double b) {
    return PerformanceFunction::make({radius}, {{0.0, 0.0, -1.0}, {b, 0.0, 0.0}});
}

}  // namespace presets

/// f_{r/2}: f below r/2 and the constant f(diam) from r/2 on.
/// Requires f(0) = 0 and 0 < r <= 2 diam.
inline PerformanceFunction truncate_performance(const PerformanceFunction& f, double r, double diam) {
    if (!(r > 0.0) || r > 2.0 * diam * (1.0 + 1e-12)) {
        throw DomainError("truncation radius must satisfy 0 < r <= 2 diam(Q)");
    }
    const double scale = std::max({1.0, std::abs(f(diam)), std::abs(f(0.5 * r))});
    if (std::abs(f(0.0)) > 1e-12 * scale) throw DomainError("truncation requires f(0) = 0");
    const double half = 0.5 * r;
    const double tail = f(diam);
    std::vector<double> breaks;
    std::vector<QuadraticPiece> pieces;
    for (std::size_t a = 0; a < f.pieces().size(); ++a) {
        if (f.lower(a) >= half) break;
        pieces.push_back(f.pieces()[a]);
        if (f.upper(a) < half) breaks.push_back(f.upper(a));
    }
    const QuadraticPiece constant{tail, 0.0, 0.0};
    if (!(pieces.back() == constant)) {
        breaks.push_back(half);
        pieces.push_back(constant);
    }
    return PerformanceFunction::make(std::move(breaks), std::move(pieces));
}

}  // namespace covkit
