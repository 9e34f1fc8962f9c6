#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "covkit/errors.hpp"
#include "covkit/vec2.hpp"

namespace covkit {

struct GaussianBump {
    double amplitude = 0.0;  // >= 0
    Point2 center;
    double sharpness = 1.0;  // k > 0 in a * exp(-k |q - center|^2)

    friend bool operator==(const GaussianBump&, const GaussianBump&) = default;
};

/// phi(q) = uniform_offset + sum of Gaussian bumps.
struct DensityField {
    std::vector<GaussianBump> gaussians;
    double uniform_offset = 0.0;

    double operator()(const Point2& q) const {
        double v = uniform_offset;
        for (const auto& g : gaussians) v += g.amplitude * std::exp(-g.sharpness * norm2(q - g.center));
        return v;
    }

    /// Upper bound of phi over the plane.
    double sup() const {
        double s = uniform_offset;
        for (const auto& g : gaussians) s += g.amplitude;
        return s;
    }

    void validate() const {
        if (!(uniform_offset >= 0.0) || !std::isfinite(uniform_offset)) {
            throw ValidationError("density uniform offset must be finite and >= 0");
        }
        for (std::size_t k = 0; k < gaussians.size(); ++k) {
            const auto& g = gaussians[k];
            if (!(g.amplitude >= 0.0) || !std::isfinite(g.amplitude)) {
                throw ValidationError("gaussian " + std::to_string(k) + ": amplitude must be finite and >= 0",
                                      static_cast<long>(k));
            }
            if (!(g.sharpness > 0.0) || !std::isfinite(g.sharpness)) {
                throw ValidationError("gaussian " + std::to_string(k) + ": sharpness must be finite and > 0",
                                      static_cast<long>(k));
            }
            if (!is_finite(g.center)) {
                throw ValidationError("gaussian " + std::to_string(k) + ": center must be finite",
                                      static_cast<long>(k));
            }
        }
    }

    /// m[j] = integral over rho in [a, b] of rho^j * phi(c + rho u), j = 0..3,
    /// for a unit direction u. Closed form via erf; exact up to rounding.
    std::array<double, 4> radial_moments(const Point2& c, const Vec2& u, double a, double b) const {
        std::array<double, 4> m{};
        if (!(b > a)) return m;
        const std::array<double, 2> edges{a, b};
        radial_moment_profile(c, u, edges, std::span<std::array<double, 4>>(&m, 1));
        return m;
    }

    /// radial_moments over consecutive intervals [edges[k], edges[k+1]],
    /// added into out[k]. Endpoint terms are shared between neighbouring
    /// intervals; bumps below exp(-60) of their peak along the whole ray are
    /// skipped.
    void radial_moment_profile(const Point2& c, const Vec2& u, std::span<const double> edges,
                               std::span<std::array<double, 4>> out) const {
        const std::size_t n = edges.size();
        if (n < 2) return;
        if (uniform_offset != 0.0) {
            for (std::size_t k = 0; k + 1 < n; ++k) {
                double pa = edges[k];
                double pb = edges[k + 1];
                for (int j = 0; j < 4; ++j) {
                    out[k][j] += uniform_offset * (pb - pa) / (j + 1);
                    pa *= edges[k];
                    pb *= edges[k + 1];
                }
            }
        }
        constexpr std::size_t kMaxEdges = 16;
        if (n > kMaxEdges) {
            for (std::size_t k = 0; k + 1 < n; ++k) {
                radial_moment_profile(c, u, edges.subspan(k, 2), out.subspan(k, 1));
            }
            return;
        }
        std::array<double, kMaxEdges> t, e, ec;
        for (const auto& g : gaussians) {
            const Vec2 d = c - g.center;
            const double s = dot(d, u);
            const double perp2 = std::max(0.0, norm2(d) - s * s);
            const double k = g.sharpness;
            const double lo = edges[0] + s;
            const double hi = edges[n - 1] + s;
            const double tmin = lo > 0.0 ? lo : (hi < 0.0 ? -hi : 0.0);
            if (k * (perp2 + tmin * tmin) > 60.0) continue;
            const double scale = g.amplitude * std::exp(-k * perp2);
            const double sk = std::sqrt(k);
            const double inv2k = 0.5 / k;
            const double erf_scale = 0.5 * std::sqrt(std::numbers::pi) / sk;
            for (std::size_t j = 0; j < n; ++j) {
                t[j] = edges[j] + s;
                e[j] = std::exp(-k * t[j] * t[j]);
                ec[j] = std::erfc(sk * std::abs(t[j]));
            }
            // Moments of t^i exp(-k t^2) on [t0, t1], t = rho + s.
            for (std::size_t j = 0; j + 1 < n; ++j) {
                const double t0 = t[j], t1 = t[j + 1];
                const double e0 = e[j], e1 = e[j + 1];
                double erf_diff;  // erf(sk t1) - erf(sk t0) without tail cancellation
                if (t0 >= 0.0) {
                    erf_diff = ec[j] - ec[j + 1];
                } else if (t1 <= 0.0) {
                    erf_diff = ec[j + 1] - ec[j];
                } else {
                    erf_diff = 2.0 - ec[j] - ec[j + 1];
                }
                const double q0 = erf_scale * erf_diff;
                const double q1 = (e0 - e1) * inv2k;
                const double q2 = q0 * inv2k - (t1 * e1 - t0 * e0) * inv2k;
                const double q3 = q1 / k - (t1 * t1 * e1 - t0 * t0 * e0) * inv2k;
                // Shift back: rho^j = (t - s)^j.
                auto& m = out[j];
                m[0] += scale * q0;
                m[1] += scale * (q1 - s * q0);
                m[2] += scale * (q2 - 2.0 * s * q1 + s * s * q0);
                m[3] += scale * (q3 - 3.0 * s * q2 + 3.0 * s * s * q1 - s * s * s * q0);
            }
        }
    }

    friend bool operator==(const DensityField&, const DensityField&) = default;
};

}  // namespace covkit
