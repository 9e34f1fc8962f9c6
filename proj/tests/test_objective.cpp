#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "covkit/objective.hpp"
#include "covkit/proximity.hpp"
#include "test_support.hpp"

using namespace covkit;
using covkit::testing::example_density;
using covkit::testing::example_domain;
using covkit::testing::random_agents;
using covkit::testing::unit_square;

namespace {

constexpr double pi = std::numbers::pi;

DensityField uniform_density(double c = 1.0) {
    DensityField phi;
    phi.uniform_offset = c;
    return phi;
}

std::vector<PerformanceFunction> example_presets(const ConvexPolygon& q) {
    const double diam = polygon_diameter(q);
    return {presets::centroid(), presets::area(0.225), presets::mixed_continuous(0.225),
            presets::mixed_discontinuous(0.225, -diam * diam)};
}

// Monte Carlo estimate of the max form: integral over Q of max_i f(|q - p_i|) phi(q).
double monte_carlo_h(const ConvexPolygon& q, const std::vector<Point2>& agents, const PerformanceFunction& f,
                     const DensityField& phi, int samples, std::uint64_t seed) {
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& v : q.vertices()) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(x0, x1), uy(y0, y1);
    double sum = 0.0;
    for (int k = 0; k < samples; ++k) {
        const Point2 x{ux(rng), uy(rng)};
        if (!q.contains(x)) continue;
        double best = -1e300;
        for (const auto& p : agents) best = std::max(best, f(distance(x, p)));
        sum += best * phi(x);
    }
    return sum * (x1 - x0) * (y1 - y0) / samples;
}

Vec2 fd_gradient(const ConvexPolygon& q, std::vector<Point2> agents, std::size_t i, const PerformanceFunction& f,
                 const DensityField& phi, double h) {
    Vec2 g;
    for (int axis = 0; axis < 2; ++axis) {
        auto bumped = [&](double s) {
            auto p = agents;
            (axis == 0 ? p[i].x : p[i].y) += s;
            return multicenter_value(q, p, f, phi);
        };
        (axis == 0 ? g.x : g.y) = (bumped(h) - bumped(-h)) / (2.0 * h);
    }
    return g;
}

}  // namespace

TEST(Multicenter, SingleAgentAtSquareCentroid) {
    const std::vector<Point2> p{{0.5, 0.5}};
    EXPECT_NEAR(multicenter_value(unit_square(), p, presets::centroid(), uniform_density()), -1.0 / 6.0, 1e-6);
}

TEST(Multicenter, AreaPresetBallInside) {
    const std::vector<Point2> p{{0.5, 0.5}};
    const double r = 0.3;
    EXPECT_NEAR(multicenter_value(unit_square(), p, presets::area(r), uniform_density()), pi * r * r, 1e-8);
}

TEST(Multicenter, MatchesMonteCarloMaxForm) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto agents = random_agents(q, 5, 21);
    int k = 0;
    for (const auto& f : example_presets(q)) {
        const double h = multicenter_value(q, agents, f, phi);
        const double mc = monte_carlo_h(q, agents, f, phi, 1000000, 100 + k++);
        EXPECT_NEAR(h, mc, 1e-2 * std::abs(mc));
    }
}

TEST(Multicenter, CoincidentAgentsRejected) {
    const std::vector<Point2> p{{0.5, 0.5}, {0.5, 0.5}};
    EXPECT_THROW(multicenter_value(unit_square(), p, presets::centroid(), uniform_density()), CoincidentAgents);
}

TEST(Gradient, MatchesFiniteDifferencesForEveryPreset) {
    const auto q = example_domain();
    const auto phi = example_density();
    const double h = 1e-5 * polygon_diameter(q);
    for (const auto& f : example_presets(q)) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            const auto agents = random_agents(q, 8, 40 + seed);
            const auto grads = multicenter_gradient(q, agents, f, phi);
            for (std::size_t i = 0; i < agents.size(); ++i) {
                const Vec2 fd = fd_gradient(q, agents, i, f, phi, h);
                EXPECT_LT(norm(grads[i].gradient - fd) / (1.0 + norm(grads[i].gradient)), 1e-3)
                    << "agent " << i << " seed " << seed;
            }
        }
    }
}

TEST(Gradient, ReportIsInteriorPlusJumps) {
    const auto q = example_domain();
    const double diam = polygon_diameter(q);
    const auto agents = random_agents(q, 8, 3);
    for (const auto& g : multicenter_gradient(q, agents, presets::mixed_discontinuous(0.225, -diam * diam),
                                              example_density())) {
        Vec2 sum = g.interior_term;
        for (const auto& j : g.jump_terms) sum += j.contribution;
        EXPECT_NEAR(sum.x, g.gradient.x, 1e-14);
        EXPECT_NEAR(sum.y, g.gradient.y, 1e-14);
    }
}

TEST(Gradient, CentroidPresetIsTwiceMassTimesOffset) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto agents = random_agents(q, 6, 8);
    const auto cells = voronoi_cells(q, agents);
    const auto grads = multicenter_gradient(q, agents, presets::centroid(), phi);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto mc = mass_and_centroid(whole_cell_region(cells[i], agents[i]), phi);
        const Vec2 expect = (mc.centroid - agents[i]) * (2.0 * mc.mass);
        EXPECT_NEAR(grads[i].gradient.x, expect.x, 1e-7 * (1.0 + norm(expect)));
        EXPECT_NEAR(grads[i].gradient.y, expect.y, 1e-7 * (1.0 + norm(expect)));
        EXPECT_TRUE(grads[i].jump_terms.empty());
    }
}

TEST(Gradient, CentroidPresetVanishesAtCentroidalConfiguration) {
    // Two agents at the centroids of the halves of the unit square.
    const std::vector<Point2> p{{0.25, 0.5}, {0.75, 0.5}};
    for (const auto& g : multicenter_gradient(unit_square(), p, presets::centroid(), uniform_density())) {
        EXPECT_LT(norm(g.gradient), 1e-9);
    }
}

TEST(Gradient, AreaPresetHasNoInteriorTerm) {
    const auto q = example_domain();
    const auto agents = random_agents(q, 8, 5);
    for (const auto& g : multicenter_gradient(q, agents, presets::area(0.225), example_density())) {
        EXPECT_EQ(g.interior_term.x, 0.0);
        EXPECT_EQ(g.interior_term.y, 0.0);
    }
    // A ball that covers the whole cell leaves no arc on the boundary.
    const std::vector<Point2> lone{{0.4, 0.5}};
    const auto g = multicenter_gradient(unit_square(), lone, presets::area(2.0), example_density());
    EXPECT_TRUE(g[0].jump_terms.empty());
    EXPECT_EQ(norm(g[0].gradient), 0.0);
    // A full circle under uniform density cancels by symmetry.
    const auto u = multicenter_gradient(unit_square(), lone, presets::area(0.2), uniform_density());
    EXPECT_LT(norm(u[0].gradient), 1e-12);
}

TEST(Gradient, MixedContinuousIsTruncatedCentroidFormula) {
    const auto q = example_domain();
    const auto phi = example_density();
    const double r = 0.225;
    const auto agents = random_agents(q, 8, 6);
    const auto cells = voronoi_cells(q, agents);
    const auto grads = multicenter_gradient(q, agents, presets::mixed_continuous(r), phi);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        EXPECT_TRUE(grads[i].jump_terms.empty());
        const auto mc = mass_and_centroid(cell_ball_region(cells[i], ClosedBall{agents[i], r}), phi);
        const Vec2 expect = (mc.centroid - agents[i]) * (2.0 * mc.mass);
        EXPECT_NEAR(grads[i].gradient.x, expect.x, 1e-7 * (1.0 + norm(expect)));
        EXPECT_NEAR(grads[i].gradient.y, expect.y, 1e-7 * (1.0 + norm(expect)));
    }
}

TEST(Gradient, ConstantShiftInvariance) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto agents = random_agents(q, 7, 9);
    const double c = -2.5;
    const double area_phi = weighted_area(q, phi);
    for (const auto& f : example_presets(q)) {
        const auto a = evaluate_multicenter(q, agents, f, phi);
        const auto b = evaluate_multicenter(q, agents, f.shifted(c), phi);
        EXPECT_NEAR(b.value - a.value, c * area_phi, 1e-7 * (std::abs(a.value) + std::abs(c * area_phi)));
        for (std::size_t i = 0; i < agents.size(); ++i) {
            EXPECT_NEAR(a.gradients[i].gradient.x, b.gradients[i].gradient.x, 1e-7 * (1.0 + std::abs(a.value)));
            EXPECT_NEAR(a.gradients[i].gradient.y, b.gradients[i].gradient.y, 1e-7 * (1.0 + std::abs(a.value)));
        }
    }
}

TEST(Gradient, LocalToDelaunayNeighbours) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto f = presets::centroid();
    std::mt19937_64 rng(4);
    std::normal_distribution<double> jiggle(0.0, 0.01);
    int checked = 0;
    for (std::uint64_t seed = 0; seed < 10 && checked < 5; ++seed) {
        auto agents = random_agents(q, 12, 60 + seed);
        const auto del = delaunay_graph(q, agents);
        const std::size_t i = 0;
        for (std::size_t j = 1; j < agents.size(); ++j) {
            if (del.has_edge(i, j)) continue;
            auto moved = agents;
            moved[j] = moved[j] + Vec2{jiggle(rng), jiggle(rng)};
            if (!q.contains(moved[j])) continue;
            const auto del2 = delaunay_graph(q, moved);
            if (del2.neighbors(i) != del.neighbors(i)) continue;
            const auto g1 = multicenter_gradient(q, agents, f, phi)[i].gradient;
            const auto g2 = multicenter_gradient(q, moved, f, phi)[i].gradient;
            EXPECT_NEAR(g1.x, g2.x, 1e-9 * (1.0 + norm(g1)));
            EXPECT_NEAR(g1.y, g2.y, 1e-9 * (1.0 + norm(g1)));
            ++checked;
            break;
        }
    }
    EXPECT_GE(checked, 3);
}

TEST(OneCenter, ConcaveQuadraticGradient) {
    const auto phi = uniform_density();
    for (const Point2 p : {Point2{0.1, 0.2}, Point2{0.5, 0.5}, Point2{0.9, 0.3}}) {
        const Vec2 g = one_center_gradient(p, unit_square(), presets::centroid(), phi);
        EXPECT_NEAR(g.x, 2.0 * (0.5 - p.x), 1e-9);
        EXPECT_NEAR(g.y, 2.0 * (0.5 - p.y), 1e-9);
    }
}

TEST(OneCenter, GradientPointsInwardOnTheBoundary) {
    const auto w = unit_square();
    const auto phi = example_density();
    const double diam = std::sqrt(2.0);
    const std::vector<PerformanceFunction> fs{presets::centroid(), presets::area(0.225),
                                              presets::mixed_continuous(0.225),
                                              presets::mixed_discontinuous(0.225, -diam * diam)};
    for (const auto& f : fs) {
        for (const auto& [p, inward] : std::vector<std::pair<Point2, Vec2>>{
                 {{0.0, 0.4}, {1, 0}}, {{1.0, 0.6}, {-1, 0}}, {{0.3, 0.0}, {0, 1}}, {{0.7, 1.0}, {0, -1}}}) {
            EXPECT_GT(dot(one_center_gradient(p, w, f, phi), inward), 0.0);
        }
    }
}

TEST(OneCenter, MatchesFiniteDifferences) {
    const auto phi = example_density();
    const auto q = example_domain();
    for (int t = 0; t < 20; ++t) {
        const auto sites = random_agents(q, 6, 700 + static_cast<std::uint64_t>(t));
        const auto cells = voronoi_cells(q, sites);
        const auto& w = cells[0];
        const Point2 p = sites[0];
        const double h = 1e-5 * polygon_diameter(q);
        for (const auto& f : example_presets(q)) {
            const Vec2 g = one_center_gradient(p, w, f, phi);
            const Vec2 fd{(one_center_value(p + Vec2{h, 0}, w, f, phi) - one_center_value(p - Vec2{h, 0}, w, f, phi)) /
                              (2 * h),
                          (one_center_value(p + Vec2{0, h}, w, f, phi) - one_center_value(p - Vec2{0, h}, w, f, phi)) /
                              (2 * h)};
            EXPECT_LT(norm(g - fd) / (1.0 + norm(g)), 1e-3);
        }
    }
}

TEST(OneCenter, OutsideRegionIsDomainError) {
    EXPECT_THROW(one_center_value({1.5, 0.5}, unit_square(), presets::centroid(), uniform_density()), DomainError);
}

TEST(OneCenter, MidpointConcavityForQuadratic) {
    const auto w = example_domain();
    const auto phi = example_density();
    const auto f = presets::centroid();
    for (std::uint64_t t = 0; t < 20; ++t) {
        const auto pts = random_agents(w, 2, 900 + t);
        const Point2 mid = (pts[0] + pts[1]) * 0.5;
        const double lhs = one_center_value(mid, w, f, phi);
        const double rhs = 0.5 * (one_center_value(pts[0], w, f, phi) + one_center_value(pts[1], w, f, phi));
        EXPECT_GE(lhs, rhs - 1e-8 * std::abs(rhs));
    }
}

TEST(FixedPartition, VoronoiPartitionReproducesH) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto agents = random_agents(q, 9, 12);
    const auto cells = voronoi_cells(q, agents);
    for (const auto& f : example_presets(q)) {
        const double h = multicenter_value(q, agents, f, phi);
        EXPECT_NEAR(fixed_partition_value(q, agents, cells, f, phi), h, 1e-9 * std::abs(h));
    }
}

TEST(FixedPartition, OtherTilingsAreNoBetter) {
    // Two agents in the unit square; vertical split at x = s instead of the bisector.
    const std::vector<Point2> agents{{0.2, 0.4}, {0.7, 0.6}};
    const auto phi = example_density();
    const auto f = presets::centroid();
    const double h = multicenter_value(unit_square(), agents, f, phi);
    for (double s : {0.3, 0.4, 0.6, 0.65}) {
        const std::vector<ConvexPolygon> tiles{ConvexPolygon::from_vertices({{0, 0}, {s, 0}, {s, 1}, {0, 1}}),
                                               ConvexPolygon::from_vertices({{s, 0}, {1, 0}, {1, 1}, {s, 1}})};
        EXPECT_LT(fixed_partition_value(unit_square(), agents, tiles, f, phi), h - 1e-6);
    }
}

TEST(FixedPartition, SwappedHalvesStrictlyWorse) {
    const std::vector<Point2> agents{{0.25, 0.5}, {0.75, 0.5}};
    const std::vector<ConvexPolygon> swapped{ConvexPolygon::from_vertices({{0, 0}, {1, 0}, {1, 0.5}, {0, 0.5}}),
                                             ConvexPolygon::from_vertices({{0, 0.5}, {1, 0.5}, {1, 1}, {0, 1}})};
    const auto f = presets::centroid();
    const auto phi = uniform_density();
    // Both agents sit on the shared edge, so each lies in its (wrong) half.
    EXPECT_LT(fixed_partition_value(unit_square(), agents, swapped, f, phi),
              multicenter_value(unit_square(), agents, f, phi) - 1e-3);
}

TEST(FixedPartition, NonTilingRejected) {
    const std::vector<Point2> agents{{0.2, 0.5}, {0.7, 0.5}};
    const std::vector<ConvexPolygon> gap{ConvexPolygon::from_vertices({{0, 0}, {0.4, 0}, {0.4, 1}, {0, 1}}),
                                         ConvexPolygon::from_vertices({{0.5, 0}, {1, 0}, {1, 1}, {0.5, 1}})};
    EXPECT_THROW(
        fixed_partition_value(unit_square(), agents, gap, presets::centroid(), uniform_density()), ValidationError);
}

TEST(ApproximationBounds, BetaFormula) {
    const auto q = example_domain();
    const double diam = polygon_diameter(q);
    EXPECT_NEAR(approximation_beta(presets::centroid(), 0.45, diam), 0.225 * 0.225 / (diam * diam), 1e-15);
    EXPECT_NEAR(approximation_beta(presets::centroid(), 0.65, diam), std::pow(0.325 / diam, 2), 1e-15);
    EXPECT_THROW(approximation_beta(presets::area(0.1), 0.45, diam), DomainError);
}

TEST(ApproximationBounds, SandwichOnRandomConfigurations) {
    const auto q = example_domain();
    const auto phi = example_density();
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> ur(0.1, 1.5);
    for (std::uint64_t t = 0; t < 10; ++t) {
        const auto agents = random_agents(q, 3 + t % 10, 1200 + t);
        const auto b = approximation_bounds(q, agents, presets::centroid(), phi, ur(rng));
        EXPECT_TRUE(b.lower_chain);
        EXPECT_TRUE(b.upper_chain);
        EXPECT_GE(b.pi, 0.0);
        EXPECT_LE(b.pi, b.kappa);
    }
}

TEST(ApproximationBounds, FullCoverageClosesTheGap) {
    const std::vector<Point2> agents{{0.25, 0.25}, {0.75, 0.25}, {0.25, 0.75}, {0.75, 0.75}};
    const auto b = approximation_bounds(unit_square(), agents, presets::centroid(), uniform_density(), 1.0);
    EXPECT_NEAR(b.pi, 0.0, 1e-9);
    EXPECT_NEAR(b.h, b.h_truncated, 1e-9);
}
