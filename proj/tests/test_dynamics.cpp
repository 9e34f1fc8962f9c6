#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "covkit/dynamics.hpp"
#include "test_support.hpp"

using namespace covkit;
using covkit::testing::example_density;
using covkit::testing::example_domain;
using covkit::testing::random_agents;
using covkit::testing::unit_square;

namespace {

DensityField uniform_density() {
    DensityField phi;
    phi.uniform_offset = 1.0;
    return phi;
}

Scenario square_scenario(std::vector<Point2> agents, Algorithm alg) {
    Scenario sc;
    sc.q = unit_square();
    sc.agents = std::move(agents);
    sc.density = uniform_density();
    sc.performance = presets::centroid();
    sc.r = 0.8;
    sc.algorithm = alg;
    return sc;
}

}  // namespace

TEST(Continuous, SingleAgentFollowsExactEulerSolution) {
    // p' = 2 M (CM - p) with M = 1, so Euler gives p_k = CM + (p_0 - CM)(1 - 2 dt)^k.
    const double dt = 0.05;
    auto sc = square_scenario({{0.2, 0.2}}, Algorithm::continuous_euler);
    sc.dt = dt;
    sc.max_steps = 500;
    sc.grad_tol = 1e-5;
    const auto rep = run(sc);
    ASSERT_EQ(rep.terminated_by, Termination::grad_tol);
    EXPECT_LE(rep.trajectory.size(), 501u);
    for (const auto& rec : rep.trajectory) {
        const double expect = 0.5 - 0.3 * std::pow(1.0 - 2.0 * dt, static_cast<double>(rec.step));
        EXPECT_NEAR(rec.positions[0].x, expect, 1e-8);
        EXPECT_NEAR(rec.positions[0].y, expect, 1e-8);
    }
    EXPECT_NEAR(rep.trajectory.back().positions[0].x, 0.5, 1e-4);
    EXPECT_NEAR(rep.trajectory.back().positions[0].y, 0.5, 1e-4);
}

TEST(Continuous, FixedPointAndFirstOrderScaling) {
    const std::vector<Point2> cvt{{0.25, 0.5}, {0.75, 0.5}};
    const auto still = continuous_step(unit_square(), cvt, presets::centroid(), uniform_density(), 0.05);
    for (std::size_t i = 0; i < cvt.size(); ++i) EXPECT_LT(distance(still.positions[i], cvt[i]), 1e-10);

    const auto q = example_domain();
    const auto agents = random_agents(q, 6, 3);
    const auto a = continuous_step(q, agents, presets::centroid(), example_density(), 1e-3);
    const auto b = continuous_step(q, agents, presets::centroid(), example_density(), 5e-4);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const double da = distance(a.positions[i], agents[i]);
        const double db = distance(b.positions[i], agents[i]);
        if (da > 0.0) {
            EXPECT_NEAR(db / da, 0.5, 1e-9);
        }
    }
}

TEST(Continuous, LargeStepIsClampedToTheBoundary) {
    const std::vector<Point2> p{{0.1, 0.5}};
    // The gradient points toward (0.5, 0.5); with dt = 10 the raw step would leave Q.
    const auto s = continuous_step(unit_square(), p, presets::centroid(), uniform_density(), 10.0);
    EXPECT_NEAR(s.positions[0].x, 1.0, 1e-12);
    EXPECT_NEAR(s.positions[0].y, 0.5, 1e-12);
    EXPECT_LT(s.step_sizes[0], 10.0);
}

TEST(LineSearch, QuadraticProfileLandsOnTheCentroid) {
    const std::vector<Point2> p{{0.2, 0.2}};
    const auto s = line_search_step(unit_square(), p, presets::centroid(), uniform_density());
    EXPECT_NEAR(s.positions[0].x, 0.5, 1e-6);
    EXPECT_NEAR(s.positions[0].y, 0.5, 1e-6);
    EXPECT_TRUE(s.warnings.empty());
}

TEST(LineSearch, CriticalPointUnchanged) {
    const std::vector<Point2> cvt{{0.25, 0.5}, {0.75, 0.5}};
    const auto sc = square_scenario(cvt, Algorithm::line_search);
    const auto rep = run(sc);
    EXPECT_EQ(rep.terminated_by, Termination::grad_tol);
    EXPECT_EQ(rep.trajectory.size(), 1u);
}

TEST(LineSearch, EachAgentImprovesInsideItsCell) {
    const auto q = example_domain();
    const auto phi = example_density();
    const double diam = polygon_diameter(q);
    const auto f = presets::mixed_discontinuous(0.225, -diam * diam);
    const auto agents = random_agents(q, 16, 5);
    const auto cells = voronoi_cells(q, agents);
    const auto ev = evaluate_on_cells(agents, cells, f, phi, {}, true);
    const auto s = line_search_step(q, agents, cells, ev, f, phi, {});
    for (std::size_t i = 0; i < agents.size(); ++i) {
        EXPECT_TRUE(cells[i].contains(s.positions[i], 1e-12));
        if (s.step_sizes[i] > 0.0) {
            EXPECT_GT(one_center_value(s.positions[i], cells[i], f, phi), ev.agent_values[i]);
        }
    }
    EXPECT_GE(multicenter_value(q, s.positions, f, phi), ev.value - 1e-9);
}

TEST(LineSearch, MonotoneOnTheMixedDiscontinuousPreset) {
    Scenario sc;
    sc.q = example_domain();
    sc.agents = random_agents(sc.q, 16, 11);
    sc.density = example_density();
    const double diam = polygon_diameter(sc.q);
    sc.performance = presets::mixed_discontinuous(0.225, -diam * diam);
    sc.r = 0.45;
    sc.algorithm = Algorithm::line_search;
    sc.max_steps = 40;
    const auto rep = run(sc);
    EXPECT_EQ(rep.lyapunov_violations, 0);
    for (std::size_t k = 1; k < rep.trajectory.size(); ++k) {
        EXPECT_GE(rep.trajectory[k].h, rep.trajectory[k - 1].h - 10.0 * sc.quadrature.abs_tol);
        validate_agents(sc.q, rep.trajectory[k].positions, geometric_tolerance(sc.q), min_agent_separation(sc.q));
    }
    EXPECT_GT(rep.trajectory.back().h, rep.trajectory.front().h);
}

TEST(MaxStep, CentroidPresetIsLloyd) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto agents = random_agents(q, 10, 7);
    const auto cells = voronoi_cells(q, agents);
    const auto s = max_step(q, agents, presets::centroid(), phi, 1e-9);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto mc = mass_and_centroid(whole_cell_region(cells[i], agents[i]), phi);
        EXPECT_NEAR(s.positions[i].x, mc.centroid.x, 1e-12);
        EXPECT_NEAR(s.positions[i].y, mc.centroid.y, 1e-12);
    }
}

TEST(MaxStep, TwoAgentLloydOnTheSquare) {
    auto sc = square_scenario({{0.2, 0.45}, {0.7, 0.6}}, Algorithm::max_step);
    sc.grad_tol = 1e-9;
    sc.max_steps = 200;
    const auto rep = run(sc);
    ASSERT_EQ(rep.terminated_by, Termination::grad_tol);
    const auto& p = rep.trajectory.back().positions;
    EXPECT_NEAR(p[0].x, 0.25, 1e-4);
    EXPECT_NEAR(p[0].y, 0.5, 1e-4);
    EXPECT_NEAR(p[1].x, 0.75, 1e-4);
    EXPECT_NEAR(p[1].y, 0.5, 1e-4);
    EXPECT_EQ(rep.lyapunov_violations, 0);
}

TEST(MaxStep, MixedContinuousLandsOnTheRCentroid) {
    const auto q = example_domain();
    const auto phi = example_density();
    const double r = 0.225;
    const auto agents = random_agents(q, 8, 13);
    const auto cells = voronoi_cells(q, agents);
    const auto s = max_step(q, agents, presets::mixed_continuous(r), phi, 1e-8);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        const auto mc = mass_and_centroid(cell_ball_region(cells[i], ClosedBall{s.positions[i], r}), phi);
        EXPECT_LT(distance(mc.centroid, s.positions[i]), 1e-8);
    }
}

TEST(MaxStep, InnerAscentReachesACellMaximizer) {
    const auto q = example_domain();
    const auto phi = example_density();
    const auto f = presets::area(0.225);
    const auto agents = random_agents(q, 8, 17);
    const auto cells = voronoi_cells(q, agents);
    const auto ev = evaluate_on_cells(agents, cells, f, phi, {}, true);
    const double grad_tol = 1e-6;
    const auto s = max_step(q, agents, cells, ev, f, phi, {}, grad_tol);
    for (std::size_t i = 0; i < agents.size(); ++i) {
        EXPECT_GE(one_center_value(s.positions[i], cells[i], f, phi), ev.agent_values[i] - 1e-10);
        EXPECT_LT(norm(one_center_gradient(s.positions[i], cells[i], f, phi)), grad_tol);
    }
    // Already at the maximizer: no move.
    const auto again = max_step(q, s.positions, cells, evaluate_on_cells(s.positions, cells, f, phi, {}, true), f,
                                phi, {}, grad_tol);
    for (std::size_t i = 0; i < agents.size(); ++i) EXPECT_LT(distance(again.positions[i], s.positions[i]), 1e-12);
}

TEST(Run, DeterministicBitForBit) {
    Scenario sc;
    sc.q = example_domain();
    sc.agents = random_agents(sc.q, 6, 2);
    sc.density = example_density();
    sc.performance = presets::mixed_continuous(0.225);
    sc.r = 0.45;
    sc.max_steps = 15;
    for (auto alg : {Algorithm::line_search, Algorithm::max_step, Algorithm::continuous_euler}) {
        sc.algorithm = alg;
        const auto a = run(sc);
        const auto b = run(sc);
        ASSERT_EQ(a.trajectory.size(), b.trajectory.size());
        for (std::size_t k = 0; k < a.trajectory.size(); ++k) {
            EXPECT_EQ(a.trajectory[k].h, b.trajectory[k].h);
            EXPECT_EQ(a.trajectory[k].positions, b.trajectory[k].positions);
        }
        EXPECT_EQ(a.warnings, b.warnings);
    }
}

TEST(Run, CentroidFixedPointsAreCentroidal) {
    Scenario sc;
    sc.q = example_domain();
    sc.agents = random_agents(sc.q, 5, 9);
    sc.density = example_density();
    sc.performance = presets::centroid();
    sc.r = 0.45;
    sc.algorithm = Algorithm::max_step;
    const auto rep = run(sc);
    ASSERT_EQ(rep.terminated_by, Termination::grad_tol);
    const auto& p = rep.trajectory.back().positions;
    const auto cells = voronoi_cells(sc.q, p);
    for (std::size_t i = 0; i < p.size(); ++i) {
        const auto mc = mass_and_centroid(whole_cell_region(cells[i], p[i]), sc.density);
        EXPECT_LT(distance(mc.centroid, p[i]), rep.grad_tol / mc.mass);
    }
}

TEST(Run, ContinuousAndLineSearchBothReachCriticalPoints) {
    for (auto alg : {Algorithm::continuous_euler, Algorithm::line_search}) {
        auto sc = square_scenario({{0.1, 0.2}, {0.3, 0.9}, {0.8, 0.4}}, alg);
        sc.dt = 0.1;
        sc.max_steps = 3000;
        const auto rep = run(sc);
        EXPECT_EQ(rep.terminated_by, Termination::grad_tol) << to_string(alg);
        EXPECT_LT(rep.trajectory.back().max_grad_norm, rep.grad_tol);
    }
}

TEST(Run, DefaultGradTolScalesWithInitialH) {
    auto sc = square_scenario({{0.3, 0.3}}, Algorithm::line_search);
    sc.max_steps = 0;
    const auto rep = run(sc);
    EXPECT_EQ(rep.terminated_by, Termination::max_steps);
    EXPECT_DOUBLE_EQ(rep.grad_tol, 1e-6 * (std::abs(rep.trajectory[0].h) + 1.0));
}

TEST(Scenario, ValidationErrors) {
    auto sc = square_scenario({{0.3, 0.3}}, Algorithm::continuous_euler);
    sc.dt = 0.0;
    EXPECT_THROW(run(sc), ValidationError);
    sc.dt = 0.1;
    sc.r = 0.0;
    EXPECT_THROW(run(sc), ValidationError);
    sc.r = 0.5;
    sc.agents = {{1.5, 0.5}};
    EXPECT_THROW(run(sc), ValidationError);
    sc.agents = {{0.5, 0.5}, {0.5, 0.5}};
    EXPECT_THROW(run(sc), CoincidentAgents);
    sc.agents = {};
    EXPECT_THROW(run(sc), ValidationError);
}
