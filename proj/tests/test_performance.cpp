#include <cmath>

#include <gtest/gtest.h>

#include "covkit/performance.hpp"

using namespace covkit;

namespace {

// Diameter quoted for the example environment in the literature; kept here
// only to check the preset formula, not the computed diameter.
constexpr double kQuotedDiam = 3.37796;

}  // namespace

TEST(Presets, Centroid) {
    const auto f = presets::centroid();
    EXPECT_DOUBLE_EQ(f(0.5), -0.25);
    EXPECT_DOUBLE_EQ(f(0.0), 0.0);
    EXPECT_TRUE(f.breakpoints().empty());
}

TEST(Presets, AreaIsRightOpenAtTheJump) {
    const auto f = presets::area(0.225);
    EXPECT_DOUBLE_EQ(f(0.0), 1.0);
    EXPECT_DOUBLE_EQ(f(0.2249999), 1.0);
    EXPECT_DOUBLE_EQ(f(0.225), 0.0);
    EXPECT_DOUBLE_EQ(f(5.0), 0.0);
    EXPECT_DOUBLE_EQ(f.jump(0), 1.0);
    EXPECT_TRUE(f.warnings().empty());
}

TEST(Presets, MixedContinuous) {
    const auto f = presets::mixed_continuous(0.225);
    EXPECT_DOUBLE_EQ(f(0.1), -0.01);
    EXPECT_DOUBLE_EQ(f(1.0), -0.225 * 0.225);
    EXPECT_NEAR(f.jump(0), 0.0, 1e-15);
}

TEST(Presets, MixedDiscontinuous) {
    const auto f = presets::mixed_discontinuous(0.225, -kQuotedDiam * kQuotedDiam);
    EXPECT_DOUBLE_EQ(f(0.2), -0.04);
    EXPECT_NEAR(f(0.3), -11.4106, 1e-4);
    EXPECT_GT(f.jump(0), 0.0);
}

TEST(Presets, MixedDiscontinuousWithUpwardJumpWarns) {
    const auto f = presets::mixed_discontinuous(0.5, -0.1);
    EXPECT_EQ(f.warnings().size(), 1u);
    EXPECT_LT(f.jump(0), 0.0);
}

TEST(Evaluate, NegativeDistanceIsDomainError) {
    EXPECT_THROW(presets::centroid()(-1e-9), DomainError);
    EXPECT_THROW(presets::centroid()(std::nan("")), DomainError);
}

TEST(Make, RejectsMalformedFunctions) {
    EXPECT_THROW(PerformanceFunction::make({0.5}, {{0, 0, 0}}), ValidationError);
    EXPECT_THROW(PerformanceFunction::make({0.5, 0.3}, {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}}), ValidationError);
    EXPECT_THROW(PerformanceFunction::make({-0.5}, {{0, 0, 0}, {0, 0, 0}}), ValidationError);
    EXPECT_THROW(PerformanceFunction::make({}, {{0, 1.0, 0}}), ValidationError);
    EXPECT_THROW(PerformanceFunction::make({}, {{0, 0, 1.0}}), ValidationError);
    // -(x - 1)^2 increases on [0, 1).
    EXPECT_THROW(PerformanceFunction::make({1.0}, {{-1.0, 2.0, -1.0}, {0, 0, 0}}), ValidationError);
    EXPECT_THROW(PerformanceFunction::make({}, {{std::nan(""), 0, 0}}), ValidationError);
}

TEST(Make, PieceIndexUsesRightOpenIntervals) {
    const auto f = PerformanceFunction::make({1.0, 2.0}, {{3, 0, 0}, {2, 0, 0}, {1, 0, 0}});
    EXPECT_EQ(f.piece_index(0.0), 0u);
    EXPECT_EQ(f.piece_index(1.0), 1u);
    EXPECT_EQ(f.piece_index(1.999), 1u);
    EXPECT_EQ(f.piece_index(2.0), 2u);
    EXPECT_DOUBLE_EQ(f(2.0), 1.0);
}

TEST(Shift, AddsConstantToEveryPiece) {
    const auto f = presets::area(0.3).shifted(-2.0);
    EXPECT_DOUBLE_EQ(f(0.1), -1.0);
    EXPECT_DOUBLE_EQ(f(0.4), -2.0);
    EXPECT_DOUBLE_EQ(f.jump(0), 1.0);
}

TEST(Truncate, QuadraticGivesMixedDiscontinuous) {
    const double r = 0.45;
    const auto t = truncate_performance(presets::centroid(), r, kQuotedDiam);
    EXPECT_EQ(t, presets::mixed_discontinuous(0.5 * r, -kQuotedDiam * kQuotedDiam));
}

TEST(Truncate, FullRangeLeavesValuesUnchanged) {
    const double diam = 2.0;
    const auto f = presets::centroid();
    const auto t = truncate_performance(f, 2.0 * diam, diam);
    for (double x = 0.0; x <= diam; x += 0.01) EXPECT_DOUBLE_EQ(t(x), f(x));
}

TEST(Truncate, Idempotent) {
    const double diam = 3.0;
    const auto once = truncate_performance(presets::centroid(), 0.8, diam);
    EXPECT_EQ(truncate_performance(once, 0.8, diam), once);
    // Already constant beyond r/2.
    const auto f = presets::mixed_continuous(0.2);
    EXPECT_EQ(truncate_performance(f, 0.6, diam), f);
}

TEST(Truncate, DomainErrors) {
    EXPECT_THROW(truncate_performance(presets::centroid(), 0.0, 1.0), DomainError);
    EXPECT_THROW(truncate_performance(presets::centroid(), 2.5, 1.0), DomainError);
    EXPECT_THROW(truncate_performance(presets::area(0.2), 0.3, 1.0), DomainError);
}
