#include "gbsde/solver.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gbsde;
using gbsde::testing::make_spec;

namespace {

/// Classical trinomial BSDE solver written independently: fixed-point iteration on
/// y = E[Y'] + dt f(y, z) with the tree's own central-difference z.
LatticeSurface classical_bsde(const ProblemSpec& spec) {
    const int n = spec.grid.n_steps;
    const int w = spec.lattice.size();
    const double v = spec.band.sigma_hi_sq;
    const double dt = spec.grid.dt();
    const double h = spec.lattice.spacing;
    const double p = 0.5 * std::min(1.0, v * dt / (h * h));
    LatticeSurface Y(SurfaceKind::Y, n, w);
    for (int k = 0; k < w; ++k) Y.at(n, k) = spec.terminal(spec.lattice.x(k));
    for (int i = n - 1; i >= 0; --i) {
        for (int k = 0; k < w; ++k) {
            double e, z;
            if (k == 0 || k == w - 1) {
                e = Y.at(i + 1, k);
                z = k == 0 ? (Y.at(i + 1, 1) - Y.at(i + 1, 0)) / h : (Y.at(i + 1, k) - Y.at(i + 1, k - 1)) / h;
            } else {
                e = p * Y.at(i + 1, k + 1) + (1 - 2 * p) * Y.at(i + 1, k) + p * Y.at(i + 1, k - 1);
                z = (Y.at(i + 1, k + 1) - Y.at(i + 1, k - 1)) / (2 * h);
            }
            double y = e;
            for (int it = 0; it < 200; ++it) y = e + dt * spec.f(spec.grid.t(i), spec.lattice.x(k), y, z);
            Y.at(i, k) = y;
        }
    }
    return Y;
}

}  // namespace

TEST(NodeEquation, SolvesScalarEquation) {
    const auto f = [](double y) { return -2.0 * y + 1.0; };
    const double y = solve_node_equation(0.3, 0.01, f, 0.0, 0.0, SolveOptions{});
    EXPECT_NEAR(y, (0.3 + 0.01) / (1.0 + 0.02), 1e-15);
    // penalty resolved: y = E* - n dt (y - s)^+ with E* above s
    const double yp = solve_node_equation(1.0, 0.01, [](double) { return 0.0; }, 50.0, 0.0, SolveOptions{});
    EXPECT_NEAR(yp, 1.0 / 1.5, 1e-15);
}

TEST(SolveGbsde, ZeroDriverIsConditionalExpectation) {
    const auto spec = make_spec(1.0, 2.0, 80, [](double x) { return std::abs(x) - 0.5 * x * x; });
    const auto sol = solve_gbsde(spec);
    const GExpectation op(spec);
    const auto cond = op.conditional(terminal_row(spec));
    EXPECT_EQ(max_abs_difference(sol.Y, cond), 0.0);
    // defects are nonnegative and vanish for the maximizing scenario
    for (int i = 0; i < spec.grid.n_steps; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) {
            EXPECT_GE(sol.defect_low.at(i, k), 0.0);
            EXPECT_GE(sol.defect_high.at(i, k), 0.0);
            EXPECT_EQ(std::min(sol.defect_low.at(i, k), sol.defect_high.at(i, k)), 0.0);
        }
    }
}

TEST(SolveGbsde, ConstantDriverShiftsByTimeToGo) {
    const double c = 0.7;
    auto spec = make_spec(1.0, 2.0, 64, [](double x) { return x * x; },
                          [c](double, double, double, double) { return c; });
    const auto sol = solve_gbsde(spec);
    spec.driver = {};
    const auto plain = solve_gbsde(spec);
    for (int i = 0; i <= spec.grid.n_steps; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) {
            EXPECT_NEAR(sol.Y.at(i, k), plain.Y.at(i, k) + c * (1.0 - spec.grid.t(i)), 1e-12);
        }
    }
}

TEST(SolveGbsde, LinearDriverMatchesScalarRecursion) {
    // f = a y, xi = 1: Y_i = Y_{i+1} / (1 - a dt), an explicit scalar oracle
    const double a = 0.8;
    const auto spec = make_spec(1.0, 2.0, 100, [](double) { return 1.0; },
                                [a](double, double, double y, double) { return a * y; }, a);
    const auto sol = solve_gbsde(spec);
    double y = 1.0;
    for (int i = 0; i < spec.grid.n_steps; ++i) y /= (1.0 - a * spec.grid.dt());
    EXPECT_NEAR(sol.root(), y, 1e-12);
    EXPECT_NEAR(sol.root(), std::exp(a), 1e-2);
}

TEST(SolveGbsde, ClassicalBandMatchesIndependentTrinomialSolver) {
    const auto spec = make_spec(1.5, 1.5, 60, [](double x) { return std::max(x - 0.2, 0.0); },
                                [](double, double x, double y, double z) { return 0.3 * std::sin(y) - 0.4 * z + 0.1 * x; },
                                0.7);
    const auto sol = solve_gbsde(spec);
    EXPECT_LT(max_abs_difference(sol.Y, classical_bsde(spec)), 1e-12);
}

TEST(SolveGbsde, ComparisonIsExactOnRandomOrderedData) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto lo = gbsde::testing::random_piecewise(rng);
        const auto hi = gbsde::testing::dominating(lo, rng);
        const double a = u(rng), b = u(rng), s = 0.2 * std::abs(u(rng));
        const DriverFn f2 = [a, b](double, double, double y, double z) { return a * y + b * z; };
        const DriverFn f1 = [a, b, s](double, double, double y, double z) { return a * y + b * z - s; };
        const auto s1 = solve_gbsde(make_spec(1.0, 2.0, 40, hi, f2, 2.0));
        const auto s2 = solve_gbsde(make_spec(1.0, 2.0, 40, lo, f1, 2.0));
        EXPECT_GE(min_difference(s1.Y, s2.Y), 0.0);
    }
}

TEST(SolveGbsde, GirsanovExpectationDominates) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 5; ++trial) {
        const auto xi = gbsde::testing::random_piecewise(rng);
        const auto spec = make_spec(1.0, 2.0, 40, xi);
        const auto row = terminal_row(spec);
        const auto g = girsanov_expectation(spec, row, 1.5);
        const auto plain = GExpectation(spec).conditional(row);
        EXPECT_GE(min_difference(g, plain), 0.0);
    }
}

TEST(SolveGbsde, RejectsContractionViolation) {
    const auto spec = make_spec(1.0, 2.0, 4, [](double) { return 0.0; },
                                [](double, double, double y, double) { return 3.0 * y; }, 3.0);
    EXPECT_THROW(solve_gbsde(spec), InvalidInput);
}
