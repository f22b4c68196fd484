#include "gbsde/oracle.hpp"
#include "gbsde/penalization.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gbsde;
using gbsde::testing::make_spec;

namespace {

ObstacleFn zero_obstacle() {
    return [](double, double) { return 0.0; };
}

}  // namespace

TEST(ObstacleFd, NonBindingEqualsPlainSolve) {
    const auto spec = make_spec(1.0, 2.0, 80, [](double x) { return std::min(x, 0.0); }, {}, 0.0, zero_obstacle());
    EXPECT_LT(max_abs_difference(solve_obstacle_fd(spec), solve_gbsde(spec).Y), 1e-10);
}

TEST(ObstacleFd, ProjectionClipsSourceEveryStep) {
    const auto spec = make_spec(1.0, 2.0, 30, [](double) { return 0.0; },
                                [](double, double, double, double) { return 1.0; }, 0.0, zero_obstacle());
    EXPECT_EQ(solve_obstacle_fd(spec).max_abs(), 0.0);
}

TEST(ObstacleFd, RejectsCflViolation) {
    auto spec = make_spec(1.0, 2.0, 30, [](double) { return 0.0; });
    spec.lattice.spacing *= 0.5;
    EXPECT_THROW(solve_obstacle_fd(spec), InvalidInput);
}

TEST(PenalizedFd, LimitsAndSandwich) {
    const auto base = make_spec(1.0, 1.0, 50, [](double x) { return std::min(x, 0.0); },
                                [](double, double, double, double) { return 0.5; }, 0.0,
                                [](double t, double) { return -0.2 * (1.0 - t); });
    const auto spec = refine_for_penalty(base, 256.0);
    const auto projected = solve_obstacle_fd(spec);
    EXPECT_LT(max_abs_difference(solve_penalized_fd(spec, 0.0), solve_gbsde(spec).Y), 1e-10);
    LatticeSurface previous = solve_penalized_fd(spec, 1.0);
    for (double n : {4.0, 16.0, 64.0, 256.0}) {
        const auto u = solve_penalized_fd(spec, n);
        // the explicit G formula is monotone only up to roundoff (it subtracts 2u)
        EXPECT_GE(min_difference(previous, u), -1e-14);
        EXPECT_GE(min_difference(u, projected), -1e-14);
        previous = u;
    }
    EXPECT_LT(max_abs_difference(previous, projected), 0.02);

    auto far = spec;
    far.obstacle = [](double, double) { return 1e6; };
    EXPECT_LT(max_abs_difference(solve_penalized_fd(far, 64.0), solve_gbsde(far).Y), 1e-10);
}

TEST(StoppingOracle, ConstantDataStopsEverywhere) {
    const auto spec = make_spec(1.0, 1.0, 10, [](double) { return 0.3; }, {}, 0.0, [](double, double) { return 0.3; });
    const auto r = optimal_stopping_oracle(spec);
    EXPECT_EQ(r.value.max_abs(), 0.3);
    for (int i = 0; i < 10; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) EXPECT_EQ(r.stop_region.at(i, k), 1.0);
    }
}

TEST(StoppingOracle, SourceTermStopsImmediately) {
    const auto spec = make_spec(1.0, 1.0, 10, [](double) { return 0.0; },
                                [](double, double, double, double) { return 1.0; }, 0.0, zero_obstacle());
    const auto r = optimal_stopping_oracle(spec);
    EXPECT_EQ(r.value.max_abs(), 0.0);
    EXPECT_EQ(r.stop_region.at(0, spec.lattice.center()), 1.0);
}

TEST(StoppingOracle, MatchesProjectionSchemeOnClassicalBand) {
    const auto spec = make_spec(1.0, 1.0, 200, [](double x) { return std::min(x, 0.0); }, {}, 0.0,
                                [](double t, double x) { return -0.3 * (1.0 - t) + 0.05 * x; });
    EXPECT_LT(max_abs_difference(optimal_stopping_oracle(spec).value, solve_obstacle_fd(spec)), 1e-10);
}

TEST(StoppingOracle, BruteForceCertifiesDynamicProgram) {
    const ObstacleFn S = [](double t, double x) { return -0.3 * (1.0 - t) + 0.1 * x; };
    for (int steps : {2, 3, 4}) {
        const auto spec = make_spec(1.0, 1.0, steps, [](double x) { return std::min(x, 0.0); }, {}, 0.0, S);
        const double dp = optimal_stopping_oracle(spec).value.at(0, spec.lattice.center());
        EXPECT_NEAR(brute_force_stopping_sets(spec), dp, 1e-14) << steps;
        EXPECT_NEAR(brute_force_path_tree(spec), dp, 1e-14) << steps;
    }
    const auto ten = make_spec(1.0, 1.0, 10, [](double x) { return std::min(x, 0.0); }, {}, 0.0, S);
    EXPECT_NEAR(brute_force_path_tree(ten), optimal_stopping_oracle(ten).value.at(0, ten.lattice.center()), 1e-14);
    // the literal put example: never binds, DP is the plain expectation
    const auto put = make_spec(1.0, 1.0, 10, [](double x) { return std::min(x, 0.0); }, {}, 0.0, zero_obstacle());
    EXPECT_NEAR(brute_force_path_tree(put), optimal_stopping_oracle(put).value.at(0, put.lattice.center()), 1e-14);
}

TEST(StoppingOracle, RejectsUncertainBandAndLimits) {
    const auto spec = make_spec(1.0, 2.0, 4, [](double) { return 0.0; }, {}, 0.0, zero_obstacle());
    EXPECT_THROW(optimal_stopping_oracle(spec), InvalidInput);
    const auto big = make_spec(1.0, 1.0, 13, [](double) { return 0.0; }, {}, 0.0, zero_obstacle());
    EXPECT_THROW(brute_force_path_tree(big), InvalidInput);
    const auto many = make_spec(1.0, 1.0, 8, [](double) { return 0.0; }, {}, 0.0, zero_obstacle());
    EXPECT_THROW(brute_force_stopping_sets(many), InvalidInput);
}
