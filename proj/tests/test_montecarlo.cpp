#include "gbsde/montecarlo.hpp"
#include "gbsde/sublinear.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace gbsde;

namespace {

const VolatilityBand kBand{1.0, 2.0};
const TimeGrid kGrid{1.0, 50};

}  // namespace

TEST(SimulatePolicy, LinearPayoffHasZeroMean) {
    for (const auto& p : {VolatilityPolicy::constant(1.0), VolatilityPolicy::constant(2.0)}) {
        const auto e = simulate_policy_value([](double x) { return x; }, kBand, kGrid, p, 20000, 1);
        EXPECT_LE(std::abs(e.estimate), 3.0 * e.std_error);
    }
}

TEST(SimulatePolicy, VarianceIdentity) {
    for (double v : {2.0, 1.5}) {
        const auto e = simulate_policy_value([](double x) { return x * x; }, kBand, kGrid,
                                             VolatilityPolicy::constant(v), 20000, 2);
        EXPECT_NEAR(e.estimate, v, 3.0 * e.std_error);
    }
}

TEST(SimulatePolicy, TimeTableVariance) {
    std::vector<double> rates(50);
    for (int i = 0; i < 50; ++i) rates[static_cast<std::size_t>(i)] = i < 25 ? 1.0 : 2.0;
    const auto e = simulate_policy_value([](double x) { return x * x; }, kBand, kGrid,
                                         VolatilityPolicy::time_table(rates), 20000, 3);
    EXPECT_NEAR(e.estimate, 1.5, 3.0 * e.std_error);
}

TEST(SimulatePolicy, DeterministicInSeedAndThreads) {
    const auto p = VolatilityPolicy::constant(1.3);
    const auto xi = [](double x) { return std::exp(0.3 * x); };
    set_thread_count(1);
    const auto a = simulate_policy_value(xi, kBand, kGrid, p, 10000, 42);
    set_thread_count(3);
    const auto b = simulate_policy_value(xi, kBand, kGrid, p, 10000, 42);
    set_thread_count(1);
    const auto c = simulate_policy_value(xi, kBand, kGrid, p, 10000, 43);
    EXPECT_EQ(a.estimate, b.estimate);
    EXPECT_EQ(a.std_error, b.std_error);
    EXPECT_NE(a.estimate, c.estimate);
}

TEST(SimulatePolicy, RejectsOutOfBandAndTooFewPaths) {
    EXPECT_THROW(simulate_policy_value([](double x) { return x; }, kBand, kGrid, VolatilityPolicy::constant(2.5), 2000, 1),
                 InvalidInput);
    EXPECT_THROW(simulate_policy_value([](double x) { return x; }, kBand, kGrid, VolatilityPolicy::constant(1.0), 999, 1),
                 InvalidInput);
}

TEST(SupOverPolicies, ConvexAttainedAtHigh) {
    const auto s = sup_over_policies([](double x) { return std::max(x, 0.0); }, kBand, kGrid,
                                     {VolatilityPolicy::constant(1.0), VolatilityPolicy::constant(2.0)}, 40000, 5);
    EXPECT_EQ(s.best, 1u);
    EXPECT_NEAR(s.sup().estimate, 1.0 / std::sqrt(M_PI), 3.0 * s.sup().std_error);
}

TEST(SupOverPolicies, ConcaveAttainedAtLow) {
    const auto s = sup_over_policies([](double x) { return -x * x; }, kBand, kGrid,
                                     {VolatilityPolicy::constant(1.0), VolatilityPolicy::constant(2.0)}, 40000, 6);
    EXPECT_EQ(s.best, 0u);
    EXPECT_NEAR(s.sup().estimate, -1.0, 3.0 * s.sup().std_error);
}

TEST(SupOverPolicies, ConstantPayoffIsExact) {
    const auto s = sup_over_policies([](double) { return 0.75; }, kBand, kGrid,
                                     {VolatilityPolicy::constant(1.0), VolatilityPolicy::constant(2.0)}, 2000, 7);
    for (const auto& v : s.values) {
        EXPECT_EQ(v.estimate, 0.75);
        EXPECT_EQ(v.std_error, 0.0);
    }
}

TEST(FeedbackPolicy, DominatedByLatticeAndBeatsConstants) {
    // x^3 - 3x changes convexity at the origin: the lattice-driven feedback switches scenarios
    const TerminalFn xi = [](double x) { return std::max(std::min(x * x * x - 3 * x, 4.0), -4.0); };
    const auto spec = gbsde::testing::make_spec(1.0, 2.0, 50, xi);
    const double lattice = GExpectation(spec).expect(terminal_row(spec));
    const auto s = sup_over_policies(xi, kBand, kGrid,
                                     {VolatilityPolicy::constant(1.0), VolatilityPolicy::constant(2.0),
                                      VolatilityPolicy::feedback(lattice_convexity_indicator(spec))},
                                     40000, 8);
    const auto c = representation_check("representation", lattice, s, false);
    EXPECT_TRUE(c.pass) << c.detail;
    EXPECT_EQ(s.best, 2u);
}
