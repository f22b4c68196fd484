#include "gbsde/comparison.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace gbsde;
using gbsde::testing::make_spec;

namespace {

LatticeSurface linear_in_time(const ProblemSpec& spec, double rate) {
    LatticeSurface K(SurfaceKind::Y, spec.grid.n_steps, spec.lattice.size());
    for (int i = 0; i <= spec.grid.n_steps; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) K.at(i, k) = rate * spec.grid.t(i);
    }
    return K;
}

}  // namespace

TEST(VariantCompare, EqualityCase) {
    const auto spec = make_spec(1.0, 2.0, 60, [](double x) { return x * x; });
    const auto r = variant_compare(spec, {0.0}, spec.terminal, spec.driver);
    EXPECT_TRUE(r.check.pass);
    EXPECT_LE(max_abs_difference(r.first.Y, r.second.Y), 1e-12);
}

TEST(VariantCompare, ConstantRateShiftsByTimeToGo) {
    const double a = 0.5;
    const auto spec = make_spec(1.0, 2.0, 60, [](double x) { return x * x; });
    const auto r = variant_compare(spec, {a}, spec.terminal, spec.driver);
    EXPECT_TRUE(r.check.pass);
    const int c = spec.lattice.center();
    for (int i : {0, 20, 40}) {
        EXPECT_NEAR(r.second.Y.at(i, c) - r.first.Y.at(i, c), a * (1.0 - spec.grid.t(i)), 1e-12);
    }
}

TEST(VariantCompare, OrderedTerminals) {
    const auto spec = make_spec(1.0, 2.0, 60, [](double) { return 0.0; });
    const auto r = variant_compare(spec, {0.0}, [](double x) { return std::min(x, 0.0); }, {});
    EXPECT_TRUE(r.check.pass);
}

TEST(VariantCompare, RandomizedSuite) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> coef(-1.0, 1.0);
    std::uniform_real_distribution<double> rate(0.0, 2.0);
    for (int trial = 0; trial < 15; ++trial) {
        const auto xi1 = gbsde::testing::random_piecewise(rng);
        const auto xi2 = gbsde::testing::dominating(xi1, rng);
        const double a = coef(rng), b = coef(rng), gap = 0.3 * rate(rng);
        const DriverFn f2 = [a, b](double, double, double y, double z) { return a * y + b * std::abs(z); };
        const DriverFn f1 = [a, b, gap](double, double, double y, double z) { return a * y + b * std::abs(z) - gap; };
        const auto spec2 = make_spec(1.0, 2.0, 40, xi2, f2, 2.0);
        const auto r = variant_compare(spec2, {rate(rng)}, xi1, f1);
        EXPECT_TRUE(r.check.pass) << r.check.detail;
    }
}

TEST(VariantCompare, RejectsUnorderedData) {
    const auto spec = make_spec(1.0, 2.0, 20, [](double) { return 0.0; });
    EXPECT_THROW(variant_compare(spec, {0.0}, [](double) { return 0.1; }, {}), InvalidInput);
    EXPECT_THROW(variant_compare(spec, {0.0}, spec.terminal, [](double, double, double, double) { return 0.1; }),
                 InvalidInput);
    EXPECT_THROW(variant_compare(spec, {-1.0}, spec.terminal, {}), InvalidInput);
}

TEST(SubmartingaleIntegral, TrivialCases) {
    const auto spec = make_spec(1.0, 2.0, 20, [](double) { return 0.0; });
    const GExpectation op(spec);
    const auto K = linear_in_time(spec, 1.0);
    LatticeSurface one(SurfaceKind::Y, 20, spec.lattice.size());
    for (int i = 0; i <= 20; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) one.at(i, k) = 1.0;
    }
    const auto c1 = submartingale_integral_check(op, one, K, K);
    EXPECT_TRUE(c1.pass);
    EXPECT_NEAR(c1.margin, spec.grid.dt(), 1e-15);
    const LatticeSurface zero(SurfaceKind::Y, 20, spec.lattice.size());
    const auto c0 = submartingale_integral_check(op, zero, K, K);
    EXPECT_TRUE(c0.pass);
    EXPECT_EQ(c0.margin, 0.0);
}

TEST(SubmartingaleIntegral, SignFieldMatchesThreeOutcomeEnumeration) {
    const auto spec = make_spec(1.0, 2.0, 12, [](double) { return 0.0; });
    const GExpectation op(spec);
    const int w = spec.lattice.size();
    LatticeSurface X(SurfaceKind::Y, 12, w);
    LatticeSurface K1(SurfaceKind::Y, 12, w), K2(SurfaceKind::Y, 12, w);
    for (int i = 0; i <= 12; ++i) {
        for (int k = 0; k < w; ++k) {
            const double x = spec.lattice.x(k);
            X.at(i, k) = x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0);
            // K2 includes a convex spatial part: a genuine G-submartingale that is not deterministic
            K1.at(i, k) = 2.0 * spec.grid.t(i);
            K2.at(i, k) = spec.grid.t(i) + 0.1 * x * x - 0.1 * spec.band.sigma_lo_sq * spec.grid.t(i);
        }
    }
    const auto c = submartingale_integral_check(op, X, K1, K2);
    EXPECT_TRUE(c.pass) << c.detail;

    // enumerate the three stencil outcomes for each scenario at every interior node
    double best_min = 1e300;
    for (int i = 0; i < 12; ++i) {
        for (int k = 1; k < w - 1; ++k) {
            const double xp = std::max(X.at(i, k), 0.0), xm = std::max(-X.at(i, k), 0.0);
            double sup = -1e300;
            for (Scenario s : {Scenario::Low, Scenario::High}) {
                const auto& wt = op.weights(s);
                const double probs[3] = {wt.p_down, wt.p_mid, wt.p_up};
                double e = 0.0;
                for (int d = -1; d <= 1; ++d) {
                    const double inc = xp * (K1.at(i + 1, k + d) - K1.at(i, k)) + xm * (K2.at(i + 1, k + d) - K2.at(i, k));
                    e += probs[d + 1] * inc;
                }
                sup = std::max(sup, e);
            }
            EXPECT_GE(sup, -1e-12);
            best_min = std::min(best_min, sup);
        }
    }
    EXPECT_GE(c.margin, -1e-12);
    EXPECT_LE(c.margin, best_min + 1e-14);
}

TEST(SubmartingaleIntegral, RandomStepFieldsAndRates) {
    const auto spec = make_spec(1.0, 2.0, 16, [](double) { return 0.0; });
    const GExpectation op(spec);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-2.0, 2.0);
    LatticeSurface X(SurfaceKind::Y, 16, spec.lattice.size());
    for (int i = 0; i <= 16; ++i) {
        for (int k = 0; k < spec.lattice.size(); ++k) X.at(i, k) = u(rng);
    }
    for (double a1 : {0.0, 0.5, 2.0}) {
        for (double a2 : {0.0, 0.5, 2.0}) {
            EXPECT_TRUE(submartingale_integral_check(op, X, linear_in_time(spec, a1), linear_in_time(spec, a2)).pass);
        }
    }
}

TEST(SubmartingaleIntegral, RejectsDecreasingK) {
    const auto spec = make_spec(1.0, 2.0, 10, [](double) { return 0.0; });
    const GExpectation op(spec);
    const auto K = linear_in_time(spec, 1.0);
    const auto bad = linear_in_time(spec, -1.0);
    EXPECT_THROW(submartingale_integral_check(op, K, bad, K), InvalidInput);
}

TEST(LinearizedDuality, ZeroCoefficientsAreExact) {
    const auto spec = make_spec(1.0, 1.0, 50, [](double x) { return std::max(x, 0.0); });
    const auto r = linearized_duality_check(spec, LinearCoefficients{}, linear_in_time(spec, 0.0));
    EXPECT_TRUE(r.identity.pass);
    EXPECT_LT(max_abs_difference(r.bsde_Y, r.dual_Y), 1e-14);
}

TEST(LinearizedDuality, ExponentialGrowth) {
    const auto spec = make_spec(1.0, 1.0, 200, [](double) { return 1.0; });
    LinearCoefficients c;
    c.a = [](double) { return 0.3; };
    const auto r = linearized_duality_check(spec, c, linear_in_time(spec, 0.0));
    EXPECT_TRUE(r.identity.pass);
    EXPECT_NEAR(r.dual_Y.at(0, spec.lattice.center()), std::exp(0.3), 1e-3);
    EXPECT_NEAR(r.bsde_Y.at(0, spec.lattice.center()), std::exp(0.3), 1e-3);
}

TEST(LinearizedDuality, InequalityForLinearK) {
    const auto spec = make_spec(1.0, 1.0, 40, [](double) { return 0.0; });
    const auto r = linearized_duality_check(spec, LinearCoefficients{}, linear_in_time(spec, 1.0));
    EXPECT_TRUE(r.inequality.pass);
    for (int i = 0; i <= 40; ++i) EXPECT_NEAR(r.dual_K.at(i, spec.lattice.center()), 1.0, 1e-14);
}

TEST(LinearizedDuality, IdentityErrorIsFirstOrder) {
    LinearCoefficients c;
    c.a = [](double) { return 0.2; };
    c.b = [](double) { return 0.4; };
    c.c = [](double) { return -0.1; };
    c.d = [](double) { return 0.3; };
    c.m = [](double) { return 0.5; };
    c.n = [](double) { return -0.2; };
    const TerminalFn xi = [](double x) { return std::cos(x); };
    double previous = 0.0;
    for (int steps : {50, 100, 200}) {
        const auto spec = make_spec(1.5, 1.5, steps, xi);
        const auto r = linearized_duality_check(spec, c, linear_in_time(spec, 1.0));
        EXPECT_TRUE(r.identity.pass) << r.identity.detail;
        EXPECT_TRUE(r.inequality.pass) << r.inequality.detail;
        const double err = r.identity.tolerance - r.identity.margin;
        // first order: observed order log2(err(dt) / err(dt/2)) at least 0.9
        if (previous > 0.0) EXPECT_GE(std::log2(previous / err), 0.9) << steps;
        previous = err;
    }
}

TEST(LinearizedDuality, RejectsUncertainBand) {
    const auto spec = make_spec(1.0, 2.0, 20, [](double) { return 0.0; });
    EXPECT_THROW(linearized_duality_check(spec, LinearCoefficients{}, linear_in_time(spec, 0.0)), InvalidInput);
}
