#include "gbsde/model.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

using namespace gbsde;
using gbsde::testing::make_spec;

namespace {

bool has(const std::vector<SpecViolation>& v, const std::string& invariant) {
    return std::any_of(v.begin(), v.end(), [&](const SpecViolation& s) { return s.invariant == invariant; });
}

}  // namespace

TEST(BuildGrid, TightSpacingAndCoverage) {
    const VolatilityBand band{1.0, 2.0};
    const Grid g = build_grid(band, 1.0, 200);
    EXPECT_DOUBLE_EQ(g.lattice.spacing, std::sqrt(2.0 / 200.0));
    // 6 sqrt(2) / sqrt(0.01) = 60 * sqrt(2) ... nodes must reach 6 std devs and not more than one extra
    const double reach = 6.0 * std::sqrt(2.0);
    EXPECT_GE(g.lattice.half_width * g.lattice.spacing, reach * (1.0 - 1e-12));
    EXPECT_LT((g.lattice.half_width - 1) * g.lattice.spacing, reach);
    EXPECT_EQ(g.time.t(200), 1.0);
    EXPECT_EQ(g.lattice.x(g.lattice.center()), 0.0);
}

TEST(BuildGrid, RejectsBadInput) {
    EXPECT_THROW(build_grid({1.0, 2.0}, 0.0, 10), InvalidInput);
    EXPECT_THROW(build_grid({1.0, 2.0}, 1.0, 0), InvalidInput);
}

TEST(ValidateSpec, ValidSpecHasNoViolations) {
    const auto spec = make_spec(1.0, 2.0, 50, [](double x) { return x * x; });
    EXPECT_TRUE(validate_spec(spec).empty());
}

TEST(ValidateSpec, ReportsEachViolatedAssumption) {
    auto spec = make_spec(1.0, 2.0, 50, [](double x) { return x * x; });
    auto bad = spec;
    bad.band.sigma_lo_sq = 0.0;
    EXPECT_TRUE(has(validate_spec(bad), "non-degeneracy"));

    bad = spec;
    bad.lattice.spacing *= 0.5;
    EXPECT_TRUE(has(validate_spec(bad), "CFL"));

    bad = spec;
    bad.lattice.half_width /= 2;
    EXPECT_TRUE(has(validate_spec(bad), "coverage"));

    bad = spec;
    bad.driver = [](double, double, double y, double) { return 30.0 * y; };
    bad.lipschitz = 30.0;
    EXPECT_TRUE(has(validate_spec(bad), "Picard contraction"));

    bad = spec;
    bad.driver = [](double, double, double y, double) { return 3.0 * y; };
    bad.lipschitz = 1.0;
    EXPECT_TRUE(has(validate_spec(bad), "Lipschitz driver"));

    bad = spec;
    bad.obstacle = [](double, double) { return 0.5; };
    const auto v = validate_spec(bad);
    ASSERT_TRUE(has(v, "terminal dominance"));
    const auto it = std::find_if(v.begin(), v.end(), [](const SpecViolation& s) { return s.invariant == "terminal dominance"; });
    EXPECT_EQ(it->step, bad.grid.n_steps);
    EXPECT_GT(it->value, 0.0);
}

TEST(RefineTimeGrid, HalvesDtAndKeepsCoverage) {
    const auto spec = make_spec(1.0, 2.0, 40, [](double x) { return x; });
    const auto fine = refine_time_grid(spec);
    EXPECT_EQ(fine.grid.n_steps, 80);
    EXPECT_DOUBLE_EQ(fine.grid.dt(), spec.grid.dt() / 2.0);
    EXPECT_GE(fine.lattice.half_width * fine.lattice.spacing,
              spec.lattice.half_width * spec.lattice.spacing * (1.0 - 1e-12));
    EXPECT_TRUE(validate_spec(fine).empty());
}

TEST(LatticeSurface, RowsAndDifferences) {
    LatticeSurface a(SurfaceKind::Y, 3, 5);
    LatticeSurface b(SurfaceKind::Y, 3, 5);
    a.at(2, 4) = 1.5;
    b.at(1, 0) = -2.0;
    EXPECT_DOUBLE_EQ(max_abs_difference(a, b), 2.0);
    EXPECT_DOUBLE_EQ(min_difference(a, b), 0.0);
    EXPECT_DOUBLE_EQ(min_difference(b, a), -2.0);
    EXPECT_EQ(a.row(2).size(), 5u);
    EXPECT_TRUE(a.all_finite());
    a.at(0, 0) = std::nan("");
    EXPECT_FALSE(a.all_finite());
}
