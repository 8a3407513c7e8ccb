#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "nmart/levy.hpp"

using namespace nmart;

namespace {

LevyMeasure inverse_square_by_quadrature() {
    return levy::from_density("x^-2 numeric", [](double x) { return 1.0 / (x * x); },
                              IntervalSet{{0.0, kInfinity, false, false}});
}

} // namespace

TEST(TailMass, InverseSquareClosedForm) {
    const auto nu = levy::inverse_square_positive();
    EXPECT_NEAR(tail_mass(nu, 0.5, 1.0), 1.0, 1e-15);
    EXPECT_NEAR(tail_mass(nu, 1.0, kInfinity), 1.0, 1e-15);
    EXPECT_EQ(tail_mass(nu, 0.3, 0.3), 0.0);
}

TEST(TailMass, QuadratureAgreesWithAntiderivative) {
    const auto numeric = inverse_square_by_quadrature();
    EXPECT_FALSE(numeric.has_closed_form());
    EXPECT_NEAR(tail_mass(numeric, 0.5, 1.0), 1.0, 1e-10);
    EXPECT_NEAR(tail_mass(numeric, 1.0, kInfinity), 1.0, 1e-9);
    EXPECT_NEAR(tail_mass(numeric, 0.01, 0.2), 100.0 - 5.0, 1e-8);
}

TEST(TailMass, RejectsBadRadii) {
    const auto nu = levy::inverse_square_positive();
    EXPECT_THROW(tail_mass(nu, 0.0, 1.0), PreconditionError);
    EXPECT_THROW(tail_mass(nu, 0.7, 0.5), PreconditionError);
}

TEST(TailMass, NonfiniteMassIsDivergence) {
    const auto bad = levy::from_density(
        "nan", [](double) { return std::numeric_limits<double>::quiet_NaN(); },
        IntervalSet{{0.0, 1.0, false, false}});
    EXPECT_THROW(tail_mass(bad, 0.1, 0.5), MeasureDivergence);
}

TEST(TailMass, AdditiveAndMonotone) {
    for (const auto& nu : {levy::inverse_square_positive(), inverse_square_by_quadrature(),
                           levy::power_law(1.0, 1.5, 0.0, 3.0, true)}) {
        const double r1 = 0.05, r2 = 0.4, r3 = 2.5;
        EXPECT_NEAR(tail_mass(nu, r1, r3), tail_mass(nu, r1, r2) + tail_mass(nu, r2, r3),
                    1e-9 * tail_mass(nu, r1, r3));
        EXPECT_GE(tail_mass(nu, 0.1, 1.0), tail_mass(nu, 0.2, 1.0));
        EXPECT_LE(tail_mass(nu, 0.1, 1.0), tail_mass(nu, 0.1, 2.0));
    }
}

TEST(TailMass, SymmetricAnnulusCountsBothSides) {
    // |x|^-1.5 on both sides: each side of [0.25, 1) carries 2 (1/sqrt(0.25) - 1) = 2.
    const auto nu = levy::power_law(1.0, 1.5, 0.0, 10.0, true);
    EXPECT_NEAR(tail_mass(nu, 0.25, 1.0), 4.0, 1e-12);
}

TEST(UserTable, TrapezoidMass) {
    const auto nu = levy::user_table({{1.0, 1.0}, {0.1, 10.0}});
    EXPECT_NEAR(nu.mass_between(0.1, 1.0), 0.9 * 5.5, 1e-14);
    EXPECT_NEAR(nu.density(0.55), 5.5, 1e-12);
    EXPECT_EQ(nu.density(2.0), 0.0);
    EXPECT_THROW(levy::user_table({{0.1, -1.0}, {0.2, 1.0}}), PreconditionError);
}

TEST(Thresholds, SingleUnitControl) {
    const auto nu = levy::inverse_square_positive();
    const std::vector<double> u{1.0};
    const auto tau = jump_thresholds(nu, u);
    ASSERT_EQ(tau.size(), 2u);
    EXPECT_EQ(tau[0], 1.0);
    EXPECT_NEAR(tau[1], 0.5, 2e-12);
}

TEST(Thresholds, ZeroControlKeepsThreshold) {
    const auto nu = levy::inverse_square_positive();
    const std::vector<double> u{0.0};
    const auto tau = jump_thresholds(nu, u);
    EXPECT_EQ(tau, (std::vector<double>{1.0, 1.0}));
}

TEST(Thresholds, NestedPair) {
    // 1/r - 1 = 1/4 gives 0.8; then 1/r - 1/0.8 = 1 gives 4/9.
    const auto nu = levy::inverse_square_positive();
    const std::vector<double> u{2.0, 1.0};
    const auto tau = jump_thresholds(nu, u);
    EXPECT_NEAR(tau[1], 0.8, 2e-12);
    EXPECT_NEAR(tau[2], 4.0 / 9.0, 2e-12);
}

TEST(Thresholds, QuadratureMeasureMatchesClosedForm) {
    const std::vector<double> u{2.0, -1.0, 0.5};
    const auto a = jump_thresholds(levy::inverse_square_positive(), u);
    const auto b = jump_thresholds(inverse_square_by_quadrature(), u);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-9);
}

TEST(Thresholds, ThinMeasureIsInfeasible) {
    const auto nu = levy::uniform(1.0, 2.0);
    const std::vector<double> u{1.0};
    EXPECT_THROW(jump_thresholds(nu, u), ThresholdInfeasible);
}

TEST(Thresholds, DecreasingAndPositive) {
    const auto nu = levy::power_law(1.0, 2.5, 0.0, 5.0, true);
    const std::vector<double> u{0.5, 0.0, -0.3, 1.0};
    const auto tau = jump_thresholds(nu, u);
    for (std::size_t i = 1; i < tau.size(); ++i) {
        EXPECT_LE(tau[i], tau[i - 1]);
        EXPECT_GT(tau[i], 0.0);
    }
    EXPECT_EQ(tau[2], tau[1]);
}

TEST(Regions, MassesAndDisjointness) {
    const auto nu = levy::inverse_square_positive();
    const std::vector<double> u{2.0, 1.0};
    const auto jr = jump_regions(nu, u);
    ASSERT_EQ(jr.dimension(), 2u);
    EXPECT_NEAR(jr.masses[0], 0.25, 1e-8);
    EXPECT_NEAR(jr.masses[1], 1.0, 1e-8);
    // Restricted to the support, A1 = [0.8, 1) and A2 = [4/9, 0.8).
    ASSERT_EQ(jr.regions[0].size(), 1u);
    EXPECT_NEAR(jr.regions[0][0].lo, 0.8, 2e-12);
    EXPECT_EQ(jr.regions[0][0].hi, 1.0);
    EXPECT_TRUE(jr.regions[0][0].lo_closed);
    EXPECT_FALSE(jr.regions[0][0].hi_closed);
    EXPECT_NEAR(jr.regions[1][0].lo, 4.0 / 9.0, 2e-12);
    EXPECT_EQ(jr.regions[1][0].hi, jr.regions[0][0].lo);
    EXPECT_TRUE(pairwise_disjoint(jr));
}

TEST(Regions, ZeroControlsGiveEmptyRegions) {
    const auto nu = levy::inverse_square_positive();
    const std::vector<double> u{0.0, 0.0};
    const auto jr = jump_regions(nu, u);
    EXPECT_TRUE(jr.regions[0].empty());
    EXPECT_TRUE(jr.regions[1].empty());
    EXPECT_EQ(jr.masses, (std::vector<double>{0.0, 0.0}));
}

TEST(Regions, MassMultisetUnderPermutation) {
    const auto nu = levy::power_law(2.0, 2.0, 0.0, 4.0, true);
    const std::vector<double> a{2.0, 0.5, -1.0};
    const std::vector<double> b{-1.0, 2.0, 0.5};
    auto ma = jump_regions(nu, a).masses;
    auto mb = jump_regions(nu, b).masses;
    std::sort(ma.begin(), ma.end());
    std::sort(mb.begin(), mb.end());
    double total = 0.0;
    for (std::size_t i = 0; i < ma.size(); ++i) {
        EXPECT_NEAR(ma[i], mb[i], 1e-8);
        total += ma[i];
    }
    EXPECT_NEAR(total, 0.25 + 4.0 + 1.0, 3e-8);
}

TEST(Regions, TightToleranceReportsInconsistency) {
    const std::vector<double> u{1.0};
    EXPECT_THROW(jump_regions(inverse_square_by_quadrature(), u, 0.0), KernelInconsistent);
}

TEST(Admissibility, InverseSquarePasses) {
    const auto r = validate_measure(levy::inverse_square_positive());
    EXPECT_TRUE(r.integrable);
    EXPECT_TRUE(r.divergent_near_zero);
    EXPECT_TRUE(r.admissible());
}

TEST(Admissibility, UniformAwayFromZeroFailsDivergence) {
    const auto r = validate_measure(levy::uniform(1.0, 2.0));
    EXPECT_TRUE(r.integrable);
    EXPECT_FALSE(r.divergent_near_zero);
}

TEST(Admissibility, QuarticSingularityFailsIntegrability) {
    const auto r = validate_measure(levy::power_law(1.0, 4.0, 0.0, 1.0, false));
    EXPECT_FALSE(r.integrable);
}
