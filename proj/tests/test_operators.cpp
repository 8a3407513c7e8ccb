#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "nmart/controlled.hpp"
#include "nmart/hjb.hpp"
#include "nmart/operators.hpp"

using namespace nmart;

namespace {

constexpr std::uint64_t kSeed = 20240601;

Vec scalar(double v) { return Vec::Constant(1, v); }

const Coefficients& unit_brownian() {
    static const Coefficients c = problems::make("closed_form", 1, 1).coeffs;
    return c;
}

ControlGrid grid_of(std::initializer_list<double> levels) {
    std::vector<ControlPoint> pts;
    bool zero = false;
    for (double u : levels) {
        pts.push_back(ControlPoint::jumps({u}));
        zero = zero || u == 0.0;
    }
    return ControlGrid(pts, ControlBounds{}, zero);
}

double mean_ito_residual(const TestFunction& phi, double u, double dt, int paths) {
    const auto& c = unit_brownian();
    const TimeGrid grid = TimeGrid::with_step(0.0, 1.0, dt);
    double total = 0.0;
    for (int p = 0; p < paths; ++p) {
        const auto path = simulate_controlled(c, ControlBounds{}, scalar(0.3),
                                              constant_policy(ControlPoint::jumps({u})), grid, kSeed, p);
        total += ito_residual(path, phi, c);
    }
    return total / paths;
}

} // namespace

TEST(GenA, LinearFunctionGivesSlopeForEveryJump) {
    const auto phi = TestFunction::affine(0.0, scalar(1.7));
    for (double u : {0.0, 0.25, -0.5, 1.0})
        EXPECT_NEAR(gen_A(0, ControlPoint::jumps({u}), phi, 0.1, scalar(0.4), unit_brownian()), 1.7, 1e-14);
}

TEST(GenA, Branches) {
    const auto phi = TestFunction::square(1);
    EXPECT_EQ(gen_A(0, ControlPoint::jumps({0.0}), phi, 0.0, scalar(0.6), unit_brownian()), 1.2);
    EXPECT_EQ(gen_A(0, ControlPoint::jumps({1.0}), phi, 0.0, scalar(0.0), unit_brownian()), 1.0);
    EXPECT_THROW(gen_A(1, ControlPoint::jumps({1.0}), phi, 0.0, scalar(0.0), unit_brownian()),
                 PreconditionError);
}

TEST(GenL, SquareIsOneOnEveryBranch) {
    const auto phi = TestFunction::square(1);
    for (double u : {0.0, 0.7, -0.3, 1.0})
        EXPECT_NEAR(gen_L(ControlPoint::jumps({u}), phi, 0.0, scalar(0.9), unit_brownian()), 1.0, 1e-14);
}

TEST(GenL, ExponentialUnitJump) {
    const auto phi = TestFunction::exponential(1);
    EXPECT_NEAR(gen_L(ControlPoint::jumps({1.0}), phi, 0.0, scalar(0.0), unit_brownian()),
                std::numbers::e - 2.0, 1e-14);
    EXPECT_NEAR(gen_L(ControlPoint::jumps({0.0}), phi, 0.0, scalar(0.0), unit_brownian()), 0.5, 1e-15);
}

TEST(GenL, QuadraticExactnessInTwoDimensions) {
    const auto p = problems::make("closed_form", 2, 2, {{"sigma", 0.8}});
    const auto phi = TestFunction::quadratic_value(2, 1.0);
    Vec y(2);
    y << 0.3, -1.2;
    const double gaussian = gen_L(ControlPoint::jumps({0.0, 0.0}), phi, 0.2, y, p.coeffs);
    EXPECT_NEAR(gaussian, 0.64 * 2.0, 1e-14);
    for (double u1 : {0.5, -1.0})
        for (double u2 : {0.0, 0.25})
            EXPECT_NEAR(gen_L(ControlPoint::jumps({u1, u2}), phi, 0.2, y, p.coeffs), gaussian, 1e-13);
}

TEST(GenL, DriftEntersThroughGradient) {
    const auto p = problems::make("ou_cosine", 1, 1, {{"kappa", 2.0}, {"theta", 1.0}});
    const auto phi = TestFunction::affine(0.0, scalar(3.0));
    // b(0.5) = 2 (1 - 0.5) = 1 and the linear function has no curvature.
    EXPECT_NEAR(gen_L(ControlPoint::jumps({0.5}), phi, 0.0, scalar(0.5), p.coeffs), 3.0, 1e-14);
}

TEST(GenL, SmallJumpLimitApproachesGaussianBranch) {
    const auto phi = TestFunction::exponential(1);
    const double local = gen_L(ControlPoint::jumps({0.0}), phi, 0.0, scalar(0.2), unit_brownian());
    double previous = std::numeric_limits<double>::infinity();
    for (double eps : {1e-1, 1e-2, 1e-3}) {
        for (double sign : {1.0, -1.0}) {
            const double gap = std::abs(
                gen_L(ControlPoint::jumps({sign * eps}), phi, 0.0, scalar(0.2), unit_brownian()) - local);
            EXPECT_LT(gap, previous);
            // Third-order Taylor term: e^y eps / 6.
            EXPECT_NEAR(gap, std::exp(0.2) * eps / 6.0, 0.1 * std::exp(0.2) * eps / 6.0 + 1e-9);
        }
        previous = std::abs(gen_L(ControlPoint::jumps({-eps}), phi, 0.0, scalar(0.2), unit_brownian()) - local);
    }
}

TEST(GenLDelta, IdentityWhenFieldEqualsPhi) {
    const auto phi = TestFunction::exponential(1);
    const FieldReader same = [&phi](double t, const Vec& y) { return phi(t, y); };
    for (double u : {0.0, 0.25, 0.5, -1.0})
        for (double delta : {0.1, 0.3, 2.0}) {
            const auto cp = ControlPoint::jumps({u});
            EXPECT_EQ(gen_L_delta(cp, same, phi, delta, 0.0, scalar(-0.4), unit_brownian()),
                      gen_L(cp, phi, 0.0, scalar(-0.4), unit_brownian()));
        }
}

TEST(GenLDelta, SmallDeltaUsesFieldOnly) {
    const auto phi = TestFunction::square(1);
    const FieldReader zero = [](double, const Vec&) { return 0.0; };
    // delta below the gap: every jump reads the field, so only -u grad.sigma / u^2 remains.
    EXPECT_NEAR(gen_L_delta(ControlPoint::jumps({0.5}), zero, phi, 0.1, 0.0, scalar(1.0), unit_brownian()),
                -0.5 * 2.0 / 0.25, 1e-14);
    EXPECT_THROW(gen_L_delta(ControlPoint::jumps({0.5}), zero, phi, 0.0, 0.0, scalar(1.0), unit_brownian()),
                 PreconditionError);
}

TEST(GenLDelta, ClosedFormFieldMatchesGenL) {
    const auto p = problems::make("closed_form", 1, 1);
    const auto controls = grid_of({0.0, 0.5, -0.5, 1.0, -1.0});
    const auto field = solve(p.coeffs, p.cost, build_grids(DomainConfig{}), controls);
    const auto phi = TestFunction::square(1);
    for (const auto& cp : controls.points())
        for (double y : {-1.0, 0.03, 1.5}) {
            InterpStats stats;
            const double v = gen_L_delta(cp, field, phi, 0.1, 0.5, scalar(y), p.coeffs, &stats);
            EXPECT_NEAR(v, gen_L(cp, phi, 0.5, scalar(y), p.coeffs), 1e-2);
            EXPECT_EQ(stats.clamped_fraction(), 0.0);
        }
}

TEST(Hamiltonian, TiesResolveToFirstIndex) {
    const auto controls = grid_of({0.0, 0.5, -0.5});
    const auto h = hamiltonian(0.0, scalar(0.7), TestFunction::square(1), controls, unit_brownian());
    EXPECT_NEAR(h.value, 1.0, 1e-14);
    EXPECT_EQ(h.index, 0u);
}

TEST(Hamiltonian, QuarticPrefersGaussian) {
    const auto controls = grid_of({0.5, 0.0, -0.5});
    const auto phi = TestFunction::quartic(1);
    EXPECT_NEAR(gen_L(controls[0], phi, 0.0, scalar(0.0), unit_brownian()), 0.25, 1e-15);
    const auto h = hamiltonian(0.0, scalar(0.0), phi, controls, unit_brownian());
    EXPECT_EQ(h.value, 0.0);
    EXPECT_EQ(h.index, 1u);
}

TEST(Hamiltonian, SingletonAndLowerBound) {
    const auto phi = TestFunction::exponential(1);
    const auto single = grid_of({-1.0});
    EXPECT_EQ(hamiltonian(0.0, scalar(0.1), phi, single, unit_brownian()).value,
              gen_L(single[0], phi, 0.0, scalar(0.1), unit_brownian()));
    const auto controls = grid_of({0.0, 0.5, -0.5, 1.0, -1.0});
    const auto h = hamiltonian(0.0, scalar(0.1), phi, controls, unit_brownian());
    for (const auto& cp : controls.points())
        EXPECT_LE(h.value, gen_L(cp, phi, 0.0, scalar(0.1), unit_brownian()));
    EXPECT_EQ(controls[h.index].u[0], -1.0);
}

TEST(ItoResidual, AffineFunctionsAreExact) {
    const auto& c = unit_brownian();
    const TimeGrid grid(0.0, 1.0, 500);
    const auto path = simulate_controlled(c, ControlBounds{}, scalar(0.3),
                                          [](double, const Vec& y) {
                                              return ControlPoint::jumps({y[0] > 0.3 ? 0.5 : 0.0});
                                          },
                                          grid, kSeed);
    EXPECT_LE(ito_residual(path, TestFunction::affine(1.0, scalar(0.0)), c), 1e-13);
    EXPECT_LE(ito_residual(path, TestFunction::affine(0.0, scalar(2.5), 1.0), c), 1e-12);
}

TEST(ItoResidual, PureJumpSquareIsFirstOrder) {
    const auto phi = TestFunction::square(1);
    // Steps short enough that two jumps in one step (an O(1) residual) stay rare.
    const double coarse = mean_ito_residual(phi, 0.5, 2e-5, 100);
    const double fine = mean_ito_residual(phi, 0.5, 1e-5, 100);
    EXPECT_GE(coarse / fine, 1.5);
    EXPECT_LE(coarse / fine, 2.5);
}

TEST(TestFunctionCheck, WrongDerivativesRejected) {
    EXPECT_THROW(TestFunction(
                     1, [](double, const Vec& y) { return y.squaredNorm(); },
                     [](double, const Vec&) { return 0.0; },
                     [](double, const Vec& y) { return (3.0 * y).eval(); },
                     [](double, const Vec&) { return Mat::Constant(1, 1, 2.0).eval(); }),
                 PreconditionError);
    EXPECT_THROW(TestFunction(
                     1, [](double t, const Vec&) { return t * t; },
                     [](double, const Vec&) { return 1.0; },
                     [](double, const Vec&) { return Vec::Zero(1).eval(); },
                     [](double, const Vec&) { return Mat::Zero(1, 1).eval(); }),
                 PreconditionError);
    EXPECT_NO_THROW(TestFunction::quadratic_value(2, 1.0));
}
