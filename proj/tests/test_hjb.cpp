#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "nmart/hjb.hpp"

using namespace nmart;

namespace {

Vec scalar(double v) { return Vec::Constant(1, v); }

ControlGrid grid_of(std::initializer_list<double> levels) {
    std::vector<ControlPoint> pts;
    bool zero = false;
    for (double u : levels) {
        pts.push_back(ControlPoint::jumps({u}));
        zero = zero || u == 0.0;
    }
    return ControlGrid(pts, ControlBounds{}, zero);
}

const ControlGrid& default_controls() {
    static const ControlGrid g = grid_of({0.0, 0.5, -0.5, 1.0, -1.0});
    return g;
}

DomainConfig domain(double half_width, double dy) {
    DomainConfig dc;
    dc.lo = {-half_width, -half_width};
    dc.hi = {half_width, half_width};
    dc.spacing = {dy, dy};
    return dc;
}

double closed_form(double t, const Vec& y) { return y.squaredNorm() + (1.0 - t); }

Window radius_window(double r) {
    Window w;
    w.lo = {-r, -r};
    w.hi = {r, r};
    return w;
}

} // namespace

TEST(BuildGrids, DefaultDomainStepCount) {
    const auto g = build_grids(DomainConfig{});
    EXPECT_EQ(g.time.n_steps, 420u);
    EXPECT_EQ(g.space.nodes(), 161u);
    EXPECT_LE(g.time.dt() * g.rate, 1.0);
}

TEST(BuildGrids, JumpOnlyRateIsDeltaSquared) {
    DomainConfig dc;
    dc.sigma_max = 0.0;
    const auto g = build_grids(dc);
    EXPECT_DOUBLE_EQ(g.rate, 16.0);
    EXPECT_LE(g.time.dt(), 0.25 * 0.25);
}

TEST(BuildGrids, FloorViolationIsInfeasible) {
    EXPECT_THROW(build_grids(domain(1.0, 1e-5)), GridInfeasible);
}

TEST(Solve, ConstantCostStaysConstant) {
    const auto p = problems::make("constant", 1, 1, {{"level", 0.37}});
    const auto field = solve(p.coeffs, p.cost, build_grids(domain(2.0, 0.1)), default_controls());
    for (const auto& slice : field.values)
        for (double v : slice) EXPECT_EQ(v, 0.37);
    EXPECT_EQ(residual(field, default_controls(), p.coeffs, Window{}), 0.0);
}

TEST(Solve, TerminalSliceIsCostAtNodes) {
    const auto p = problems::make("cosine", 1, 1);
    const auto field = solve(p.coeffs, p.cost, build_grids(domain(2.0, 0.1)), default_controls());
    for (std::size_t j = 0; j < field.space.nodes(); ++j)
        EXPECT_EQ(field.values.back()[j], p.cost(field.space.node(j)));
}

TEST(Solve, ClosedFormReproduced) {
    const auto p = problems::make("closed_form", 1, 1);
    const auto field = solve(p.coeffs, p.cost, build_grids(DomainConfig{}), default_controls());
    EXPECT_LE(max_node_error(field, radius_window(2.0), closed_form), 2e-2);
    for (const auto& slice : field.values)
        for (double v : slice) EXPECT_GE(v, 0.0);
}

TEST(Solve, TwoDimensionalClosedForm) {
    const auto p = problems::make("closed_form", 2, 2);
    auto dc = domain(3.0, 0.2);
    dc.m = 2;
    dc.d = 2;
    const auto controls = ControlGrid::product({}, {0.0, 0.5, -0.5}, 2, ControlBounds{});
    const auto field = solve(p.coeffs, p.cost, build_grids(dc), controls);
    const ExactSolution exact = [](double t, const Vec& y) { return y.squaredNorm() + 2.0 * (1.0 - t); };
    EXPECT_LE(max_node_error(field, radius_window(1.5), exact), 2e-2);
}

TEST(Solve, DeterministicFields) {
    const auto p = problems::make("cosine", 1, 1);
    const auto grids = build_grids(domain(2.0, 0.1));
    const auto a = solve(p.coeffs, p.cost, grids, default_controls());
    const auto b = solve(p.coeffs, p.cost, grids, default_controls());
    EXPECT_EQ(a.values, b.values);
    EXPECT_EQ(a.policy, b.policy);
}

TEST(Solve, CflViolationDetected) {
    const auto p = problems::make("cosine", 1, 1);
    auto grids = build_grids(domain(2.0, 0.1));
    grids.time = TimeGrid(grids.time.t0, grids.time.T, grids.time.n_steps / 2);
    EXPECT_THROW(solve(p.coeffs, p.cost, grids, default_controls()), CflViolation);
}

TEST(Solve, NonfiniteCostBlowsUp) {
    const auto p = problems::make("cosine", 1, 1);
    const CostSpec bad{[](const Vec& y) {
                           return y[0] > 1.0 ? std::numeric_limits<double>::quiet_NaN() : 0.0;
                       },
                       -1.0, 1.0};
    const auto grids = build_grids(domain(2.0, 0.1));
    try {
        solve(p.coeffs, bad, grids, default_controls());
        FAIL() << "expected SolverBlowup";
    } catch (const SolverBlowup& e) {
        EXPECT_EQ(e.slice(), grids.time.n_steps - 1);
    }
}

TEST(Solve, MaximumPrincipleForBoundedCost) {
    const auto p = problems::make("ou_cosine", 1, 1, {{"kappa", 1.0}, {"theta", 0.5}});
    DomainConfig dc = domain(3.0, 0.1);
    const auto first = build_grids(dc);
    dc.b_max = coefficient_bounds(p.coeffs, default_controls(), first.space).second;
    const auto field = solve(p.coeffs, p.cost, build_grids(dc), default_controls());
    for (const auto& slice : field.values)
        for (double v : slice) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
}

// The quadratic far-field closure is not monotone, so the comparison
// principles hold on the whole lattice only under the constant extension and
// inside the interior window under the default closure.
void expect_ordered(const ValueField& lower, const ValueField& upper, const Window& window) {
    for (std::size_t k = 0; k < lower.slices(); ++k)
        for (std::size_t j = 0; j < lower.space.nodes(); ++j)
            if (window.contains(lower.space.node(j))) {
                EXPECT_LE(lower.values[k][j], upper.values[k][j] + 1e-14);
            }
}

TEST(Solve, LargerControlSetNeverRaisesValue) {
    const auto p = problems::make("cosine", 1, 1);
    const auto grids = build_grids(domain(3.0, 0.1));
    SolveOptions constant;
    constant.far_field = Extension::Constant;
    expect_ordered(solve(p.coeffs, p.cost, grids, default_controls(), constant),
                   solve(p.coeffs, p.cost, grids, grid_of({0.0}), constant), Window{});
    const auto large = solve(p.coeffs, p.cost, grids, default_controls());
    expect_ordered(large, solve(p.coeffs, p.cost, grids, grid_of({0.0})),
                   interior_window(large.space, default_controls(), 1.0));
}

TEST(Solve, OrderedDataGiveOrderedValues) {
    const auto p = problems::make("cosine", 1, 1);
    const CostSpec low{[](const Vec& y) { return std::cos(y[0]); }, -1.0, 1.0};
    const CostSpec high{[](const Vec& y) { return std::max(std::cos(y[0]), std::cos(2.0 * y[0])); },
                        -1.0, 1.0};
    const auto grids = build_grids(domain(3.0, 0.1));
    SolveOptions constant;
    constant.far_field = Extension::Constant;
    expect_ordered(solve(p.coeffs, low, grids, default_controls(), constant),
                   solve(p.coeffs, high, grids, default_controls(), constant), Window{});
    const auto v1 = solve(p.coeffs, low, grids, default_controls());
    expect_ordered(v1, solve(p.coeffs, high, grids, default_controls()),
                   interior_window(v1.space, default_controls(), 1.0));
}

TEST(Interp, NodesMidpointsAndClamping) {
    ValueField f;
    f.space = SpatialGrid::uniform(1, {0.0, 0.0}, {1.0, 0.0}, {0.5, 0.5});
    f.time = TimeGrid(0.0, 1.0, 1);
    f.values = {{1.0, 2.0, 3.0}, {5.0, 7.0, 11.0}};
    f.policy = {{0, 0, 0}, {0, 0, 0}};
    EXPECT_EQ(interp(f, 1.0, scalar(0.5)), 7.0);
    EXPECT_EQ(interp(f, 0.0, scalar(0.25)), 1.5);
    EXPECT_EQ(interp(f, 0.5, scalar(0.5)), 4.5);
    InterpStats stats;
    EXPECT_EQ(interp(f, 1.0, scalar(3.0), &stats), 11.0);
    EXPECT_EQ(interp(f, 0.0, scalar(-1.0), &stats), 1.0);
    EXPECT_DOUBLE_EQ(interp(f, 0.0, scalar(0.6), &stats), 2.2);
    EXPECT_EQ(stats.clamped, 2u);
    EXPECT_EQ(stats.queries, 3u);
}

TEST(Residual, FreshFieldAndPerturbation) {
    const auto p = problems::make("cosine", 1, 1);
    const auto grids = build_grids(DomainConfig{});
    auto field = solve(p.coeffs, p.cost, grids, default_controls());
    const Window window = interior_window(field.space, default_controls(), 1.0);
    EXPECT_LE(residual(field, default_controls(), p.coeffs, window), 1e-10);
    const std::size_t mid = nearest_node(field.space, scalar(0.0));
    field.values[200][mid] += 1e-3;
    EXPECT_GE(residual(field, default_controls(), p.coeffs, window), 1e-4);
}

TEST(Policy, QuarticPicksGaussianNearZero) {
    const auto p = problems::make("quartic", 1, 1);
    const auto controls = grid_of({0.5, 0.0, -0.5});
    const auto grids = build_grids(DomainConfig{});
    const auto field = solve(p.coeffs, p.cost, grids, controls);
    const Policy policy = extract_policy(field);
    EXPECT_EQ(policy(1.0 - grids.time.dt(), scalar(0.0)).u[0], 0.0);
    EXPECT_EQ(policy(1.0, scalar(0.0)).u[0], 0.0);
    for (double y : {-3.0, -0.7, 0.2, 2.5}) {
        const ControlPoint cp = policy(0.5, scalar(y));
        bool member = false;
        for (const auto& c : controls.points()) member = member || c == cp;
        EXPECT_TRUE(member);
    }
}

TEST(Policy, FlatHamiltonianSelectsFirstControlInside) {
    const auto p = problems::make("closed_form", 1, 1);
    const auto field = solve(p.coeffs, p.cost, build_grids(DomainConfig{}), default_controls());
    const Window window = interior_window(field.space, default_controls(), 1.0);
    std::size_t first = 0, total = 0;
    for (std::size_t k = 0; k < field.slices(); ++k)
        for (std::size_t j = 0; j < field.space.nodes(); ++j) {
            if (!window.contains(field.space.node(j))) continue;
            ++total;
            first += field.policy[k][j] == 0;
        }
    EXPECT_EQ(first, total);
}

TEST(Refine, IdenticalAndConstantFieldsAgree) {
    const auto c = problems::make("constant", 1, 1, {{"level", -0.2}});
    const auto coarse = solve(c.coeffs, c.cost, build_grids(domain(3.0, 0.1)), default_controls());
    const auto fine = solve(c.coeffs, c.cost, build_grids(domain(3.0, 0.05)), default_controls());
    EXPECT_EQ(refine_check(coarse, fine, radius_window(1.0)).sup_difference, 0.0);

    const auto q = problems::make("cosine", 1, 1);
    const auto a = solve(q.coeffs, q.cost, build_grids(domain(3.0, 0.1)), default_controls());
    EXPECT_EQ(refine_check(a, a, radius_window(1.0)).sup_difference, 0.0);
}

TEST(Refine, ClosedFormErrorsShrink) {
    const auto p = problems::make("closed_form", 1, 1);
    const auto coarse = solve(p.coeffs, p.cost, build_grids(domain(4.0, 0.1)), default_controls());
    const auto fine = solve(p.coeffs, p.cost, build_grids(domain(4.0, 0.05)), default_controls());
    const auto r = refine_check(coarse, fine, radius_window(2.0), closed_form);
    ASSERT_TRUE(r.coarse_error && r.fine_error);
    EXPECT_LE(*r.coarse_error, 2e-2);
    EXPECT_LE(*r.fine_error, 2e-2);
    EXPECT_LT(*r.fine_error, *r.coarse_error);
}

TEST(Extension, ConstantFarFieldStaysInRange) {
    const auto p = problems::make("cosine", 1, 1);
    SolveOptions opts;
    opts.far_field = Extension::Constant;
    const auto grids = build_grids(domain(2.0, 0.1));
    const auto clamp = solve(p.coeffs, p.cost, grids, default_controls(), opts);
    const auto quad = solve(p.coeffs, p.cost, grids, default_controls());
    for (std::size_t k = 0; k < clamp.slices(); ++k)
        for (double v : clamp.values[k]) {
            EXPECT_GE(v, -1.0);
            EXPECT_LE(v, 1.0);
        }
    // Both closures agree away from the boundary band.
    const std::size_t mid = nearest_node(grids.space, scalar(0.0));
    EXPECT_NEAR(clamp.values[0][mid], quad.values[0][mid], 1e-2);
}
