#pragma once

/// Controlled dynamics dY = b(Y, pi, u) dt + sigma(Y-, pi, u) dX driven by a
/// structure-equation martingale, with Monte Carlo cost/value estimators and
/// a one-sided dynamic-programming probe.

#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/martingale.hpp"
#include "nmart/problem.hpp"
#include "nmart/stats.hpp"
#include "nmart/types.hpp"
#include "nmart/value_field.hpp"

namespace nmart {

inline constexpr double kBlowupNorm = 1e9;

/// Joint (X, Y) trajectory. Step k uses the control recorded in
/// x.u_path row k and pi row k.
struct ControlledPath {
    MartingalePath x;
    std::size_t m = 0;
    std::size_t pi_dim = 0;
    std::vector<double> y;  ///< (n + 1) x m
    std::vector<double> pi; ///< n x pi_dim

    std::size_t steps() const noexcept { return x.steps(); }
    Vec state(std::size_t k) const {
        return Eigen::Map<const Vec>(y.data() + k * m, static_cast<Eigen::Index>(m));
    }
    ControlPoint control(std::size_t k) const {
        Vec p = Eigen::Map<const Vec>(pi.data() + k * pi_dim, static_cast<Eigen::Index>(pi_dim));
        Vec u = Eigen::Map<const Vec>(x.u_path.data() + k * x.d, static_cast<Eigen::Index>(x.d));
        return {p, u};
    }
};

namespace detail {

/// Euler stepping of (X, Y). Calls visit(k, t_k, Y_k) for k = 0..n and
/// returns the step index at which the path blew up, if any.
template <class Visitor>
std::optional<std::size_t> walk_controlled(const Coefficients& coeffs, const ControlBounds& bounds,
                                           const Vec& y0, const Policy& policy,
                                           const TimeGrid& grid, std::uint64_t seed,
                                           std::uint64_t path_index, Visitor&& visit,
                                           ControlledPath* record) {
    const std::size_t d = coeffs.d;
    PathStreams streams(seed, path_index, d);
    const double dt = grid.dt();
    Vec y = y0;
    Vec dx(static_cast<Eigen::Index>(d));
    if (record) {
        record->x = MartingalePath(d, grid);
        record->m = coeffs.m;
        record->y.assign((grid.n_steps + 1) * coeffs.m, 0.0);
        for (std::size_t a = 0; a < coeffs.m; ++a) record->y[a] = y0[static_cast<Eigen::Index>(a)];
    }
    visit(std::size_t{0}, grid.t0, y);
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const double t = grid.time(k);
        const ControlPoint cp = policy(t, y);
        require_admissible(cp, bounds, "simulate_controlled");
        if (static_cast<std::size_t>(cp.u.size()) != d)
            throw PreconditionError("simulate_controlled: policy returned wrong u dimension");
        for (std::size_t i = 0; i < d; ++i) {
            long count = 0;
            const double ui = cp.u[static_cast<Eigen::Index>(i)];
            dx[static_cast<Eigen::Index>(i)] = martingale_increment(streams, i, ui, dt, count);
            if (record) {
                record->x.u_path[k * d + i] = ui;
                record->x.jump_counts[k * d + i] = count;
                record->x.x(k + 1, i) = record->x.x(k, i) + dx[static_cast<Eigen::Index>(i)];
            }
        }
        y += coeffs.b(y, cp) * dt + coeffs.sigma(y, cp) * dx;
        if (record) {
            if (k == 0) {
                record->pi_dim = static_cast<std::size_t>(cp.pi.size());
                record->pi.assign(grid.n_steps * record->pi_dim, 0.0);
            }
            for (std::size_t a = 0; a < record->pi_dim; ++a)
                record->pi[k * record->pi_dim + a] = cp.pi[static_cast<Eigen::Index>(a)];
            for (std::size_t a = 0; a < coeffs.m; ++a)
                record->y[(k + 1) * coeffs.m + a] = y[static_cast<Eigen::Index>(a)];
        }
        if (!y.allFinite() || y.norm() > kBlowupNorm) return k + 1;
        visit(k + 1, grid.time(k + 1), y);
    }
    return std::nullopt;
}

} // namespace detail

/// Euler scheme with left-endpoint coefficients; X increments follow the
/// martingale step rule for the control chosen at t_k.
inline ControlledPath simulate_controlled(const Coefficients& coeffs, const ControlBounds& bounds,
                                          const Vec& y0, const Policy& policy,
                                          const TimeGrid& grid, std::uint64_t seed,
                                          std::uint64_t path_index = 0) {
    if (static_cast<std::size_t>(y0.size()) != coeffs.m)
        throw PreconditionError("simulate_controlled: y0 has wrong dimension");
    ControlledPath path;
    auto blown = detail::walk_controlled(coeffs, bounds, y0, policy, grid, seed, path_index,
                                         [](std::size_t, double, const Vec&) {}, &path);
    if (blown) throw NumericalBlowup("simulate_controlled: state left the finite range", *blown);
    return path;
}

struct CostEstimate {
    Estimate estimate;
    std::size_t blowups = 0;
};

/// Paths abort beyond |Y| = 1e9; more than 0.1% aborted paths fail the run.
inline CostEstimate mc_cost(const Coefficients& coeffs, const ControlBounds& bounds,
                            const CostSpec& cost, const Vec& y0, const Policy& policy,
                            std::size_t n_paths, const TimeGrid& grid, std::uint64_t seed) {
    if (n_paths < 2) throw PreconditionError("mc_cost: need at least two paths");
    RunningStats stats;
    CostEstimate out;
    std::optional<std::size_t> first_blowup;
    for (std::size_t p = 0; p < n_paths; ++p) {
        Vec terminal = y0;
        auto blown = detail::walk_controlled(
            coeffs, bounds, y0, policy, grid, seed, p,
            [&](std::size_t k, double, const Vec& y) {
                if (k == grid.n_steps) terminal = y;
            },
            nullptr);
        if (blown) {
            ++out.blowups;
            if (!first_blowup) first_blowup = *blown;
            continue;
        }
        stats.push(cost(terminal));
    }
    if (static_cast<double>(out.blowups) > 1e-3 * static_cast<double>(n_paths))
        throw NumericalBlowup("mc_cost: " + std::to_string(out.blowups) + " of " +
                                  std::to_string(n_paths) + " paths blew up",
                              *first_blowup);
    out.estimate = Estimate::from(stats);
    return out;
}

struct ConstantControlSweep {
    std::vector<ControlPoint> controls;
    std::vector<CostEstimate> estimates;
    std::size_t best = 0;

    const Estimate& best_estimate() const { return estimates.at(best).estimate; }
};

/// Minimum of mc_cost over the constant policies of a control grid: an
/// upper bound for the value. Every control reuses the same root seed
/// (common random numbers); ties resolve to the first index.
inline ConstantControlSweep mc_value_constant_controls(const Coefficients& coeffs,
                                                       const CostSpec& cost, const Vec& y0,
                                                       const ControlGrid& controls,
                                                       std::size_t n_paths, const TimeGrid& grid,
                                                       std::uint64_t seed) {
    ConstantControlSweep out;
    for (std::size_t c = 0; c < controls.size(); ++c) {
        out.controls.push_back(controls[c]);
        out.estimates.push_back(mc_cost(coeffs, controls.bounds(), cost, y0,
                                        constant_policy(controls[c]), n_paths, grid, seed));
        if (out.estimates[c].estimate.mean < out.estimates[out.best].estimate.mean) out.best = c;
    }
    return out;
}

/// Estimate of E[sup_s |Y_s|^2] / (1 + |y0|^2).
inline Estimate moment_bound_check(const Coefficients& coeffs, const ControlBounds& bounds,
                                   const Vec& y0, const Policy& policy, std::size_t n_paths,
                                   const TimeGrid& grid, std::uint64_t seed) {
    RunningStats stats;
    const double scale = 1.0 + y0.squaredNorm();
    for (std::size_t p = 0; p < n_paths; ++p) {
        double sup = 0.0;
        auto blown = detail::walk_controlled(
            coeffs, bounds, y0, policy, grid, seed, p,
            [&](std::size_t, double, const Vec& y) { sup = std::max(sup, y.squaredNorm()); },
            nullptr);
        if (blown) throw NumericalBlowup("moment_bound_check: path blew up", *blown);
        stats.push(sup / scale);
    }
    return Estimate::from(stats);
}

struct DppGap {
    double gap = 0.0;             ///< min_c E[V(t+h, Y^c_{t+h})] - V(t, y)
    double std_error = 0.0;       ///< standard error of the minimizing estimate
    double c_h = 0.0;             ///< max(gap, 0) / h
    double clamped_fraction = 0.0;
    std::size_t best = 0;
    std::vector<Estimate> per_control;
};

/// One-sided dynamic-programming probe over constant controls.
inline DppGap dpp_gap(const Coefficients& coeffs, const ValueField& field, double t0,
                      const Vec& y0, double h, const ControlGrid& controls, std::size_t n_paths,
                      double dt, std::uint64_t seed) {
    DppGap out;
    if (h < 0.0 || t0 + h > field.time.T + 1e-12)
        throw PreconditionError("dpp_gap: need 0 <= h <= T - t0");
    if (h == 0.0) {
        out.per_control.assign(controls.size(), Estimate{interp(field, t0, y0), 0.0, 0});
        return out;
    }
    const double here = interp(field, t0, y0);
    const TimeGrid inner = TimeGrid::with_step(t0, t0 + h, dt);
    InterpStats clamp;
    for (std::size_t c = 0; c < controls.size(); ++c) {
        RunningStats stats;
        const Policy policy = constant_policy(controls[c]);
        for (std::size_t p = 0; p < n_paths; ++p) {
            Vec terminal = y0;
            auto blown = detail::walk_controlled(
                coeffs, controls.bounds(), y0, policy, inner, seed, p,
                [&](std::size_t k, double, const Vec& y) {
                    if (k == inner.n_steps) terminal = y;
                },
                nullptr);
            if (blown) throw NumericalBlowup("dpp_gap: inner path blew up", *blown);
            stats.push(interp(field, t0 + h, terminal, &clamp));
        }
        out.per_control.push_back(Estimate::from(stats));
        if (out.per_control[c].mean < out.per_control[out.best].mean) out.best = c;
    }
    out.gap = out.per_control[out.best].mean - here;
    out.std_error = out.per_control[out.best].std_error;
    out.c_h = std::max(out.gap, 0.0) / h;
    out.clamped_fraction = clamp.clamped_fraction();
    return out;
}

} // namespace nmart
