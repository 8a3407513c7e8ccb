#pragma once

/// Explicit monotone scheme for the terminal-value problem
///   -dV/dt - min_{(pi, u)} L_{pi,u}[V] = 0,  V(T, .) = g
/// on a uniform lattice in one or two space dimensions.
///
/// For a control point the discrete operator at node y is
///   w . D_up V + sum_{u^i = 0} 1/2 (V(y + h s) - 2 V + V(y - h s)) / h^2
///              + sum_{u^i != 0} (V(y + u^i s^i) - V) / (u^i)^2
/// with s = sigma^i, w = b - sum_{u^i != 0} s^i / u^i and D_up the upwind
/// difference in the sign of w. The directional step h is the largest one
/// moving at most one cell along every axis. Off-lattice reads are
/// multilinear inside the domain and use the configured far-field rule
/// beyond it.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/problem.hpp"
#include "nmart/types.hpp"
#include "nmart/value_field.hpp"

namespace nmart {

/// Spatial box, resolution, horizon and the coefficient bounds that enter
/// the time-step restriction.
struct DomainConfig {
    std::size_t m = 1;
    std::array<double, 2> lo{-4.0, -4.0};
    std::array<double, 2> hi{4.0, 4.0};
    std::array<double, 2> spacing{0.05, 0.05};
    double t0 = 0.0;
    double T = 1.0;
    std::size_t d = 1;
    double delta0 = 0.25;
    double sigma_max = 1.0; ///< max |sigma_ai| over states and controls
    double b_max = 0.0;     ///< max sum_a |b_a| over states and controls
    double dt_floor = 1e-7;
    std::size_t step_multiple = 10; ///< step counts are rounded up to a multiple of this
};

struct Grids {
    SpatialGrid space;
    TimeGrid time;
    double rate = 0.0; ///< bound on the diagonal rate used for the step choice
};

/// Largest |sigma| entry and largest l1 drift over the lattice nodes and
/// control points.
inline std::pair<double, double> coefficient_bounds(const Coefficients& coeffs,
                                                    const ControlGrid& controls,
                                                    const SpatialGrid& space) {
    double s = 0.0;
    double b = 0.0;
    for (std::size_t n = 0; n < space.nodes(); ++n) {
        const Vec y = space.node(n);
        for (const auto& cp : controls.points()) {
            s = std::max(s, coeffs.sigma(y, cp).cwiseAbs().maxCoeff());
            b = std::max(b, coeffs.b(y, cp).cwiseAbs().sum());
        }
    }
    return {s, b};
}

/// Chooses dt from
///   dt * (sum_i max(sigma^2/dy^2, sigma/(delta0 dy)) + d/delta0^2 + |b|/dy) <= 1
/// where the middle branch bounds the compensator drift of a jump column.
/// The step count is rounded up to a multiple of `step_multiple`.
inline Grids build_grids(const DomainConfig& cfg) {
    Grids out;
    out.space = SpatialGrid::uniform(cfg.m, cfg.lo, cfg.hi, cfg.spacing);
    if (!(cfg.T > cfg.t0)) throw PreconditionError("build_grids: need t0 < T");
    if (!(cfg.delta0 > 0.0)) throw PreconditionError("build_grids: delta0 must be positive");
    double dy = out.space.dy[0];
    if (cfg.m == 2) dy = std::min(dy, out.space.dy[1]);
    const double diffusion = cfg.sigma_max * cfg.sigma_max / (dy * dy);
    const double compensator = static_cast<double>(cfg.m) * cfg.sigma_max / (cfg.delta0 * dy);
    out.rate = static_cast<double>(cfg.d) * std::max(diffusion, compensator) +
               static_cast<double>(cfg.d) / (cfg.delta0 * cfg.delta0) + cfg.b_max / dy;
    const double span = cfg.T - cfg.t0;
    double steps = std::ceil(span * out.rate - 1e-9);
    const auto mult = static_cast<double>(std::max<std::size_t>(cfg.step_multiple, 1));
    steps = std::max(mult, std::ceil(steps / mult) * mult);
    if (!(span / steps >= cfg.dt_floor) || !std::isfinite(steps))
        throw GridInfeasible("build_grids: time step " + std::to_string(span / steps) +
                             " falls below the floor " + std::to_string(cfg.dt_floor));
    out.time = TimeGrid(cfg.t0, cfg.T, static_cast<std::size_t>(steps));
    return out;
}

/// Discrete generator, precomputed for every (node, control) pair.
class DiscreteOperator {
public:
    DiscreteOperator(const SpatialGrid& space, const Coefficients& coeffs,
                     const ControlGrid& controls, Extension far_field, double range_lo,
                     double range_hi)
        : space_(space), n_controls_(controls.size()), range_lo_(range_lo), range_hi_(range_hi) {
        if (coeffs.m != space.m) throw PreconditionError("DiscreteOperator: m mismatch");
        if (controls.d() != coeffs.d) throw PreconditionError("DiscreteOperator: d mismatch");
        const std::size_t nodes = space.nodes();
        const auto m = static_cast<Eigen::Index>(space.m);
        ranges_.reserve(nodes * n_controls_ + 1);
        diag_.reserve(nodes * n_controls_);
        for (std::size_t n = 0; n < nodes; ++n) {
            const Vec y = space.node(n);
            for (std::size_t c = 0; c < n_controls_; ++c) {
                const ControlPoint& cp = controls[c];
                ranges_.push_back(static_cast<std::uint32_t>(terms_.size()));
                const Vec b = coeffs.b(y, cp);
                const Mat sigma = coeffs.sigma(y, cp);
                Vec w = b;
                double diag = 0.0;
                for (std::size_t i = 0; i < coeffs.d; ++i) {
                    const Vec s = sigma.col(static_cast<Eigen::Index>(i));
                    const double u = cp.u[static_cast<Eigen::Index>(i)];
                    if (u != 0.0) {
                        w -= s / u;
                        add_term(make_sample(space, y + u * s, far_field), 1.0 / (u * u));
                        diag += 1.0 / (u * u);
                        continue;
                    }
                    double reach = 0.0;
                    for (Eigen::Index a = 0; a < m; ++a)
                        reach = std::max(reach, std::abs(s[a]) / space.dy[static_cast<std::size_t>(a)]);
                    if (reach == 0.0) continue;
                    const double h = 1.0 / reach;
                    const double coef = 0.5 / (h * h);
                    add_term(make_sample(space, y + h * s, far_field), coef);
                    add_term(make_sample(space, y - h * s, far_field), coef);
                    diag += 2.0 * coef;
                }
                for (Eigen::Index a = 0; a < m; ++a) {
                    if (w[a] == 0.0) continue;
                    const auto axis = static_cast<std::size_t>(a);
                    Vec shift = Vec::Zero(m);
                    shift[a] = w[a] > 0.0 ? space.dy[axis] : -space.dy[axis];
                    const double coef = std::abs(w[a]) / space.dy[axis];
                    add_term(make_sample(space, y + shift, far_field), coef);
                    diag += coef;
                }
                diag_.push_back(diag);
                max_rate_ = std::max(max_rate_, diag);
            }
        }
        ranges_.push_back(static_cast<std::uint32_t>(terms_.size()));
    }

    std::size_t nodes() const noexcept { return space_.nodes(); }
    std::size_t controls() const noexcept { return n_controls_; }
    /// Largest diagonal rate; dt times this must not exceed 1.
    double max_rate() const noexcept { return max_rate_; }

    /// L_h[V] at a node for control c.
    double apply(const std::vector<double>& v, std::size_t node, std::size_t c) const {
        const std::size_t k = node * n_controls_ + c;
        double acc = -diag_[k] * v[node];
        for (std::uint32_t j = ranges_[k]; j < ranges_[k + 1]; ++j) {
            const Term& t = terms_[j];
            double s = 0.0;
            for (std::uint32_t q = t.first; q < t.first + t.count; ++q)
                s += taps_[q].weight * v[taps_[q].index];
            if (t.outside) s = std::clamp(s, range_lo_, range_hi_);
            acc += t.coef * s;
        }
        return acc;
    }

    /// Minimum over controls with first-index tie breaking.
    std::pair<double, std::uint32_t> minimize(const std::vector<double>& v,
                                              std::size_t node) const {
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t arg = 0;
        for (std::size_t c = 0; c < n_controls_; ++c) {
            const double val = apply(v, node, c);
            if (val < best) {
                best = val;
                arg = static_cast<std::uint32_t>(c);
            }
        }
        return {best, arg};
    }

private:
    struct Tap {
        std::uint32_t index;
        double weight;
    };
    struct Term {
        std::uint32_t first;
        std::uint8_t count;
        bool outside;
        double coef;
    };

    void add_term(const Sample& s, double coef) {
        terms_.push_back({static_cast<std::uint32_t>(taps_.size()), s.count, s.outside, coef});
        for (std::uint8_t k = 0; k < s.count; ++k) taps_.push_back({s.index[k], s.weight[k]});
    }

    SpatialGrid space_;
    std::size_t n_controls_;
    double range_lo_;
    double range_hi_;
    double max_rate_ = 0.0;
    std::vector<std::uint32_t> ranges_;
    std::vector<Term> terms_;
    std::vector<Tap> taps_;
    std::vector<double> diag_;
};

struct SolveOptions {
    Extension far_field = Extension::Quadratic;
    std::string problem_tag;
};

/// Backward explicit time stepping. Slice k < n stores V(t_k) and the
/// control attaining the minimum in the step from t_{k+1}; the terminal
/// slice stores g and the minimizer of the operator applied to g.
inline ValueField solve(const Coefficients& coeffs, const CostSpec& cost, const Grids& grids,
                        const ControlGrid& controls, const SolveOptions& opts = {}) {
    const SpatialGrid& space = grids.space;
    const TimeGrid& time = grids.time;
    const DiscreteOperator op(space, coeffs, controls, opts.far_field, cost.lower, cost.upper);
    const double dt = time.dt();
    if (dt * op.max_rate() > 1.0 + 1e-12)
        throw CflViolation("solve: dt * rate = " + std::to_string(dt * op.max_rate()) +
                           " exceeds 1");

    ValueField field;
    field.space = space;
    field.time = time;
    field.controls = controls.points();
    field.problem_tag = opts.problem_tag;
    field.cfl_number = dt * op.max_rate();
    field.range_lo = cost.lower;
    field.range_hi = cost.upper;
    field.far_field = opts.far_field;

    const std::size_t nodes = space.nodes();
    const std::size_t n = time.n_steps;
    field.values.assign(n + 1, std::vector<double>(nodes));
    field.policy.assign(n + 1, std::vector<std::uint32_t>(nodes, 0));
    for (std::size_t j = 0; j < nodes; ++j) field.values[n][j] = cost(space.node(j));
    for (std::size_t j = 0; j < nodes; ++j)
        field.policy[n][j] = op.minimize(field.values[n], j).second;

    for (std::size_t k = n; k-- > 0;) {
        const auto& next = field.values[k + 1];
        auto& cur = field.values[k];
        auto& pol = field.policy[k];
        bool finite = true;
        for (std::size_t j = 0; j < nodes; ++j) {
            const auto [lh, arg] = op.minimize(next, j);
            cur[j] = next[j] + dt * lh;
            pol[j] = arg;
            finite = finite && std::isfinite(cur[j]);
        }
        if (!finite) throw SolverBlowup("solve: nonfinite value", k);
    }
    return field;
}

/// Interior window: the domain shrunk on every side by
/// max |u| * max |sigma| + 2 dy.
inline Window interior_window(const SpatialGrid& space, const ControlGrid& controls,
                              double sigma_max) {
    Window w;
    for (std::size_t a = 0; a < space.m; ++a) {
        const double band = controls.max_jump() * sigma_max + 2.0 * space.dy[a];
        w.lo[a] = space.lo[a] + band;
        w.hi[a] = space.hi[a] - band;
        if (!(w.lo[a] < w.hi[a]))
            throw PreconditionError("interior_window: domain too small for the jump band");
    }
    return w;
}

/// Max over window nodes and all steps of |V_k - V_{k+1} - dt min_c L_h[V_{k+1}]|.
inline double residual(const ValueField& field, const ControlGrid& controls,
                       const Coefficients& coeffs, const Window& window) {
    const DiscreteOperator op(field.space, coeffs, controls, field.far_field, field.range_lo,
                              field.range_hi);
    const double dt = field.time.dt();
    std::vector<std::size_t> inside;
    for (std::size_t j = 0; j < field.space.nodes(); ++j)
        if (window.contains(field.space.node(j))) inside.push_back(j);
    double worst = 0.0;
    for (std::size_t k = 0; k < field.time.n_steps; ++k) {
        const auto& next = field.values[k + 1];
        for (std::size_t j : inside) {
            const double r = field.values[k][j] - (next[j] + dt * op.minimize(next, j).first);
            worst = std::max(worst, std::abs(r));
        }
    }
    return worst;
}

/// Feedback policy reading the stored minimizer at the nearest slice and node.
inline Policy extract_policy(const ValueField& field) {
    return [&field](double t, const Vec& y) {
        const std::size_t k = nearest_slice(field.time, t);
        const std::size_t j = nearest_node(field.space, y);
        return field.controls.at(field.policy[k][j]);
    };
}

struct RefineResult {
    double sup_difference = 0.0; ///< coarse (interpolated) vs fine at fine nodes in the window
    std::optional<double> coarse_error;
    std::optional<double> fine_error;
    std::size_t probes = 0;
};

using ExactSolution = std::function<double(double, const Vec&)>;

/// Compares two solves of one problem. The coarse field is interpolated onto
/// the fine nodes of every fine slice inside the window. With an exact
/// solution, both fields are also read through `interp` at a common probe set
/// (fine nodes and fine cell centres in the window) and their sup errors
/// reported.
inline RefineResult refine_check(const ValueField& coarse, const ValueField& fine,
                                 const Window& window, const ExactSolution& exact = {}) {
    RefineResult out;
    const SpatialGrid& g = fine.space;
    std::vector<Vec> nodes;
    for (std::size_t j = 0; j < g.nodes(); ++j) {
        const Vec y = g.node(j);
        if (window.contains(y)) nodes.push_back(y);
    }
    for (std::size_t k = 0; k <= fine.time.n_steps; ++k) {
        const double t = fine.slice_time(k);
        for (std::size_t j = 0; j < g.nodes(); ++j) {
            const Vec y = g.node(j);
            if (!window.contains(y)) continue;
            out.sup_difference =
                std::max(out.sup_difference, std::abs(interp(coarse, t, y) - fine.values[k][j]));
        }
    }
    if (!exact) return out;

    std::vector<Vec> probes = nodes;
    Vec half(static_cast<Eigen::Index>(g.m));
    for (std::size_t a = 0; a < g.m; ++a) half[static_cast<Eigen::Index>(a)] = 0.5 * g.dy[a];
    for (const auto& y : nodes) {
        const Vec c = y + half;
        if (window.contains(c)) probes.push_back(c);
    }
    double ec = 0.0;
    double ef = 0.0;
    for (std::size_t k = 0; k <= fine.time.n_steps; ++k) {
        const double t = fine.slice_time(k);
        for (const auto& y : probes) {
            const double v = exact(t, y);
            ec = std::max(ec, std::abs(interp(coarse, t, y) - v));
            ef = std::max(ef, std::abs(interp(fine, t, y) - v));
        }
    }
    out.coarse_error = ec;
    out.fine_error = ef;
    out.probes = probes.size();
    return out;
}

/// Max |V - exact| over the stored nodes inside the window, all slices.
inline double max_node_error(const ValueField& field, const Window& window,
                             const ExactSolution& exact) {
    double worst = 0.0;
    for (std::size_t k = 0; k <= field.time.n_steps; ++k) {
        const double t = field.slice_time(k);
        for (std::size_t j = 0; j < field.space.nodes(); ++j) {
            const Vec y = field.space.node(j);
            if (!window.contains(y)) continue;
            worst = std::max(worst, std::abs(field.values[k][j] - exact(t, y)));
        }
    }
    return worst;
}

} // namespace nmart
