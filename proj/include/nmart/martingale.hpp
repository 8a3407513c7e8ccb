#pragma once

/// Discrete-time simulation of d-dimensional normal martingales solving the
/// structure equation d[X^i]_t = dt + u^i_t dX^i_t with orthogonal
/// coordinates, plus path diagnostics (quadratic variation, cross
/// variation, structure residual) and the non-uniqueness demonstration.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/rng.hpp"
#include "nmart/stats.hpp"
#include "nmart/types.hpp"

namespace nmart {

/// Trajectory of X on a time grid. Row k of `values` is X at times[k];
/// row k of `u_path` / `jump_counts` belongs to the step (times[k], times[k+1]].
struct MartingalePath {
    std::size_t d = 0;
    std::vector<double> times;
    std::vector<double> values;
    std::vector<double> u_path;
    std::vector<long> jump_counts;

    MartingalePath() = default;
    MartingalePath(std::size_t dims, const TimeGrid& grid) : d(dims) {
        const std::size_t n = grid.n_steps;
        times.resize(n + 1);
        for (std::size_t k = 0; k <= n; ++k) times[k] = grid.time(k);
        values.assign((n + 1) * d, 0.0);
        u_path.assign(n * d, 0.0);
        jump_counts.assign(n * d, 0);
    }

    std::size_t steps() const noexcept { return times.empty() ? 0 : times.size() - 1; }
    double x(std::size_t k, std::size_t i) const { return values[k * d + i]; }
    double& x(std::size_t k, std::size_t i) { return values[k * d + i]; }
    double u(std::size_t k, std::size_t i) const { return u_path[k * d + i]; }
    long jumps(std::size_t k, std::size_t i) const { return jump_counts[k * d + i]; }
    bool jumped(std::size_t k, std::size_t i) const { return jumps(k, i) > 0; }
    /// Size of each jump recorded on step k, coordinate i (0 when none).
    double jump_size(std::size_t k, std::size_t i) const { return jumped(k, i) ? u(k, i) : 0.0; }
    double increment(std::size_t k, std::size_t i) const { return x(k + 1, i) - x(k, i); }
    std::span<const double> row(std::size_t k) const { return {values.data() + k * d, d}; }
};

/// Read-only view of a path up to and including the left endpoint of the
/// step being decided; later values are not reachable through it.
class HistoryView {
public:
    HistoryView(const MartingalePath& path, std::size_t k) : path_(path), k_(k) {}
    std::size_t step() const noexcept { return k_; }
    double time() const { return path_.times[k_]; }
    std::span<const double> current() const { return path_.row(k_); }
    double x(std::size_t j, std::size_t i) const {
        if (j > k_) throw PreconditionError("HistoryView: read beyond the left endpoint");
        return path_.x(j, i);
    }

private:
    const MartingalePath& path_;
    std::size_t k_;
};

/// Predictable control rule: u on (t_k, t_{k+1}] from the history up to t_k.
struct ControlRule {
    using Evaluator = std::function<void(double t, const HistoryView&, std::span<double> u)>;

    std::size_t d = 1;
    ControlBounds bounds;
    Evaluator eval;

    static ControlRule constant(std::vector<double> u, ControlBounds bounds = {}) {
        const std::size_t d = u.size();
        return {d, bounds, [u = std::move(u)](double, const HistoryView&, std::span<double> out) {
                    std::copy(u.begin(), u.end(), out.begin());
                }};
    }

    /// Markov feedback on the left-endpoint value X_{t-}.
    static ControlRule feedback(std::size_t d, ControlBounds bounds,
                                std::function<void(double, std::span<const double>,
                                                   std::span<double>)> fn) {
        return {d, bounds,
                [fn = std::move(fn)](double t, const HistoryView& h, std::span<double> out) {
                    fn(t, h.current(), out);
                }};
    }
};

/// One increment of coordinate `coord` over a step of length dt with
/// frozen jump size u: Gaussian when u = 0, compensated Poisson with rate
/// 1/u^2 otherwise. `count` receives the number of jumps.
inline double martingale_increment(PathStreams& streams, std::size_t coord, double u, double dt,
                                   long& count) {
    if (u == 0.0) {
        count = 0;
        return std::sqrt(dt) * streams.gaussian(coord);
    }
    count = streams.poisson(coord, dt / (u * u));
    return static_cast<double>(count) * u - dt / u;
}

/// Simulate one path. Path `path_index` of the experiment with root `seed`
/// owns the streams derive_seed(seed, path_index, .).
inline MartingalePath simulate_path(const ControlRule& rule, const TimeGrid& grid,
                                    std::uint64_t seed, std::uint64_t path_index = 0) {
    MartingalePath path(rule.d, grid);
    PathStreams streams(seed, path_index, rule.d);
    const double dt = grid.dt();
    std::vector<double> u(rule.d, 0.0);
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        const HistoryView history(path, k);
        rule.eval(path.times[k], history, u);
        for (std::size_t i = 0; i < rule.d; ++i) {
            if (!rule.bounds.admits(u[i]))
                throw ControlRangeError("simulate_path: u^" + std::to_string(i + 1) + " = " +
                                        std::to_string(u[i]) + " at step " + std::to_string(k));
            long count = 0;
            const double dx = martingale_increment(streams, i, u[i], dt, count);
            path.u_path[k * rule.d + i] = u[i];
            path.jump_counts[k * rule.d + i] = count;
            path.x(k + 1, i) = path.x(k, i) + dx;
        }
    }
    return path;
}

/// Oracle mode for constant controls: exact exponential jump clocks, so
/// X^i_t = u^i N^i_{t/(u^i)^2} - t/u^i is sampled without step bias.
inline MartingalePath simulate_path_exact(std::span<const double> u, const TimeGrid& grid,
                                          std::uint64_t seed, std::uint64_t path_index = 0,
                                          ControlBounds bounds = {}) {
    const std::size_t d = u.size();
    MartingalePath path(d, grid);
    PathStreams streams(seed, path_index, d);
    const double dt = grid.dt();
    for (std::size_t i = 0; i < d; ++i) {
        if (!bounds.admits(u[i]))
            throw ControlRangeError("simulate_path_exact: inadmissible u^" + std::to_string(i + 1));
        for (std::size_t k = 0; k < grid.n_steps; ++k) path.u_path[k * d + i] = u[i];
        if (u[i] == 0.0) {
            for (std::size_t k = 0; k < grid.n_steps; ++k)
                path.x(k + 1, i) = path.x(k, i) + std::sqrt(dt) * streams.gaussian(i);
            continue;
        }
        const double rate = 1.0 / (u[i] * u[i]);
        double next_arrival = grid.t0 + streams.exponential(i, rate);
        long total = 0;
        for (std::size_t k = 0; k < grid.n_steps; ++k) {
            const double t_end = path.times[k + 1];
            long count = 0;
            while (next_arrival <= t_end) {
                ++count;
                next_arrival += streams.exponential(i, rate);
            }
            total += count;
            path.jump_counts[k * d + i] = count;
            path.x(k + 1, i) = u[i] * static_cast<double>(total) - (t_end - grid.t0) / u[i];
        }
    }
    return path;
}

/// Running sum of squared increments of coordinate i, one entry per step.
inline std::vector<double> realized_qv(const MartingalePath& path, std::size_t i) {
    if (i >= path.d && path.steps() > 0) throw PreconditionError("realized_qv: bad coordinate");
    std::vector<double> out;
    out.reserve(path.steps());
    CompensatedSum acc;
    for (std::size_t k = 0; k < path.steps(); ++k) {
        const double dx = path.increment(k, i);
        acc += dx * dx;
        out.push_back(acc.value());
    }
    return out;
}

/// Running sum of products of increments of coordinates i != j.
inline std::vector<double> cross_variation(const MartingalePath& path, std::size_t i,
                                           std::size_t j) {
    if (path.d < 2) throw PreconditionError("cross_variation: needs d >= 2");
    if (i == j) throw PreconditionError("cross_variation: coordinates must differ");
    if (i >= path.d || j >= path.d) throw PreconditionError("cross_variation: bad coordinate");
    std::vector<double> out;
    out.reserve(path.steps());
    CompensatedSum acc;
    for (std::size_t k = 0; k < path.steps(); ++k) {
        acc += path.increment(k, i) * path.increment(k, j);
        out.push_back(acc.value());
    }
    return out;
}

/// Per coordinate: sup over grid times of |[X]_t - (t - t0) - int u dX|.
inline std::vector<double> structure_residual(const MartingalePath& path) {
    std::vector<double> out(path.d, 0.0);
    if (path.steps() == 0) return out;
    for (std::size_t i = 0; i < path.d; ++i) {
        CompensatedSum acc;
        double worst = 0.0;
        for (std::size_t k = 0; k < path.steps(); ++k) {
            const double dx = path.increment(k, i);
            const double dt = path.times[k + 1] - path.times[k];
            acc += dx * dx;
            acc += -dt;
            acc += -path.u(k, i) * dx;
            worst = std::max(worst, std::abs(acc.value()));
        }
        out[i] = worst;
    }
    return out;
}

/// Two solutions of the same one-dimensional structure equation, driven by
/// one Brownian path B and one unit-rate Poisson clock: u = 1 from the first
/// grid time S with B >= 1 onward; before S, X follows +B and X' follows -B.
struct CounterexamplePair {
    MartingalePath x;
    MartingalePath x_prime;
    std::optional<std::size_t> switch_step;            ///< S on the grid
    std::optional<std::size_t> passage_x;              ///< first k with X_k >= level
    std::optional<std::size_t> passage_x_prime;
    bool jump_at_passage_x = false;                    ///< step ending at passage had a jump
    bool jump_at_passage_x_prime = false;
    bool censored = false;                             ///< a passage missing within horizon
};

inline CounterexamplePair counterexample_paths(const TimeGrid& grid, std::uint64_t seed,
                                               std::uint64_t path_index = 0,
                                               double level = 1.0) {
    CounterexamplePair out;
    out.x = MartingalePath(1, grid);
    out.x_prime = MartingalePath(1, grid);
    PathStreams streams(seed, path_index, 1);
    const double dt = grid.dt();
    double brownian = 0.0;
    bool switched = false;
    for (std::size_t k = 0; k < grid.n_steps; ++k) {
        if (!switched && brownian >= level) {
            switched = true;
            out.switch_step = k;
        }
        const double u = switched ? 1.0 : 0.0;
        double dx = 0.0;
        double dx_prime = 0.0;
        long count = 0;
        if (switched) {
            dx = martingale_increment(streams, 0, u, dt, count);
            dx_prime = dx;
        } else {
            const double db = std::sqrt(dt) * streams.gaussian(0);
            brownian += db;
            dx = db;
            dx_prime = -db;
        }
        for (auto* p : {&out.x, &out.x_prime}) {
            p->u_path[k] = u;
            p->jump_counts[k] = count;
        }
        out.x.x(k + 1, 0) = out.x.x(k, 0) + dx;
        out.x_prime.x(k + 1, 0) = out.x_prime.x(k, 0) + dx_prime;
        if (!out.passage_x && out.x.x(k + 1, 0) >= level) {
            out.passage_x = k + 1;
            out.jump_at_passage_x = count > 0;
        }
        if (!out.passage_x_prime && out.x_prime.x(k + 1, 0) >= level) {
            out.passage_x_prime = k + 1;
            out.jump_at_passage_x_prime = count > 0;
        }
    }
    out.censored = !out.passage_x || !out.passage_x_prime;
    return out;
}

} // namespace nmart
