#pragma once

#include <cmath>
#include <algorithm>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nmart/errors.hpp"

namespace nmart {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Uniform partition of [t0, T] into n_steps steps.
struct TimeGrid {
    double t0 = 0.0;
    double T = 1.0;
    std::size_t n_steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0_, double T_, std::size_t n)
        : t0(t0_), T(T_), n_steps(n) {
        if (!(T > t0) || n == 0)
            throw PreconditionError("TimeGrid: need t0 < T and n_steps > 0");
    }

    /// Grid with the largest step not exceeding dt that divides [t0, T] evenly.
    static TimeGrid with_step(double t0, double T, double dt) {
        if (!(dt > 0.0)) throw PreconditionError("TimeGrid: dt must be positive");
        const double n = std::ceil((T - t0) / dt - 1e-9);
        return TimeGrid(t0, T, static_cast<std::size_t>(std::max(1.0, n)));
    }

    double dt() const noexcept { return (T - t0) / static_cast<double>(n_steps); }
    double time(std::size_t k) const noexcept {
        return k == n_steps ? T : t0 + static_cast<double>(k) * dt();
    }
};

/// Admissible jump-control magnitudes: u = 0 or delta0 <= |u| <= cap.
struct ControlBounds {
    double delta0 = 0.25;
    double cap = 1.0;

    ControlBounds() = default;
    ControlBounds(double d0, double c) : delta0(d0), cap(c) {
        if (!(d0 > 0.0) || !(c >= d0))
            throw PreconditionError("ControlBounds: need 0 < delta0 <= cap");
    }

    bool admits(double u) const noexcept {
        if (u == 0.0) return true;
        const double a = std::abs(u);
        return std::isfinite(a) && a >= delta0 && a <= cap;
    }
};

/// Control point (pi, u): pi ranges over the compact part U1, u is the
/// d-vector of jump sizes.
struct ControlPoint {
    Vec pi;
    Vec u;

    ControlPoint() = default;
    ControlPoint(Vec pi_, Vec u_) : pi(std::move(pi_)), u(std::move(u_)) {}

    static ControlPoint jumps(std::initializer_list<double> values) {
        Vec u(static_cast<Eigen::Index>(values.size()));
        Eigen::Index i = 0;
        for (double v : values) u[i++] = v;
        return ControlPoint(Vec(), std::move(u));
    }

    bool operator==(const ControlPoint& other) const {
        return pi.size() == other.pi.size() && u.size() == other.u.size() &&
               pi == other.pi && u == other.u;
    }
};

inline void require_admissible(const ControlPoint& cp, const ControlBounds& bounds,
                               const char* where) {
    for (Eigen::Index i = 0; i < cp.u.size(); ++i) {
        if (!bounds.admits(cp.u[i]))
            throw ControlRangeError(std::string(where) + ": u^" + std::to_string(i + 1) + " = " +
                                    std::to_string(cp.u[i]) + " outside {0} U [" +
                                    std::to_string(bounds.delta0) + ", " +
                                    std::to_string(bounds.cap) + "] (and negatives)");
    }
}

/// Finite enumeration of the closed control set.
class ControlGrid {
public:
    ControlGrid(std::vector<ControlPoint> points, ControlBounds bounds, bool includes_zero)
        : points_(std::move(points)), bounds_(bounds), includes_zero_(includes_zero) {
        if (points_.empty()) throw PreconditionError("ControlGrid: empty grid");
        bool saw_zero = false;
        const auto d = points_.front().u.size();
        for (const auto& p : points_) {
            if (p.u.size() != d) throw PreconditionError("ControlGrid: ragged u dimension");
            require_admissible(p, bounds_, "ControlGrid");
            for (Eigen::Index i = 0; i < p.u.size(); ++i) saw_zero = saw_zero || p.u[i] == 0.0;
        }
        if (saw_zero != includes_zero_)
            throw PreconditionError(includes_zero_
                                        ? "ControlGrid: U = {0} U U1 configured but no u = 0"
                                        : "ControlGrid: U = U1 configured but grid has u = 0");
    }

    /// Tensor product of pi levels (per-point vectors) and per-coordinate u levels.
    static ControlGrid product(const std::vector<Vec>& pi_levels,
                               const std::vector<double>& u_levels, std::size_t d,
                               ControlBounds bounds) {
        std::vector<Vec> pis = pi_levels.empty() ? std::vector<Vec>{Vec()} : pi_levels;
        std::vector<ControlPoint> pts;
        std::vector<std::size_t> idx(d, 0);
        bool zero = false;
        for (double v : u_levels) zero = zero || v == 0.0;
        for (const auto& pi : pis) {
            std::fill(idx.begin(), idx.end(), 0);
            while (true) {
                Vec u(static_cast<Eigen::Index>(d));
                for (std::size_t i = 0; i < d; ++i) u[static_cast<Eigen::Index>(i)] = u_levels[idx[i]];
                pts.emplace_back(pi, u);
                std::size_t c = 0;
                while (c < d && ++idx[c] == u_levels.size()) idx[c++] = 0;
                if (c == d) break;
            }
        }
        return ControlGrid(std::move(pts), bounds, zero);
    }

    const std::vector<ControlPoint>& points() const noexcept { return points_; }
    const ControlPoint& operator[](std::size_t k) const { return points_.at(k); }
    std::size_t size() const noexcept { return points_.size(); }
    const ControlBounds& bounds() const noexcept { return bounds_; }
    bool includes_zero() const noexcept { return includes_zero_; }
    std::size_t d() const noexcept { return static_cast<std::size_t>(points_.front().u.size()); }

    /// Largest |u^i| over the grid.
    double max_jump() const {
        double m = 0.0;
        for (const auto& p : points_)
            if (p.u.size() > 0) m = std::max(m, p.u.cwiseAbs().maxCoeff());
        return m;
    }

private:
    std::vector<ControlPoint> points_;
    ControlBounds bounds_;
    bool includes_zero_;
};

} // namespace nmart
