#pragma once

/// Space-time lattice of value estimates with the argmin control per node,
/// and the sampling rules used to read it off-grid.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/types.hpp"

namespace nmart {

/// Uniform tensor grid in m = 1 or 2 dimensions.
struct SpatialGrid {
    std::size_t m = 1;
    std::array<double, 2> lo{0.0, 0.0};
    std::array<double, 2> hi{0.0, 0.0};
    std::array<double, 2> dy{1.0, 1.0};
    std::array<std::size_t, 2> n{1, 1};

    /// Grid with spacing as close to `spacing` as divides each axis evenly.
    static SpatialGrid uniform(std::size_t m, std::array<double, 2> lo, std::array<double, 2> hi,
                               std::array<double, 2> spacing) {
        if (m < 1 || m > 2) throw PreconditionError("SpatialGrid: m must be 1 or 2");
        SpatialGrid g;
        g.m = m;
        for (std::size_t a = 0; a < m; ++a) {
            if (!(hi[a] > lo[a]) || !(spacing[a] > 0.0))
                throw PreconditionError("SpatialGrid: need lo < hi and positive spacing");
            const auto cells = static_cast<std::size_t>(std::llround((hi[a] - lo[a]) / spacing[a]));
            if (cells < 2) throw PreconditionError("SpatialGrid: fewer than two cells");
            g.lo[a] = lo[a];
            g.hi[a] = hi[a];
            g.n[a] = cells + 1;
            g.dy[a] = (hi[a] - lo[a]) / static_cast<double>(cells);
        }
        return g;
    }

    std::size_t nodes() const noexcept { return m == 1 ? n[0] : n[0] * n[1]; }
    std::size_t flat(std::size_t i0, std::size_t i1 = 0) const noexcept { return i0 + n[0] * i1; }
    std::array<std::size_t, 2> multi(std::size_t flat_index) const noexcept {
        return {flat_index % n[0], m == 1 ? 0 : flat_index / n[0]};
    }
    double coordinate(std::size_t axis, std::size_t j) const noexcept {
        return j + 1 == n[axis] ? hi[axis] : lo[axis] + static_cast<double>(j) * dy[axis];
    }
    Vec node(std::size_t flat_index) const {
        const auto idx = multi(flat_index);
        Vec y(static_cast<Eigen::Index>(m));
        for (std::size_t a = 0; a < m; ++a) y[static_cast<Eigen::Index>(a)] = coordinate(a, idx[a]);
        return y;
    }
    bool contains(const Vec& y) const {
        for (std::size_t a = 0; a < m; ++a) {
            const double v = y[static_cast<Eigen::Index>(a)];
            if (v < lo[a] || v > hi[a]) return false;
        }
        return true;
    }
};

/// Rule for values beyond the lattice.
enum class Extension {
    Constant,  ///< value of the nearest boundary node
    Quadratic, ///< quadratic extrapolation from the last three nodes, projected into a range
};

/// Axis-aligned box, used for interior windows.
struct Window {
    std::array<double, 2> lo{-kHuge, -kHuge};
    std::array<double, 2> hi{kHuge, kHuge};

    static constexpr double kHuge = std::numeric_limits<double>::max();

    bool contains(const Vec& y) const {
        for (Eigen::Index a = 0; a < y.size(); ++a)
            if (y[a] < lo[static_cast<std::size_t>(a)] - 1e-12 ||
                y[a] > hi[static_cast<std::size_t>(a)] + 1e-12)
                return false;
        return true;
    }
};

/// Linear combination of lattice nodes approximating the value at a point.
struct Sample {
    std::array<std::uint32_t, 9> index{};
    std::array<double, 9> weight{};
    std::uint8_t count = 0;
    bool outside = false; ///< some axis left the lattice

    template <class Values>
    double apply(const Values& v, double range_lo, double range_hi) const {
        double s = 0.0;
        for (std::uint8_t k = 0; k < count; ++k) s += weight[k] * v[index[k]];
        if (outside) s = std::clamp(s, range_lo, range_hi);
        return s;
    }
};

namespace detail {

struct AxisStencil {
    std::array<std::size_t, 3> index{};
    std::array<double, 3> weight{};
    std::size_t count = 0;
    bool outside = false;
};

inline AxisStencil axis_stencil(const SpatialGrid& g, std::size_t a, double x, Extension ext) {
    AxisStencil s;
    const std::size_t n = g.n[a];
    const double h = g.dy[a];
    if (x >= g.lo[a] && x <= g.hi[a]) {
        double pos = (x - g.lo[a]) / h;
        auto j = static_cast<std::size_t>(std::floor(pos));
        if (j >= n - 1) j = n - 2;
        double theta = std::clamp(pos - static_cast<double>(j), 0.0, 1.0);
        // Snap rounding noise so that node queries read a single node.
        if (theta < 1e-10) theta = 0.0;
        if (theta > 1.0 - 1e-10) theta = 1.0;
        if (theta == 0.0) {
            s.index[0] = j;
            s.weight[0] = 1.0;
            s.count = 1;
        } else if (theta == 1.0) {
            s.index[0] = j + 1;
            s.weight[0] = 1.0;
            s.count = 1;
        } else {
            s.index = {j, j + 1, 0};
            s.weight = {1.0 - theta, theta, 0.0};
            s.count = 2;
        }
        return s;
    }
    s.outside = true;
    const bool above = x > g.hi[a];
    const std::size_t edge = above ? n - 1 : 0;
    if (ext == Extension::Constant || n < 3) {
        s.index[0] = edge;
        s.weight[0] = 1.0;
        s.count = 1;
        return s;
    }
    // Lagrange extrapolation through edge, edge -/+ 1, edge -/+ 2 at
    // distance r cell widths beyond the edge.
    const double r = above ? (x - g.hi[a]) / h : (g.lo[a] - x) / h;
    const std::size_t in1 = above ? n - 2 : 1;
    const std::size_t in2 = above ? n - 3 : 2;
    s.index = {edge, in1, in2};
    s.weight = {1.0 + 1.5 * r + 0.5 * r * r, -2.0 * r - r * r, 0.5 * r + 0.5 * r * r};
    s.count = 3;
    return s;
}

} // namespace detail

/// Tensor-product sample of a slice at point y.
inline Sample make_sample(const SpatialGrid& g, const Vec& y, Extension ext) {
    Sample out;
    const auto s0 = detail::axis_stencil(g, 0, y[0], ext);
    if (g.m == 1) {
        for (std::size_t k = 0; k < s0.count; ++k) {
            out.index[k] = static_cast<std::uint32_t>(s0.index[k]);
            out.weight[k] = s0.weight[k];
        }
        out.count = static_cast<std::uint8_t>(s0.count);
        out.outside = s0.outside;
        return out;
    }
    const auto s1 = detail::axis_stencil(g, 1, y[1], ext);
    std::uint8_t c = 0;
    for (std::size_t k1 = 0; k1 < s1.count; ++k1) {
        for (std::size_t k0 = 0; k0 < s0.count; ++k0) {
            out.index[c] = static_cast<std::uint32_t>(g.flat(s0.index[k0], s1.index[k1]));
            out.weight[c] = s0.weight[k0] * s1.weight[k1];
            ++c;
        }
    }
    out.count = c;
    out.outside = s0.outside || s1.outside;
    return out;
}

/// Counters of off-lattice reads.
struct InterpStats {
    std::size_t queries = 0;
    std::size_t clamped = 0;
    double clamped_fraction() const noexcept {
        return queries ? static_cast<double>(clamped) / static_cast<double>(queries) : 0.0;
    }
};

/// Solved value function on a space-time lattice.
struct ValueField {
    SpatialGrid space;
    TimeGrid time;
    std::vector<std::vector<double>> values;        ///< [slice][node]
    std::vector<std::vector<std::uint32_t>> policy; ///< [slice][node] -> index into controls
    std::vector<ControlPoint> controls;
    std::string problem_tag;
    double cfl_number = 0.0;
    double range_lo = -std::numeric_limits<double>::infinity(); ///< declared range of g
    double range_hi = std::numeric_limits<double>::infinity();
    Extension far_field = Extension::Quadratic;

    std::size_t slices() const noexcept { return values.size(); }
    double slice_time(std::size_t k) const noexcept { return time.time(k); }
    const ControlPoint& control_at(std::size_t slice, std::size_t node) const {
        return controls.at(policy.at(slice).at(node));
    }
};

/// Piecewise multilinear in space, linear in time; constant extension
/// outside the spatial bounds and time clamped into [t0, T].
inline double interp(const ValueField& field, double t, const Vec& y,
                     InterpStats* stats = nullptr) {
    const Sample s = make_sample(field.space, y, Extension::Constant);
    if (stats) {
        ++stats->queries;
        if (s.outside) ++stats->clamped;
    }
    const double dt = field.time.dt();
    const double pos = std::clamp((t - field.time.t0) / dt, 0.0,
                                  static_cast<double>(field.time.n_steps));
    auto k = static_cast<std::size_t>(std::floor(pos));
    if (k >= field.time.n_steps) k = field.time.n_steps;
    double theta = pos - static_cast<double>(k);
    if (theta < 1e-10) theta = 0.0;
    if (theta > 1.0 - 1e-10) {
        theta = 0.0;
        ++k;
    }
    const double lo = -std::numeric_limits<double>::infinity();
    const double hi = std::numeric_limits<double>::infinity();
    const double v0 = s.apply(field.values[k], lo, hi);
    if (theta == 0.0 || k == field.time.n_steps) return v0;
    const double v1 = s.apply(field.values[k + 1], lo, hi);
    return (1.0 - theta) * v0 + theta * v1;
}

/// Nearest lattice node to y (coordinates clamped into bounds).
inline std::size_t nearest_node(const SpatialGrid& g, const Vec& y) {
    std::array<std::size_t, 2> idx{0, 0};
    if (static_cast<std::size_t>(y.size()) != g.m) throw PreconditionError("nearest_node: dimension mismatch");
    for (std::size_t a = 0; a < g.m; ++a) {
        const double pos = (y[static_cast<Eigen::Index>(a)] - g.lo[a]) / g.dy[a];
        const double r = std::clamp(std::round(pos), 0.0, static_cast<double>(g.n[a] - 1));
        idx[a] = static_cast<std::size_t>(r);
    }
    return g.flat(idx[0], idx[1]);
}

inline std::size_t nearest_slice(const TimeGrid& time, double t) {
    const double pos = std::clamp((t - time.t0) / time.dt(), 0.0,
                                  static_cast<double>(time.n_steps));
    return static_cast<std::size_t>(std::round(pos));
}

} // namespace nmart
