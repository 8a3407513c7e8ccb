#pragma once

#include <cmath>
#include <limits>

namespace nmart::quadrature {

namespace detail {

template <class F>
double simpson_step(const F& f, double a, double fa, double b, double fb, double m, double fm,
                    double whole, double tol, int depth) {
    const double lm = 0.5 * (a + m);
    const double rm = 0.5 * (m + b);
    const double flm = f(lm);
    const double frm = f(rm);
    const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    const double delta = left + right - whole;
    if (depth <= 0 || std::abs(delta) <= 15.0 * tol || !std::isfinite(delta)) {
        return left + right + delta / 15.0;
    }
    return simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
           simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

} // namespace detail

/// Adaptive Simpson on a finite interval [a, b].
///
/// The absolute tolerance handed to the recursion is rel_tol times a coarse
/// estimate of the integral magnitude, floored at abs_floor.
template <class F>
double adaptive_simpson(const F& f, double a, double b, double rel_tol = 1e-10,
                        double abs_floor = 1e-300, int max_depth = 48) {
    if (!(b > a)) return 0.0;
    // A 16-panel composite pass sets the scale for the relative tolerance.
    constexpr int kPanels = 16;
    const double h = (b - a) / kPanels;
    double scale = 0.0;
    double total = 0.0;
    for (int k = 0; k < kPanels; ++k) {
        const double lo = a + k * h;
        const double hi = (k + 1 == kPanels) ? b : lo + h;
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fmid = f(mid);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        scale += std::abs(whole);
    }
    const double tol = std::max(rel_tol * scale, abs_floor) / kPanels;
    for (int k = 0; k < kPanels; ++k) {
        const double lo = a + k * h;
        const double hi = (k + 1 == kPanels) ? b : lo + h;
        const double mid = 0.5 * (lo + hi);
        const double flo = f(lo);
        const double fhi = f(hi);
        const double fmid = f(mid);
        const double whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += detail::simpson_step(f, lo, flo, hi, fhi, mid, fmid, whole, tol, max_depth);
    }
    return total;
}

/// Integral over [a, +inf) through the substitution x = 1/s on [max(a, 1), inf).
template <class F>
double adaptive_simpson_to_infinity(const F& f, double a, double rel_tol = 1e-10) {
    double total = 0.0;
    double start = a;
    if (a < 1.0) {
        total += adaptive_simpson(f, a, 1.0, rel_tol);
        start = 1.0;
    }
    auto g = [&f](double s) {
        if (s <= 0.0) return 0.0;
        return f(1.0 / s) / (s * s);
    };
    total += adaptive_simpson(g, 0.0, 1.0 / start, rel_tol);
    return total;
}

} // namespace nmart::quadrature
