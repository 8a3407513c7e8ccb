#pragma once

/// Atomless Levy measures on the punctured line, the tail-mass evaluator,
/// and the nested jump thresholds / regions that route Poisson jumps to
/// individual martingale coordinates.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/quadrature.hpp"

namespace nmart {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Interval of the real line with explicit endpoint closure.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;
    bool lo_closed = true;
    bool hi_closed = false;

    bool empty() const noexcept {
        if (lo > hi) return true;
        if (lo == hi) return !(lo_closed && hi_closed);
        return false;
    }
};

using IntervalSet = std::vector<Interval>;

inline Interval intersect(const Interval& a, const Interval& b) {
    Interval out;
    if (a.lo > b.lo) {
        out.lo = a.lo;
        out.lo_closed = a.lo_closed;
    } else if (b.lo > a.lo) {
        out.lo = b.lo;
        out.lo_closed = b.lo_closed;
    } else {
        out.lo = a.lo;
        out.lo_closed = a.lo_closed && b.lo_closed;
    }
    if (a.hi < b.hi) {
        out.hi = a.hi;
        out.hi_closed = a.hi_closed;
    } else if (b.hi < a.hi) {
        out.hi = b.hi;
        out.hi_closed = b.hi_closed;
    } else {
        out.hi = a.hi;
        out.hi_closed = a.hi_closed && b.hi_closed;
    }
    return out;
}

inline IntervalSet intersect(const IntervalSet& a, const IntervalSet& b) {
    IntervalSet out;
    for (const auto& x : a) {
        for (const auto& y : b) {
            Interval z = intersect(x, y);
            if (!z.empty()) out.push_back(z);
        }
    }
    return out;
}

inline bool overlaps(const IntervalSet& a, const IntervalSet& b) {
    return !intersect(a, b).empty();
}

/// Levy measure nu(dx) = density(x) dx on R \ {0}, without atoms.
///
/// `mass_between(lo, hi)` is the nu-mass of [lo, hi) (endpoints carry no
/// mass). Families with a closed-form antiderivative provide it; otherwise
/// the density is integrated by adaptive Simpson over the support pieces.
class LevyMeasure {
public:
    using Density = std::function<double(double)>;
    using ClosedMass = std::function<double(double, double)>;

    LevyMeasure(std::string name, Density density, IntervalSet support,
                ClosedMass closed_mass = {})
        : name_(std::move(name)), density_(std::move(density)), support_(std::move(support)),
          closed_mass_(std::move(closed_mass)) {}

    const std::string& name() const noexcept { return name_; }
    const IntervalSet& support() const noexcept { return support_; }
    bool has_closed_form() const noexcept { return static_cast<bool>(closed_mass_); }

    double density(double x) const {
        if (x == 0.0) return 0.0;
        for (const auto& piece : support_) {
            if (x > piece.lo && x < piece.hi) return density_(x);
            if ((x == piece.lo && piece.lo_closed) || (x == piece.hi && piece.hi_closed))
                return density_(x);
        }
        return 0.0;
    }

    /// nu([lo, hi)); hi may be +inf.
    double mass_between(double lo, double hi) const {
        if (!(hi > lo)) return 0.0;
        if (closed_mass_) return closed_mass_(lo, hi);
        return quadrature_mass(lo, hi, [](double) { return 1.0; });
    }

    /// Integral of weight(x) nu(dx) over [lo, hi), by quadrature on the support.
    template <class Weight>
    double quadrature_mass(double lo, double hi, const Weight& weight) const {
        double total = 0.0;
        const Interval window{lo, hi, true, false};
        for (const auto& piece : support_) {
            const Interval part = intersect(window, piece);
            if (part.empty()) continue;
            // The punctured origin is never integrated across.
            std::vector<std::pair<double, double>> spans;
            if (part.lo < 0.0 && part.hi > 0.0) {
                spans.emplace_back(part.lo, 0.0);
                spans.emplace_back(0.0, part.hi);
            } else {
                spans.emplace_back(part.lo, part.hi);
            }
            for (auto [a, b] : spans) {
                auto f = [&](double x) { return x == 0.0 ? 0.0 : weight(x) * density_(x); };
                if (std::isinf(b) && b > 0) {
                    total += quadrature::adaptive_simpson_to_infinity(f, a);
                } else if (std::isinf(a) && a < 0) {
                    auto g = [&](double x) { return f(-x); };
                    total += quadrature::adaptive_simpson_to_infinity(g, -b);
                } else {
                    total += quadrature::adaptive_simpson(f, a, b);
                }
            }
        }
        return total;
    }

private:
    std::string name_;
    Density density_;
    IntervalSet support_;
    ClosedMass closed_mass_;
};

namespace levy {

/// nu(dx) = scale / x^2 on x > 0.
inline LevyMeasure inverse_square_positive(double scale = 1.0) {
    auto density = [scale](double x) { return x > 0.0 ? scale / (x * x) : 0.0; };
    auto mass = [scale](double lo, double hi) {
        lo = std::max(lo, 0.0);
        if (!(hi > lo)) return 0.0;
        if (lo == 0.0) return kInfinity;
        const double upper = std::isinf(hi) ? 0.0 : 1.0 / hi;
        return scale * (1.0 / lo - upper);
    };
    return LevyMeasure("inverse_square_positive", density,
                       IntervalSet{{0.0, kInfinity, false, false}}, mass);
}

/// nu(dx) = scale |x|^(-exponent) on cut_lo < |x| < cut_hi, positive side
/// only unless `symmetric`.
inline LevyMeasure power_law(double scale, double exponent, double cut_lo, double cut_hi,
                             bool symmetric) {
    if (!(scale > 0.0) || !(cut_hi > cut_lo) || cut_lo < 0.0)
        throw PreconditionError("power_law: need scale > 0 and 0 <= cut_lo < cut_hi");
    auto density = [scale, exponent](double x) {
        return scale * std::pow(std::abs(x), -exponent);
    };
    // Antiderivative of x^(-p) on the positive half-line.
    auto prim = [exponent](double x) {
        if (std::abs(exponent - 1.0) < 1e-14) return std::log(x);
        if (x == 0.0) return exponent > 1.0 ? -kInfinity : 0.0;
        if (std::isinf(x)) return exponent > 1.0 ? 0.0 : kInfinity;
        return std::pow(x, 1.0 - exponent) / (1.0 - exponent);
    };
    auto positive_mass = [=](double lo, double hi) {
        lo = std::max(lo, cut_lo);
        hi = std::min(hi, cut_hi);
        if (!(hi > lo)) return 0.0;
        return scale * (prim(hi) - prim(lo));
    };
    auto mass = [=](double lo, double hi) {
        double total = positive_mass(lo, hi);
        if (symmetric) total += positive_mass(-hi, -lo);
        return total;
    };
    IntervalSet support{{cut_lo, cut_hi, false, false}};
    if (symmetric) support.insert(support.begin(), Interval{-cut_hi, -cut_lo, false, false});
    return LevyMeasure("power_law", density, support, mass);
}

/// nu(dx) = height dx on [a, b].
inline LevyMeasure uniform(double a, double b, double height = 1.0) {
    if (!(b > a) || (a <= 0.0 && b >= 0.0))
        throw PreconditionError("uniform: interval must satisfy a < b and exclude 0");
    auto density = [height](double) { return height; };
    auto mass = [=](double lo, double hi) {
        lo = std::max(lo, a);
        hi = std::min(hi, b);
        return hi > lo ? height * (hi - lo) : 0.0;
    };
    return LevyMeasure("uniform", density, IntervalSet{{a, b, true, true}}, mass);
}

/// Piecewise-linear density through (x, density) samples, zero outside the
/// table. Integrated exactly (trapezoids on the linear pieces).
inline LevyMeasure user_table(std::vector<std::pair<double, double>> table) {
    if (table.size() < 2) throw PreconditionError("user_table: need at least two rows");
    std::sort(table.begin(), table.end());
    for (std::size_t k = 0; k < table.size(); ++k) {
        if (table[k].second < 0.0 || !std::isfinite(table[k].second))
            throw PreconditionError("user_table: densities must be finite and nonnegative");
        if (k > 0 && !(table[k].first > table[k - 1].first))
            throw PreconditionError("user_table: abscissae must be distinct");
    }
    if (table.front().first < 0.0 && table.back().first > 0.0) {
        // Split the table at the origin so that no piece straddles it.
        for (std::size_t k = 1; k < table.size(); ++k) {
            if (table[k - 1].first < 0.0 && table[k].first > 0.0) {
                const auto [x0, y0] = table[k - 1];
                const auto [x1, y1] = table[k];
                const double y = y0 + (y1 - y0) * (-x0) / (x1 - x0);
                table.insert(table.begin() + static_cast<std::ptrdiff_t>(k), {0.0, y});
                break;
            }
        }
    }
    auto eval = [table](double x) {
        if (x < table.front().first || x > table.back().first) return 0.0;
        auto it = std::upper_bound(table.begin(), table.end(), x,
                                   [](double v, const auto& row) { return v < row.first; });
        if (it == table.end()) return table.back().second;
        if (it == table.begin()) return table.front().second;
        const auto& [x1, y1] = *it;
        const auto& [x0, y0] = *(it - 1);
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
    };
    auto mass = [table, eval](double lo, double hi) {
        double total = 0.0;
        for (std::size_t k = 1; k < table.size(); ++k) {
            const double a = std::max(lo, table[k - 1].first);
            const double b = std::min(hi, table[k].first);
            if (b > a) total += 0.5 * (eval(a) + eval(b)) * (b - a);
        }
        return total;
    };
    IntervalSet support;
    const double x_lo = table.front().first;
    const double x_hi = table.back().first;
    if (x_lo < 0.0 && x_hi > 0.0) {
        support = {{x_lo, 0.0, true, false}, {0.0, x_hi, false, true}};
    } else {
        support = {{x_lo, x_hi, true, true}};
    }
    return LevyMeasure("user_table", eval, support, mass);
}

/// Generic density handled purely by quadrature.
inline LevyMeasure from_density(std::string name, LevyMeasure::Density density,
                                IntervalSet support) {
    return LevyMeasure(std::move(name), std::move(density), std::move(support));
}

} // namespace levy

/// Mass of the symmetric annulus (-r2, -r1] U [r1, r2).
inline double tail_mass(const LevyMeasure& measure, double r1, double r2) {
    if (!(r1 > 0.0) || !(r2 >= r1))
        throw PreconditionError("tail_mass: need 0 < r1 <= r2");
    if (r1 == r2) return 0.0;
    const double m = measure.mass_between(r1, r2) + measure.mass_between(-r2, -r1);
    if (!std::isfinite(m))
        throw MeasureDivergence("tail_mass: nonfinite mass on annulus [" + std::to_string(r1) +
                                ", " + std::to_string(r2) + ")");
    return m;
}

/// Jump thresholds 1 = tau^0 >= tau^1 >= ... >= tau^d > 0.
///
/// For u^i != 0, tau^i is the largest r < tau^(i-1) with
/// tail_mass(r, tau^(i-1)) = 1/(u^i)^2, found by bracketed bisection.
inline std::vector<double> jump_thresholds(const LevyMeasure& measure, std::span<const double> u,
                                           double abs_tol = 1e-12) {
    std::vector<double> tau;
    tau.reserve(u.size() + 1);
    tau.push_back(1.0);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double prev = tau.back();
        if (!std::isfinite(u[i])) throw PreconditionError("jump_thresholds: nonfinite control");
        if (u[i] == 0.0) {
            tau.push_back(prev);
            continue;
        }
        const double target = 1.0 / (u[i] * u[i]);
        auto excess = [&](double r) { return tail_mass(measure, r, prev) - target; };

        // Invariant: excess(lo) >= 0 > excess(hi).
        double hi = prev;
        double lo = 0.5 * prev;
        int halvings = 0;
        while (excess(lo) < 0.0) {
            hi = lo;
            lo *= 0.5;
            if (++halvings > 1100 || lo < std::numeric_limits<double>::min())
                throw ThresholdInfeasible("jump_thresholds: mass 1/u^2 = " +
                                          std::to_string(target) + " not reached below " +
                                          std::to_string(prev) + " for coordinate " +
                                          std::to_string(i + 1));
        }
        for (int it = 0; it < 2000; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (mid <= lo || mid >= hi) break;
            const double e = excess(mid);
            if (e >= 0.0) {
                lo = mid;
            } else {
                hi = mid;
            }
            if (hi - lo <= abs_tol && std::abs(e) <= 1e-12 * std::max(1.0, target)) break;
        }
        tau.push_back(lo);
    }
    return tau;
}

struct JumpRegions {
    std::vector<double> thresholds;    ///< tau^0 .. tau^d
    std::vector<IntervalSet> regions;  ///< A^1 .. A^d, intersected with the support
    std::vector<double> masses;        ///< nu(A^i)

    std::size_t dimension() const noexcept { return regions.size(); }
};

/// Disjoint annuli A^i = (-tau^(i-1), -tau^i] U [tau^i, tau^(i-1)) with
/// recomputed masses checked against 1/(u^i)^2.
inline JumpRegions jump_regions(const LevyMeasure& measure, std::span<const double> u,
                                double mass_tol = 1e-8) {
    JumpRegions out;
    out.thresholds = jump_thresholds(measure, u);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double outer = out.thresholds[i];
        const double inner = out.thresholds[i + 1];
        IntervalSet annulus;
        if (inner < outer) {
            annulus = {{-outer, -inner, false, true}, {inner, outer, true, false}};
        }
        out.regions.push_back(intersect(annulus, measure.support()));
        const double mass = inner < outer ? tail_mass(measure, inner, outer) : 0.0;
        out.masses.push_back(mass);
        if (u[i] != 0.0) {
            const double expected = 1.0 / (u[i] * u[i]);
            if (std::abs(mass - expected) > mass_tol)
                throw KernelInconsistent("jump_regions: nu(A^" + std::to_string(i + 1) +
                                         ") = " + std::to_string(mass) + ", expected " +
                                         std::to_string(expected));
        }
    }
    return out;
}

/// True when every pair of regions has empty intersection.
inline bool pairwise_disjoint(const JumpRegions& regions) {
    for (std::size_t i = 0; i < regions.regions.size(); ++i)
        for (std::size_t j = i + 1; j < regions.regions.size(); ++j)
            if (overlaps(regions.regions[i], regions.regions[j])) return false;
    return true;
}

struct MeasureReport {
    bool integrable = false;          ///< int (1 ^ x^2) nu(dx) < inf
    bool divergent_near_zero = false; ///< nu([-1, 1] \ {0}) = inf
    std::vector<double> epsilons;
    std::vector<double> small_jump_increments; ///< int_{eps_{k+1} <= |x| < eps_k} x^2 nu(dx)
    std::vector<double> large_jump_increments; ///< nu(10^k <= |x| < 10^(k+1))
    std::vector<double> near_zero_masses;      ///< tail_mass(eps_k, 1)
    std::string detail;

    bool admissible() const noexcept { return integrable && divergent_near_zero; }
};

/// Numerical admissibility screen on a decreasing ladder eps_k = 10^-k.
///
/// Integrability passes when the last ladder increments of both the x^2-
/// weighted small-jump integral and the large-jump mass are negligible next
/// to the accumulated totals. Near-zero divergence passes when the annulus
/// mass keeps growing along the ladder and ends above eps_K^(-growth_power).
inline MeasureReport validate_measure(const LevyMeasure& measure, int rungs = 8,
                                      double growth_power = 0.5) {
    MeasureReport report;
    auto small = [&](double lo, double hi) {
        return measure.quadrature_mass(lo, hi, [](double x) { return x * x; }) +
               measure.quadrature_mass(-hi, -lo, [](double x) { return x * x; });
    };
    auto mass_abs = [&](double lo, double hi) {
        return measure.mass_between(lo, hi) + measure.mass_between(-hi, -lo);
    };

    double small_total = 0.0;
    double large_total = 0.0;
    bool finite = true;
    for (int k = 0; k < rungs; ++k) {
        const double hi = std::pow(10.0, -k);
        const double lo = hi / 10.0;
        report.epsilons.push_back(lo);
        const double inc = small(lo, hi);
        report.small_jump_increments.push_back(inc);
        small_total += inc;

        const double big_lo = std::pow(10.0, k);
        const double big = mass_abs(big_lo, big_lo * 10.0);
        report.large_jump_increments.push_back(big);
        large_total += big;

        const double nz = mass_abs(lo, 1.0);
        report.near_zero_masses.push_back(nz);
        finite = finite && std::isfinite(inc) && std::isfinite(big);
    }
    const double far_tail = mass_abs(std::pow(10.0, rungs), kInfinity);
    finite = finite && std::isfinite(far_tail);

    constexpr double kNegligible = 1e-3;
    const bool small_ok = report.small_jump_increments.back() <=
                          kNegligible * std::max(small_total, 1e-300) + 1e-300;
    const bool large_ok = report.large_jump_increments.back() <=
                              kNegligible * std::max(large_total, 1e-300) + 1e-300 ||
                          large_total == 0.0;
    report.integrable = finite && small_ok && large_ok;

    bool growing = true;
    for (std::size_t k = 1; k < report.near_zero_masses.size(); ++k)
        growing = growing && report.near_zero_masses[k] > report.near_zero_masses[k - 1];
    const double eps_last = report.epsilons.back();
    report.divergent_near_zero =
        growing && report.near_zero_masses.back() >= std::pow(eps_last, -growth_power);

    if (!report.integrable) {
        report.detail += finite ? "small- or large-jump ladder increments do not decay; "
                                : "nonfinite ladder mass; ";
    }
    if (!report.divergent_near_zero) report.detail += "mass near zero stays bounded; ";
    return report;
}

} // namespace nmart
