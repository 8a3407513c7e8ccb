#pragma once

/// Controlled-dynamics coefficients (b, sigma), terminal cost g, feedback
/// policies, and the registry of built-in problem families.

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "nmart/errors.hpp"
#include "nmart/types.hpp"

namespace nmart {

/// Drift b(y, pi, u) in R^m and diffusion sigma(y, pi, u) in R^{m x d}.
struct Coefficients {
    using Drift = std::function<Vec(const Vec&, const ControlPoint&)>;
    using Diffusion = std::function<Mat(const Vec&, const ControlPoint&)>;

    std::size_t m = 1;
    std::size_t d = 1;
    Drift drift;
    Diffusion diffusion;
    double lipschitz = 0.0; ///< declared Lipschitz constant in y
    double growth = 0.0;    ///< declared |b| + |sigma| <= growth (1 + |y|)

    Vec b(const Vec& y, const ControlPoint& cp) const { return drift(y, cp); }
    Mat sigma(const Vec& y, const ControlPoint& cp) const { return diffusion(y, cp); }
    /// i-th column of sigma.
    Vec sigma_col(const Vec& y, const ControlPoint& cp, std::size_t i) const {
        return diffusion(y, cp).col(static_cast<Eigen::Index>(i));
    }
};

/// Returns violations of finiteness or the declared growth bound at the
/// sampled states and controls (empty when consistent).
inline std::vector<std::string> check_coefficients(const Coefficients& c,
                                                   const std::vector<Vec>& states,
                                                   const std::vector<ControlPoint>& controls) {
    std::vector<std::string> issues;
    for (const auto& y : states) {
        for (const auto& cp : controls) {
            const Vec b = c.b(y, cp);
            const Mat s = c.sigma(y, cp);
            if (static_cast<std::size_t>(b.size()) != c.m ||
                static_cast<std::size_t>(s.rows()) != c.m ||
                static_cast<std::size_t>(s.cols()) != c.d) {
                issues.push_back("coefficient shape mismatch");
                return issues;
            }
            if (!b.allFinite() || !s.allFinite()) {
                issues.push_back("nonfinite coefficient");
                continue;
            }
            const double bound = c.growth * (1.0 + y.norm());
            if (b.norm() + s.norm() > bound * (1.0 + 1e-12) + 1e-12)
                issues.push_back("growth bound exceeded at |y| = " + std::to_string(y.norm()));
        }
    }
    return issues;
}

/// Terminal cost with its declared range [lower, upper].
struct CostSpec {
    std::function<double(const Vec&)> g;
    double lower = -std::numeric_limits<double>::infinity();
    double upper = std::numeric_limits<double>::infinity();

    double operator()(const Vec& y) const { return g(y); }
    double sup_norm() const noexcept { return std::max(std::abs(lower), std::abs(upper)); }
    bool bounded() const noexcept { return std::isfinite(lower) && std::isfinite(upper); }
};

inline std::vector<std::string> check_cost(const CostSpec& cost, const std::vector<Vec>& states) {
    std::vector<std::string> issues;
    for (const auto& y : states) {
        const double v = cost(y);
        if (!std::isfinite(v) || v < cost.lower - 1e-12 || v > cost.upper + 1e-12)
            issues.push_back("g outside declared range at |y| = " + std::to_string(y.norm()));
    }
    return issues;
}

/// Feedback policy (t, y) -> (pi, u).
using Policy = std::function<ControlPoint(double, const Vec&)>;

inline Policy constant_policy(ControlPoint cp) {
    return [cp = std::move(cp)](double, const Vec&) { return cp; };
}

/// A complete control problem: dynamics, cost, and horizon.
struct Problem {
    std::string tag;
    Coefficients coeffs;
    CostSpec cost;
    double t0 = 0.0;
    double T = 1.0;
};

/// Numeric parameters of a registry family (missing keys take defaults).
using ProblemParams = std::map<std::string, double>;

namespace problems {

namespace detail {

inline double param(const ProblemParams& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

/// m x d loading: identity when m == d, all-ones when m or d is 1.
inline Mat loading(std::size_t m, std::size_t d) {
    Mat s = Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
    for (std::size_t a = 0; a < m; ++a)
        for (std::size_t i = 0; i < d; ++i)
            if (m == 1 || d == 1 || a == i)
                s(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(i)) = 1.0;
    return s;
}

inline Coefficients brownian(std::size_t m, std::size_t d, double sigma) {
    Coefficients c;
    c.m = m;
    c.d = d;
    const Mat load = sigma * loading(m, d);
    c.drift = [m](const Vec&, const ControlPoint&) {
        return Vec::Zero(static_cast<Eigen::Index>(m)).eval();
    };
    c.diffusion = [load](const Vec&, const ControlPoint&) { return load; };
    c.lipschitz = 0.0;
    c.growth = load.norm();
    return c;
}

} // namespace detail

inline const std::vector<std::string>& tags() {
    static const std::vector<std::string> kTags = {
        "closed_form", "cosine", "constant", "linear", "quartic", "ou_cosine", "vol_cosine"};
    return kTags;
}

/// Build a registry problem. Families:
///  - closed_form: b = 0, sigma = s L, g = |y|^2
///  - cosine:      b = 0, sigma = s L, g = cos(sum y)
///  - constant:    b = 0, sigma = s L, g = level
///  - linear:      b = 0, sigma = s L, g = sum y
///  - quartic:     b = 0, sigma = s L, g = sum y^4
///  - ou_cosine:   b = kappa (theta - y), sigma = s L, g = cos(sum y)
///  - vol_cosine:  b = 0, sigma = pi_1 s L, g = cos(sum y)
/// where L is the m x d loading (identity, or all ones when m or d is 1).
inline Problem make(const std::string& tag, std::size_t m, std::size_t d,
                    const ProblemParams& params = {}, double t0 = 0.0, double T = 1.0) {
    using detail::param;
    if (m < 1 || d < 1) throw PreconditionError("problem: m and d must be positive");
    const double s = param(params, "sigma", 1.0);
    Problem p;
    p.tag = tag;
    p.t0 = t0;
    p.T = T;
    p.coeffs = detail::brownian(m, d, s);

    auto sum = [](const Vec& y) { return y.sum(); };
    if (tag == "closed_form") {
        p.cost = {[](const Vec& y) { return y.squaredNorm(); }, 0.0,
                  std::numeric_limits<double>::infinity()};
    } else if (tag == "cosine") {
        p.cost = {[sum](const Vec& y) { return std::cos(sum(y)); }, -1.0, 1.0};
    } else if (tag == "constant") {
        const double c = param(params, "level", 1.0);
        p.cost = {[c](const Vec&) { return c; }, c, c};
    } else if (tag == "linear") {
        p.cost = {[sum](const Vec& y) { return sum(y); }, -std::numeric_limits<double>::infinity(),
                  std::numeric_limits<double>::infinity()};
    } else if (tag == "quartic") {
        p.cost = {[](const Vec& y) { return y.array().pow(4).sum(); }, 0.0,
                  std::numeric_limits<double>::infinity()};
    } else if (tag == "ou_cosine") {
        const double kappa = param(params, "kappa", 1.0);
        const double theta = param(params, "theta", 0.0);
        p.coeffs.drift = [kappa, theta](const Vec& y, const ControlPoint&) {
            return (kappa * (Vec::Constant(y.size(), theta) - y)).eval();
        };
        p.coeffs.lipschitz = std::abs(kappa);
        p.coeffs.growth += std::abs(kappa) * std::max(1.0, std::abs(theta) * std::sqrt(double(m)));
        p.cost = {[sum](const Vec& y) { return std::cos(sum(y)); }, -1.0, 1.0};
    } else if (tag == "vol_cosine") {
        const Mat load = s * detail::loading(m, d);
        p.coeffs.diffusion = [load](const Vec&, const ControlPoint& cp) {
            if (cp.pi.size() < 1)
                throw PreconditionError("vol_cosine: control point carries no pi component");
            return (cp.pi[0] * load).eval();
        };
        p.coeffs.growth = load.norm() * param(params, "pi_max", 2.0);
        p.cost = {[sum](const Vec& y) { return std::cos(sum(y)); }, -1.0, 1.0};
    } else {
        std::string known;
        for (const auto& t : tags()) known += (known.empty() ? "" : ", ") + t;
        throw PreconditionError("unknown problem tag '" + tag + "' (known: " + known + ")");
    }
    return p;
}

} // namespace problems
} // namespace nmart
