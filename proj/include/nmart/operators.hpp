#pragma once

/// Integro-difference generators of the controlled dynamics.
///
/// For a control point (pi, u) and the i-th diffusion column sigma^i:
///   A^i[phi]  = grad phi . sigma^i                              if u^i = 0
///             = (phi(y + u^i sigma^i) - phi(y)) / u^i           otherwise
///   L[phi]    = grad phi . b + sum_i of
///               1/2 sigma^i' D^2 phi sigma^i                   if u^i = 0
///               (phi(y + u^i sigma^i) - phi(y)
///                 - u^i grad phi . sigma^i) / (u^i)^2          otherwise
/// The delta-variant replaces phi by a value field V in the undifferenced
/// terms of coordinates with |u^i| > delta.

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "nmart/controlled.hpp"
#include "nmart/errors.hpp"
#include "nmart/problem.hpp"
#include "nmart/stats.hpp"
#include "nmart/types.hpp"
#include "nmart/value_field.hpp"

namespace nmart {

/// Smooth phi(t, y) with declared time derivative, gradient and Hessian.
/// Construction checks the declared derivatives against central
/// differences (relative tolerance 1e-5) at a few sample points.
class TestFunction {
public:
    using Scalar = std::function<double(double, const Vec&)>;
    using Gradient = std::function<Vec(double, const Vec&)>;
    using Hessian = std::function<Mat(double, const Vec&)>;

    TestFunction(std::size_t m, Scalar value, Scalar dt, Gradient grad, Hessian hess,
                 bool validate = true)
        : m_(m), value_(std::move(value)), dt_(std::move(dt)), grad_(std::move(grad)),
          hess_(std::move(hess)) {
        if (validate) {
            const std::string issue = consistency_issue();
            if (!issue.empty()) throw PreconditionError("TestFunction: " + issue);
        }
    }

    std::size_t m() const noexcept { return m_; }
    double operator()(double t, const Vec& y) const { return value_(t, y); }
    double dt(double t, const Vec& y) const { return dt_(t, y); }
    Vec grad(double t, const Vec& y) const { return grad_(t, y); }
    Mat hess(double t, const Vec& y) const { return hess_(t, y); }

    /// First disagreement between declared and finite-difference derivatives.
    std::string consistency_issue(double rel_tol = 1e-5) const {
        const double h1 = 1e-5;
        const double h2 = 1e-4;
        const auto mi = static_cast<Eigen::Index>(m_);
        const std::vector<double> offsets = {0.0, 0.3, -0.6, 1.1};
        auto close = [rel_tol](double fd, double declared) {
            return std::abs(fd - declared) <= rel_tol * std::max(1.0, std::abs(declared));
        };
        for (double t : {0.25, 0.75}) {
            for (double off : offsets) {
                Vec y = Vec::LinSpaced(mi, off, off * (1.0 + 0.5 * double(m_ - 1)));
                const double fd_t = (value_(t + h1, y) - value_(t - h1, y)) / (2.0 * h1);
                if (!close(fd_t, dt_(t, y))) return "time derivative mismatch";
                const Vec g = grad_(t, y);
                const Mat H = hess_(t, y);
                if (g.size() != mi || H.rows() != mi || H.cols() != mi)
                    return "derivative shape mismatch";
                for (Eigen::Index a = 0; a < mi; ++a) {
                    Vec e = Vec::Zero(mi);
                    e[a] = 1.0;
                    const double fd_g = (value_(t, y + h1 * e) - value_(t, y - h1 * e)) / (2.0 * h1);
                    if (!close(fd_g, g[a])) return "gradient mismatch";
                    for (Eigen::Index b = 0; b < mi; ++b) {
                        Vec f = Vec::Zero(mi);
                        f[b] = 1.0;
                        const double fd_h =
                            (value_(t, y + h2 * e + h2 * f) - value_(t, y + h2 * e - h2 * f) -
                             value_(t, y - h2 * e + h2 * f) + value_(t, y - h2 * e - h2 * f)) /
                            (4.0 * h2 * h2);
                        if (!close(fd_h, H(a, b))) return "Hessian mismatch";
                    }
                }
            }
        }
        return {};
    }

    /// phi = a t + p . y + c
    static TestFunction affine(double a, Vec p, double c = 0.0) {
        const std::size_t m = static_cast<std::size_t>(p.size());
        return TestFunction(
            m, [a, p, c](double t, const Vec& y) { return a * t + p.dot(y) + c; },
            [a](double, const Vec&) { return a; }, [p](double, const Vec&) { return p; },
            [m](double, const Vec&) {
                return Mat::Zero(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)).eval();
            });
    }

    /// phi = |y|^2
    static TestFunction square(std::size_t m) {
        return TestFunction(
            m, [](double, const Vec& y) { return y.squaredNorm(); },
            [](double, const Vec&) { return 0.0; },
            [](double, const Vec& y) { return (2.0 * y).eval(); },
            [m](double, const Vec&) {
                return (2.0 * Mat::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)))
                    .eval();
            });
    }

    /// phi = sum y_a^4
    static TestFunction quartic(std::size_t m) {
        return TestFunction(
            m, [](double, const Vec& y) { return y.array().pow(4).sum(); },
            [](double, const Vec&) { return 0.0; },
            [](double, const Vec& y) { return (4.0 * y.array().pow(3)).matrix().eval(); },
            [](double, const Vec& y) { return Mat((12.0 * y.array().square()).matrix().asDiagonal()); });
    }

    /// phi = exp(sum y)
    static TestFunction exponential(std::size_t m) {
        return TestFunction(
            m, [](double, const Vec& y) { return std::exp(y.sum()); },
            [](double, const Vec&) { return 0.0; },
            [](double, const Vec& y) { return Vec::Constant(y.size(), std::exp(y.sum())).eval(); },
            [](double, const Vec& y) { return Mat::Constant(y.size(), y.size(), std::exp(y.sum())).eval(); });
    }

    /// phi = |y|^2 + (T - t)
    static TestFunction quadratic_value(std::size_t m, double T) {
        return TestFunction(
            m, [T](double t, const Vec& y) { return y.squaredNorm() + (T - t); },
            [](double, const Vec&) { return -1.0; },
            [](double, const Vec& y) { return (2.0 * y).eval(); },
            [m](double, const Vec&) {
                return (2.0 * Mat::Identity(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m)))
                    .eval();
            });
    }

private:
    std::size_t m_;
    Scalar value_;
    Scalar dt_;
    Gradient grad_;
    Hessian hess_;
};

/// Scalar function of (t, y) standing in for V in the delta-operator.
using FieldReader = std::function<double(double, const Vec&)>;

inline double gen_A(std::size_t i, const ControlPoint& cp, const TestFunction& phi, double t,
                    const Vec& y, const Coefficients& coeffs) {
    if (i >= coeffs.d) throw PreconditionError("gen_A: coordinate out of range");
    const Vec s = coeffs.sigma_col(y, cp, i);
    const double u = cp.u[static_cast<Eigen::Index>(i)];
    if (u == 0.0) return phi.grad(t, y).dot(s);
    return (phi(t, y + u * s) - phi(t, y)) / u;
}

namespace detail {

/// Shared body of L and L^delta; `nonlocal` supplies the undifferenced
/// values for coordinates with |u^i| > delta.
inline double generator(const ControlPoint& cp, const TestFunction& phi, double t, const Vec& y,
                        const Coefficients& coeffs, double delta, const FieldReader* nonlocal) {
    const Mat sigma = coeffs.sigma(y, cp);
    const Vec grad = phi.grad(t, y);
    CompensatedSum acc;
    acc += grad.dot(coeffs.b(y, cp));
    Mat hess;
    bool have_hess = false;
    const double phi_y = phi(t, y);
    for (std::size_t i = 0; i < coeffs.d; ++i) {
        const Vec s = sigma.col(static_cast<Eigen::Index>(i));
        const double u = cp.u[static_cast<Eigen::Index>(i)];
        if (u == 0.0) {
            if (!have_hess) {
                hess = phi.hess(t, y);
                have_hess = true;
            }
            acc += 0.5 * s.dot(hess * s);
        } else if (nonlocal && std::abs(u) > delta) {
            const FieldReader& v = *nonlocal;
            acc += (v(t, y + u * s) - v(t, y) - u * grad.dot(s)) / (u * u);
        } else {
            acc += (phi(t, y + u * s) - phi_y - u * grad.dot(s)) / (u * u);
        }
    }
    return acc.value();
}

} // namespace detail

inline double gen_L(const ControlPoint& cp, const TestFunction& phi, double t, const Vec& y,
                    const Coefficients& coeffs) {
    return detail::generator(cp, phi, t, y, coeffs, 0.0, nullptr);
}

inline double gen_L_delta(const ControlPoint& cp, const FieldReader& v, const TestFunction& phi,
                          double delta, double t, const Vec& y, const Coefficients& coeffs) {
    if (!(delta > 0.0)) throw PreconditionError("gen_L_delta: delta must be positive");
    return detail::generator(cp, phi, t, y, coeffs, delta, &v);
}

/// Field variant; off-lattice reads use the constant extension and are
/// counted in `stats`.
inline double gen_L_delta(const ControlPoint& cp, const ValueField& field,
                          const TestFunction& phi, double delta, double t, const Vec& y,
                          const Coefficients& coeffs, InterpStats* stats = nullptr) {
    const FieldReader reader = [&field, stats](double s, const Vec& z) {
        return interp(field, s, z, stats);
    };
    return gen_L_delta(cp, reader, phi, delta, t, y, coeffs);
}

struct HamiltonianValue {
    double value = std::numeric_limits<double>::infinity();
    std::size_t index = 0; ///< first minimizing grid index
};

inline HamiltonianValue hamiltonian(double t, const Vec& y, const TestFunction& phi,
                                    const ControlGrid& controls, const Coefficients& coeffs) {
    HamiltonianValue h;
    for (std::size_t c = 0; c < controls.size(); ++c) {
        const double v = gen_L(controls[c], phi, t, y, coeffs);
        if (v < h.value) {
            h.value = v;
            h.index = c;
        }
    }
    return h;
}

inline HamiltonianValue hamiltonian(double t, const Vec& y, const ValueField& field,
                                    const TestFunction& phi, double delta,
                                    const ControlGrid& controls, const Coefficients& coeffs,
                                    InterpStats* stats = nullptr) {
    HamiltonianValue h;
    for (std::size_t c = 0; c < controls.size(); ++c) {
        const double v = gen_L_delta(controls[c], field, phi, delta, t, y, coeffs, stats);
        if (v < h.value) {
            h.value = v;
            h.index = c;
        }
    }
    return h;
}

/// |phi(T, Y_T) - phi(t0, y0) - sum_k [sum_i A^i dX^i + (d_t phi + L phi) dt]|
/// with every term frozen at the left endpoint of its step.
inline double ito_residual(const ControlledPath& path, const TestFunction& phi,
                           const Coefficients& coeffs) {
    const std::size_t n = path.steps();
    if (n == 0) return 0.0;
    CompensatedSum rhs;
    for (std::size_t k = 0; k < n; ++k) {
        const double t = path.x.times[k];
        const double dt = path.x.times[k + 1] - t;
        const Vec y = path.state(k);
        const ControlPoint cp = path.control(k);
        for (std::size_t i = 0; i < coeffs.d; ++i)
            rhs += gen_A(i, cp, phi, t, y, coeffs) * path.x.increment(k, i);
        rhs += (phi.dt(t, y) + gen_L(cp, phi, t, y, coeffs)) * dt;
    }
    const double lhs = phi(path.x.times[n], path.state(n)) - phi(path.x.times[0], path.state(0));
    return std::abs(lhs - rhs.value());
}

} // namespace nmart
