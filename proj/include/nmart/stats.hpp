#pragma once

#include <cmath>
#include <cstddef>
#include <limits>

namespace nmart {

/// Kahan-Babuska (Neumaier) compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    CompensatedSum& operator+=(double x) noexcept {
        add(x);
        return *this;
    }
    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Welford running mean / variance.
class RunningStats {
public:
    void push(double x) noexcept {
        ++n_;
        const double delta = x - mean_;
        mean_ += delta / static_cast<double>(n_);
        m2_ += delta * (x - mean_);
    }

    std::size_t count() const noexcept { return n_; }
    double mean() const noexcept { return n_ ? mean_ : std::numeric_limits<double>::quiet_NaN(); }
    double variance() const noexcept {
        return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    }
    double stddev() const noexcept { return std::sqrt(variance()); }
    double standard_error() const noexcept {
        return n_ > 1 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
    }

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
};

/// Mean with its standard error.
struct Estimate {
    double mean = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;

    static Estimate from(const RunningStats& s) { return {s.mean(), s.standard_error(), s.count()}; }
    /// |mean - target| <= k standard errors (+ slack).
    bool within(double target, double k, double slack = 0.0) const noexcept {
        return std::abs(mean - target) <= k * std_error + slack;
    }
};

/// One-sided Wilson score lower bound for a binomial proportion.
/// z = 2.3263478740408408 gives the 99% level.
inline double wilson_lower_bound(std::size_t successes, std::size_t trials,
                                 double z = 2.3263478740408408) {
    if (trials == 0) return 0.0;
    const double n = static_cast<double>(trials);
    const double p = static_cast<double>(successes) / n;
    const double z2 = z * z;
    const double centre = p + z2 / (2.0 * n);
    const double spread = z * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
    return std::max(0.0, (centre - spread) / (1.0 + z2 / n));
}

} // namespace nmart
