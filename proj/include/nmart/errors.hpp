#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace nmart {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Tail mass of a Levy measure evaluated to a nonfinite number.
class MeasureDivergence : public Error {
public:
    using Error::Error;
};

/// The jump threshold equation has no root inside (0, previous threshold].
class ThresholdInfeasible : public Error {
public:
    using Error::Error;
};

/// Recomputed region masses disagree with 1/u^2.
class KernelInconsistent : public Error {
public:
    using Error::Error;
};

/// A control value lies outside {0} U [-C, -delta0] U [delta0, C].
class ControlRangeError : public Error {
public:
    using Error::Error;
};

class NumericalBlowup : public Error {
public:
    NumericalBlowup(const std::string& what, std::size_t step)
        : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

class GridInfeasible : public Error {
public:
    using Error::Error;
};

class SolverBlowup : public Error {
public:
    SolverBlowup(const std::string& what, std::size_t slice)
        : Error(what + " (slice " + std::to_string(slice) + ")"), slice_(slice) {}
    std::size_t slice() const noexcept { return slice_; }

private:
    std::size_t slice_;
};

class CflViolation : public Error {
public:
    using Error::Error;
};

/// Configuration problems; carries every diagnostic found, not just the first.
class ConfigError : public Error {
public:
    explicit ConfigError(std::vector<std::string> diagnostics)
        : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
    const std::vector<std::string>& diagnostics() const noexcept { return diagnostics_; }

private:
    static std::string join(const std::vector<std::string>& items) {
        std::string out;
        for (const auto& s : items) {
            if (!out.empty()) out += '\n';
            out += s;
        }
        return out;
    }
    std::vector<std::string> diagnostics_;
};

} // namespace nmart
