#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace convsync {

/// Base class for all errors raised by the library. `module()` names the
/// component that detected the problem so reports can point at it.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

class InvalidSpecError : public Error {
public:
    using Error::Error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

/// A dense factorization hit a (numerically) singular matrix.
class SingularityError : public Error {
public:
    using Error::Error;
};

/// Generic numerical failure: eigensolver did not converge, step size
/// underflow, degenerate invariant subspace, internal cross-check mismatch.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// A modelling assumption required by an operation does not hold.
/// `assumption()` carries a short tag such as "small-gain" or "ac-power-factor";
/// `measured()` carries the diagnostic value that failed the test (NaN if none).
class AssumptionError : public Error {
public:
    AssumptionError(std::string module, std::string assumption, const std::string& what,
                    double measured = std::numeric_limits<double>::quiet_NaN())
        : Error(std::move(module), assumption + " violated: " + what),
          assumption_(std::move(assumption)),
          measured_(measured) {}
    const std::string& assumption() const noexcept { return assumption_; }
    double measured() const noexcept { return measured_; }

private:
    std::string assumption_;
    double measured_;
};

/// Operation requires a Hurwitz matrix (unique Lyapunov solution, finite
/// H-infinity norm) and the argument is not Hurwitz.
class NotHurwitzError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Hamiltonian matrix has eigenvalues on the imaginary axis: no stabilizing
/// Riccati solution exists (the associated gain is >= 1).
class InfeasibleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace convsync
