#pragma once

#include <stdexcept>
#include <string>

namespace kwlngb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of the operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// The sample cannot support a fit (for example, all values identical).
class DegenerateSampleError : public DomainError {
public:
    using DomainError::DomainError;
};

/// Caller combined objects that do not belong together.
class UsageError : public Error {
public:
    using Error::Error;
};

/// The requested quantity does not exist for these inputs
/// (divergent integral, indistinguishable models).
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// An iterative method stopped without meeting its tolerance.
/// Carries the best estimate found and its error bound when one exists.
class NumericError : public Error {
public:
    NumericError(const std::string& what, double estimate = 0.0, double error_bound = 0.0)
        : Error(what), estimate_(estimate), error_bound_(error_bound) {}

    double estimate() const noexcept { return estimate_; }
    double error_bound() const noexcept { return error_bound_; }

private:
    double estimate_;
    double error_bound_;
};

} // namespace kwlngb
