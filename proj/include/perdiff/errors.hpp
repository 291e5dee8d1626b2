#pragma once

#include <stdexcept>
#include <string>

namespace perdiff {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad input: parameters out of range, malformed potentials, unsupported configurations.
/// The CLI maps these to exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure failed to reach its target. The CLI maps these to exit code 3.
class NumericalError : public Error {
public:
    using Error::Error;
};

class DomainError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class OutOfRange : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class DegeneratePotential : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class TruncationError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

class NonConvergence : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SolverStall : public NumericalError {
public:
    SolverStall(const std::string& what, double residual)
        : NumericalError(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

class InconsistentFormulas : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class EigSolverFailure : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NotDiffusive : public NumericalError {
public:
    using NumericalError::NumericalError;
};

}  // namespace perdiff
