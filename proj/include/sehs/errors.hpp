#pragma once

#include <stdexcept>
#include <string>

namespace sehs {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs outside an operation's domain (bad geometry, empty grids, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// Eigen-solver failures, step-size underflow, NaN losses.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Iterative scheme that hit its iteration cap.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, double residual, int iterations)
        : NumericalError(what), residual_(residual), iterations_(iterations) {}

    double residual() const noexcept { return residual_; }
    int iterations() const noexcept { return iterations_; }

private:
    double residual_;
    int iterations_;
};

/// Matrix assembly produced something unusable (singular, indefinite).
class AssemblyError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Training diverged (NaN/inf loss).
class TrainingError : public NumericalError {
public:
    TrainingError(const std::string& what, int epoch, int batch)
        : NumericalError(what), epoch_(epoch), batch_(batch) {}

    int epoch() const noexcept { return epoch_; }
    int batch() const noexcept { return batch_; }

private:
    int epoch_;
    int batch_;
};

/// Malformed configuration files or inconsistent architecture specs.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace sehs
