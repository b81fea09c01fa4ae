#pragma once

#include <stdexcept>
#include <string>

namespace optomech {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Caller violated a documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Squeezing ratio reached 1 so r or r_m diverges.
class ParametricInstabilityError : public Error {
public:
    using Error::Error;
};

/// Requested target cannot be realised by any admissible parameter set.
class InfeasibleError : public Error {
public:
    using Error::Error;
};

/// Drift matrix has an eigenvalue with non-negative real part.
class StabilityError : public Error {
public:
    StabilityError(const std::string& what, double margin)
        : Error(what), margin_(margin) {}
    double margin() const noexcept { return margin_; }

private:
    double margin_;
};

/// Iterative solver gave up.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what), residual_(residual) {}
    double last_residual() const noexcept { return residual_; }

private:
    double residual_;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared while integrating.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, double time, long trajectory = -1)
        : Error(what), time_(time), trajectory_(trajectory) {}
    double time() const noexcept { return time_; }
    long trajectory() const noexcept { return trajectory_; }

private:
    double time_;
    long trajectory_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

} // namespace optomech
