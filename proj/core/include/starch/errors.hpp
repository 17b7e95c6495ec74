#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <vector>

namespace starch {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller supplied an argument outside the documented domain.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data (files, panels, weights) failed validation.
class DataError : public Error {
public:
    using Error::Error;
};

/// A numerical procedure could not produce a usable result.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// S(rho) is singular or too ill-conditioned to invert.
class StationarityError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Simulated log-squared outcome left the representable range.
class DivergenceError : public NumericalError {
public:
    DivergenceError(const std::string& what, long unit, long period)
        : NumericalError(what), unit_(unit), period_(period) {}

    long unit() const noexcept { return unit_; }
    long period() const noexcept { return period_; }

private:
    long unit_;
    long period_;
};

/// The optimizer hit its iteration cap; carries the best iterate found.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, Eigen::VectorXd best, double grad_norm)
        : NumericalError(what), best_(std::move(best)), grad_norm_(grad_norm) {}

    const Eigen::VectorXd& best_iterate() const noexcept { return best_; }
    double gradient_norm() const noexcept { return grad_norm_; }

private:
    Eigen::VectorXd best_;
    double grad_norm_;
};

/// Non-fatal conditions collected alongside results.
using Warnings = std::vector<std::string>;

}  // namespace starch
