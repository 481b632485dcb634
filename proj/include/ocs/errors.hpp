#pragma once

#include <stdexcept>
#include <string>

namespace ocs {

/// Base class for every error raised by the solver and simulator.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid model parameters (R = 1, eta <= 0, beta <= 0, non-finite input).
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Argument outside the domain of an evaluator.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Operation not defined for the regime of the supplied parameters.
class RegimeError : public Error {
public:
    using Error::Error;
};

/// The adaptive ODE controller could not meet its tolerance.
class StepFailure : public Error {
public:
    StepFailure(const std::string& what, double last_good_q)
        : Error(what + " (last good q = " + std::to_string(last_good_q) + ")"),
          last_good_q_(last_good_q) {}

    double last_good_q() const noexcept { return last_good_q_; }

private:
    double last_good_q_;
};

/// The constructed h curve left its admissible interval.
class SurfaceError : public Error {
public:
    using Error::Error;
};

/// The n curve did not reach its power-law asymptote near q = 1.
class TailError : public Error {
public:
    using Error::Error;
};

/// The frictionless Merton problem is ill-posed for these parameters.
class MertonIllPosed : public Error {
public:
    using Error::Error;
};

/// Invalid simulation configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace ocs
