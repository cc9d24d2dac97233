#pragma once

#include <stdexcept>
#include <string>

namespace adlab {

// Invalid user-supplied parameters (non-positive scales, bad ranges, unknown keys).
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operands whose dimensions do not line up.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Operation undefined on the given input (e.g. an empty index set).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Training produced non-finite or runaway values.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(int iteration, const std::string& what)
        : std::runtime_error(what + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    int iteration() const noexcept { return iteration_; }

private:
    int iteration_;
};

// A constructed perturbation would leave the l-infinity ball.
class BudgetError : public std::runtime_error {
public:
    BudgetError(double measured_linf, double allowed_linf, const std::string& what)
        : std::runtime_error(what), measured_linf_(measured_linf), allowed_linf_(allowed_linf) {}

    double measured_linf() const noexcept { return measured_linf_; }
    double allowed_linf() const noexcept { return allowed_linf_; }

private:
    double measured_linf_;
    double allowed_linf_;
};

}  // namespace adlab
