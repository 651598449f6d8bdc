#pragma once

#include <stdexcept>
#include <string>

namespace mctl {

/// Malformed input: bad grid, unknown config key, wrong CSV shape.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Schedule breakpoints that do not sit on the solver's time grid.
class AlignmentError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Time step too large for the implicit operator or the explicit reaction.
class StabilityError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

/// Mathematical precondition of an operation does not hold (zero initial
/// state, ratio condition violated, negative data where nonnegative is needed).
class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Linear solve breakdown or a search that could not meet its budget.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace mctl
