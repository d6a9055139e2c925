#pragma once

#include <stdexcept>
#include <string>

namespace zenosim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct LabelError : Error {
    using Error::Error;
};

struct InvariantError : Error {
    using Error::Error;
};

/// Failures of the numerics: step-size guard, positivity loss, divergence, bad fits.
struct NumericalError : Error {
    using Error::Error;
};

struct StepSizeError : NumericalError {
    using NumericalError::NumericalError;
};

struct PositivityError : NumericalError {
    using NumericalError::NumericalError;
};

struct FitError : NumericalError {
    using NumericalError::NumericalError;
};

struct ConfigError : Error {
    using Error::Error;
};

}  // namespace zenosim
