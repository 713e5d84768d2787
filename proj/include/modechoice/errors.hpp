#pragma once

#include <stdexcept>
#include <string>

namespace modechoice {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad configuration: invalid option values, unknown keys, malformed specs.
struct ConfigError : Error {
    using Error::Error;
};

/// Bad input data: malformed CSV rows, schema mismatches, invariant violations.
struct DataError : Error {
    using Error::Error;
};

/// Numerical failure: singular Hessian, non-finite values where finite required.
struct NumericError : Error {
    using Error::Error;
};

} // namespace modechoice
