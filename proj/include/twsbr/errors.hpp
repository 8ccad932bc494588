#pragma once

#include <stdexcept>
#include <string>

namespace twsbr {

// Base class for all failures raised by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad config file, key, value, or an empty search space.
struct ConfigError : Error {
    using Error::Error;
};

// Parameter set violates a model invariant (e.g. singular mass matrix).
struct DegenerateParamsError : Error {
    using Error::Error;
};

// An iterative numerical routine failed to converge.
struct NumericalError : Error {
    using Error::Error;
};

// Caller broke an interface contract (shape mismatch, bad argument).
struct ContractError : Error {
    using Error::Error;
};

// Not enough samples to perform an estimation.
struct InsufficientDataError : Error {
    using Error::Error;
};

}  // namespace twsbr
