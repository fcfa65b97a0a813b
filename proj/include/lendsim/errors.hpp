#pragma once

#include <stdexcept>
#include <string>

namespace lendsim {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidInput : Error {
    using Error::Error;
};

// Fee sum reaches 1: the swap would repay nothing.
struct InfeasibleSwap : Error {
    using Error::Error;
};

// Requested repay amount exceeds what any seize amount can produce.
struct InfeasibleRepay : Error {
    using Error::Error;
};

struct InsufficientData : Error {
    using Error::Error;
};

struct StalePlan : Error {
    using Error::Error;
};

struct GenerationError : Error {
    using Error::Error;
};

// Bad configuration or user input; the CLI maps it to exit code 2.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace lendsim
