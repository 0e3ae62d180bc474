#pragma once

#include <stdexcept>
#include <string>

namespace labeltrust {

// Invalid configuration: bad flags, malformed specs, out-of-range parameters.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid data: unreadable files, malformed rows, degenerate datasets.
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Numeric failure: diverged training, degenerate references.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace labeltrust
