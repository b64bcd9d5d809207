#pragma once

#include <stdexcept>
#include <string>

namespace glab {

// Error taxonomy matching the CLI exit-code contract: configuration and
// usage problems map to exit 2, numeric failures to exit 3.

// A scalar argument left its mathematical domain (e.g. lambda outside the
// schedule bounds, u outside [0,1]).
struct DomainError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A pair of log-SNR arguments violates the required ordering.
struct OrderingError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Vector/matrix dimensions do not agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A configuration value violates its invariant (T < 2, v outside [0,1], ...).
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// An index (class label, embedding row) does not exist.
struct LookupError : std::out_of_range {
    using std::out_of_range::out_of_range;
};

// A computation produced NaN/Inf or otherwise left the representable range.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// A quadrature grid is too coarse or too small for the requested tolerance.
struct QuadratureError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace glab
