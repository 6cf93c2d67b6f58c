#pragma once

#include <stdexcept>
#include <string>

namespace sphereflow {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Malformed input documents (JSON complexes, target vectors).
struct ParseError : Error {
    using Error::Error;
};

// Arguments outside the mathematical domain: radii/weights out of range,
// negative curvature targets, states on the wrong stratum, and the like.
struct DomainError : Error {
    using Error::Error;
};

// A solver gave up: iteration/time budget exhausted, singular system,
// or a trajectory that ran away (which means the target was bad).
struct SolveError : Error {
    using Error::Error;
};

// The feasibility scan is exponential in the target support; we refuse
// instead of silently burning hours.
struct SupportTooLargeError : Error {
    using Error::Error;
};

} // namespace sphereflow
