#pragma once

#include <stdexcept>
#include <string>

namespace pnc {

/// Parameter set violates a precondition (bad geometry, bad rates, ...).
class InvalidParameter : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class MeshingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Solver or quadrature failed to converge; `what()` carries diagnostics.
class NumericalFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Band set does not reach the requested frequency ceiling at every k.
class CoverageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace pnc
