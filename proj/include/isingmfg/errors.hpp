#pragma once

#include <stdexcept>
#include <string>

namespace isingmfg {

/// Argument outside the open interval where a closed form is defined (|S| >= 1).
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

/// Invalid model or solver parameter (non-positive beta, subcritical where two phases are needed, ...).
struct ParameterError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Array shapes that do not agree.
struct ShapeError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// An inner iteration (Newton, optimizer) failed to converge.
struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace isingmfg
