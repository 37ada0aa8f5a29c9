#pragma once

#include <stdexcept>
#include <string>

namespace lasersim {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// State (or its tail) does not fit inside the configured truncation.
struct TruncationError : Error {
    using Error::Error;
};

/// An input is degenerate for the requested quantity (e.g. Fano of a zero-mean
/// distribution).
struct DegenerateInput : Error {
    using Error::Error;
};

/// Operation is not defined for this model kind.
struct ModelMismatch : Error {
    using Error::Error;
};

/// Argument outside the mathematical domain of the operation.
struct DomainError : Error {
    using Error::Error;
};

/// A dimension guard was exceeded.
struct SizeGuard : Error {
    using Error::Error;
};

/// An iterative solver failed to converge to the requested residual.
struct ConvergenceError : Error {
    using Error::Error;
};

/// Adaptive step size collapsed below the minimum step.
struct StiffnessError : Error {
    using Error::Error;
};

/// A sampling grid does not cover the feature it must resolve.
struct GridError : Error {
    using Error::Error;
};

/// A repeat-until-success measurement loop exceeded its iteration guard.
struct NonTermination : Error {
    using Error::Error;
};

/// Not enough data to form the requested statistic.
struct InsufficientData : Error {
    using Error::Error;
};

/// A required input field was not provided. Carries the field name.
struct MissingField : Error {
    std::string field;
    explicit MissingField(const std::string& f)
        : Error("missing input field: " + f), field(f) {}
};

}  // namespace lasersim
