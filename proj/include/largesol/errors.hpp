#pragma once

#include <stdexcept>
#include <string>

namespace largesol {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Refused preconditions: KO failure, unsupported operations, invalid arguments.
struct PreconditionError : Error {
    using Error::Error;
};
struct InvalidArgument : PreconditionError {
    using PreconditionError::PreconditionError;
};
struct KoViolation : PreconditionError {
    using PreconditionError::PreconditionError;
};
struct UnsupportedError : PreconditionError {
    using PreconditionError::PreconditionError;
};
struct ExtrapolationError : PreconditionError {
    using PreconditionError::PreconditionError;
};
struct DegenerateDomainError : PreconditionError {
    using PreconditionError::PreconditionError;
};
struct DomainMismatch : PreconditionError {
    using PreconditionError::PreconditionError;
};

struct ParseError : Error {
    ParseError(const std::string& what, int line = 0)
        : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
    int line() const noexcept { return line_; }

private:
    int line_;
};

// Numerical failures of the solvers.
struct NumericalError : Error {
    using Error::Error;
};
struct OverflowError : NumericalError {
    OverflowError(const std::string& what, std::size_t node)
        : NumericalError(what + " (node " + std::to_string(node) + ")"), node_(node) {}
    std::size_t node() const noexcept { return node_; }

private:
    std::size_t node_;
};
struct ConsistencyError : NumericalError {
    using NumericalError::NumericalError;
};

}  // namespace largesol
