#pragma once

#include <stdexcept>
#include <string>

namespace vaxequity {

/// Base class for every error raised by the library. The CLI maps the
/// concrete subclasses onto process exit codes.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Missing or unreadable file.
class IoError : public Error {
public:
    using Error::Error;
};

/// Input file does not carry a required column.
class SchemaError : public Error {
public:
    using Error::Error;
};

/// Input has no usable rows (header only, empty window, empty panel).
class EmptyInputError : public Error {
public:
    using Error::Error;
};

/// A record violates a domain invariant (population <= 0, HDI outside [0,1]).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Argument outside an operation's domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Regression design has too few distinct rows to identify the model.
class RankError : public Error {
public:
    using Error::Error;
};

/// Allocation constraint set is empty (some prior rate above 1).
class InfeasibleError : public DomainError {
public:
    using DomainError::DomainError;
};

} // namespace vaxequity
