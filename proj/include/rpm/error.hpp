#pragma once

#include <stdexcept>
#include <string>

namespace rpm {

/// Base of every error thrown by the library. The C API maps each subclass
/// onto one status code.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Raised when a system has no exact solution; carries ||A A^+ b - b||.
class InfeasibleError : public Error {
public:
    InfeasibleError(const std::string& what, double residual_norm)
        : Error(what), residual_norm_(residual_norm) {}

    double residual_norm() const noexcept { return residual_norm_; }

private:
    double residual_norm_;
};

/// A sampling distribution or selection rule that cannot be evaluated
/// (all-zero matrix for row-norm sampling, zero row for max-distance).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class CapacityError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A node-local strategy emitted a sketch touching rows it does not own.
class ProtocolError : public Error {
public:
    using Error::Error;
};

class IncompleteLogError : public Error {
public:
    using Error::Error;
};

} // namespace rpm
