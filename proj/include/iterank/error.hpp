#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iterank {

// Broad failure classes; the CLI maps them onto exit codes 1/2/3.
enum class ErrorKind { usage, data, numerical };

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& what) : Error(ErrorKind::usage, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::data, what) {}
};

class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

class EmptyDatasetError : public DataError {
public:
    using DataError::DataError;
};

class EmptySplitError : public DataError {
public:
    using DataError::DataError;
};

class EmptyGraphError : public DataError {
public:
    using DataError::DataError;
};

/// A user tried to hold both (a,b) and (b,a).
class ConflictError : public DataError {
public:
    using DataError::DataError;
};

/// The target user has no pairwise preference to start a walk from.
class ColdStartError : public DataError {
public:
    using DataError::DataError;
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

}  // namespace iterank
