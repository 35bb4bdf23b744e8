#pragma once

#include <stdexcept>
#include <string>

namespace soce {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Matrix/vector shapes do not agree.
class DimensionMismatch : public Error {
public:
    using Error::Error;
};

/// A Cholesky pivot <= 0 arose; the matrix is not positive definite.
class NotPositiveDefinite : public Error {
public:
    using Error::Error;
};

/// A required CSV column is absent. `column()` names it.
class MissingColumn : public Error {
public:
    explicit MissingColumn(const std::string& column)
        : Error("missing column: " + column), column_(column) {}
    const std::string& column() const { return column_; }

private:
    std::string column_;
};

/// Timestamps are not strictly increasing. `line()` is the 1-based file line.
class NonMonotonicTime : public Error {
public:
    NonMonotonicTime(const std::string& what, std::size_t line)
        : Error(what), line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

/// A numeric field failed to parse.
class MalformedNumber : public Error {
public:
    using Error::Error;
};

/// A cycle is too short for the requested delay count.
class InsufficientHistory : public Error {
public:
    using Error::Error;
};

/// A requested dataset split would leave a partition empty.
class EmptySplit : public Error {
public:
    using Error::Error;
};

/// Dataset delay count does not match the model's.
class DelayMismatch : public Error {
public:
    using Error::Error;
};

/// Closed-loop feedback seed has the wrong length.
class SeedLengthMismatch : public Error {
public:
    using Error::Error;
};

/// Two parallel series have different lengths.
class LengthMismatch : public Error {
public:
    using Error::Error;
};

/// A series is empty where at least one element is required.
class EmptySeries : public Error {
public:
    using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace soce
