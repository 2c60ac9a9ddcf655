#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace implet {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file. `row` is 1-based, 0 when the error is not tied to a row.
class FormatError : public Error {
public:
    FormatError(const std::string& what, std::size_t row = 0)
        : Error(row ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}
    std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class SplitError : public Error {
public:
    using Error::Error;
};

class TrainError : public Error {
public:
    using Error::Error;
};

class EvalError : public Error {
public:
    using Error::Error;
};

class UnsupportedError : public Error {
public:
    using Error::Error;
};

class ReferenceError : public Error {
public:
    using Error::Error;
};

class ClusterError : public Error {
public:
    using Error::Error;
};

class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Failure talking to an external model process.
class ProtocolError : public Error {
public:
    using Error::Error;
};

}  // namespace implet
