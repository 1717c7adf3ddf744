#pragma once

#include <stdexcept>
#include <string>

namespace tslpm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Parameters, config and data disagree about structure.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Matrix or vector dimensions do not line up.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Time or node index outside the admissible range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Overflow, non-finite values, iteration failures.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Malformed or invalid input data (files, counts, labels).
class DataError : public Error {
public:
    using Error::Error;
};

/// An operation was refused because its input is in the wrong state
/// (e.g. summarising an unaligned chain).
class StateError : public Error {
public:
    using Error::Error;
};

}  // namespace tslpm
