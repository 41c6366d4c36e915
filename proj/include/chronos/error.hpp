#pragma once

#include <stdexcept>
#include <string>

namespace chronos {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data or arguments violate a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Tensor or configuration shapes disagree.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A forward or backward pass produced NaN/Inf.
class NumericError : public Error {
public:
    using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed configuration document or flag value.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace chronos
