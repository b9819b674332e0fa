#pragma once

#include <stdexcept>
#include <string>

namespace biasbench {

/// Base for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input file.
class FormatError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Data violates an operation's precondition (sizes, labels, alignment).
class DataError : public Error {
public:
  using Error::Error;
};

/// Numerical failure during optimization or evaluation.
class NumericError : public Error {
public:
  using Error::Error;
};

}  // namespace biasbench
