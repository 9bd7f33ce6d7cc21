#pragma once

#include <stdexcept>
#include <string>

namespace actc {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand extents disagree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or Inf appeared where only finite values are allowed.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed serialized data or corrupted packed payload.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument outside of shape/numeric concerns (bad bit width, unknown kind, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Configuration documents: unknown keys, wrong types, out-of-range values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The bit budget cannot be met even with every slot at the smallest width.
class InfeasibleBudget : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss or gradient.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// A context slot was requested that the store does not hold, or a footprint clash.
class ContextError : public Error {
 public:
  using Error::Error;
};

}  // namespace actc
