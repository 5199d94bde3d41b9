#pragma once

#include <stdexcept>
#include <string>

namespace snfl {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad configuration, grid mismatch, unknown names.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Expression text that does not parse; carries the byte offset.
class ParseError : public InvalidArgument {
public:
  ParseError(const std::string& msg, std::size_t pos)
      : InvalidArgument(msg + " at position " + std::to_string(pos)), pos_(pos) {}
  std::size_t position() const noexcept { return pos_; }

private:
  std::size_t pos_;
};

/// A simulation or quadrature produced NaN/inf.
class NumericalError : public Error {
public:
  NumericalError(const std::string& msg, std::size_t step)
      : Error(msg + " (step " + std::to_string(step) + ")"), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

/// Too few usable points for a rate fit.
class InsufficientSignal : public Error {
public:
  using Error::Error;
};

}  // namespace snfl
