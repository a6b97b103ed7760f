#pragma once

#include <stdexcept>
#include <string>

namespace impulse {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (negative time, bad exponent, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Tabulated data queried outside its sampled range.
class ExtrapolationError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or a numerical routine that failed to reach its tolerance.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between model components.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Doeblin coefficient not below one: no unique invariant law, no span contraction.
class ErgodicityError : public Error {
 public:
  explicit ErgodicityError(const std::string& what, double coefficient = 1.0)
      : Error(what), coefficient_(coefficient) {}
  double coefficient() const noexcept { return coefficient_; }

 private:
  double coefficient_;
};

/// Iteration cap reached before the stopping rule fired.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double last_span)
      : Error(what), last_span_(last_span) {}
  double last_span() const noexcept { return last_span_; }

 private:
  double last_span_;
};

/// A stationary strategy whose shift map leaves the continuation set.
class StrategyError : public Error {
 public:
  using Error::Error;
};

/// Extracted shift lands outside the continuation set because of a near tie.
class DegenerateTieError : public StrategyError {
 public:
  using StrategyError::StrategyError;
};

/// Brute-force enumeration refused: the instance is too large.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// Model construction rejected (cost table not subadditive, invalid input).
class ConstructionError : public Error {
 public:
  using Error::Error;
};

}  // namespace impulse
