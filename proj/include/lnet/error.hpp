#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace lnet {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument value was violated.
class ValueError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based, 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Numerical breakdown: non-finite objective, exp clamp binding, singular Gram matrix.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// PGD produced a non-finite or increasing objective at `iteration()`.
class DivergenceError : public NumericalError {
 public:
  DivergenceError(int iteration, const std::string& what)
      : NumericalError("iteration " + std::to_string(iteration) + ": " + what),
        iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

/// Failure inside a named pipeline stage.
class StageError : public Error {
 public:
  StageError(std::string stage, std::string message)
      : Error("[" + stage + "] " + message), stage_(std::move(stage)), message_(std::move(message)) {}

  const std::string& stage() const noexcept { return stage_; }
  /// The underlying error text without the stage prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  std::string stage_;
  std::string message_;
};

}  // namespace lnet
