#pragma once

#include <stdexcept>
#include <string>

namespace gcr {

/// Tensor shapes that do not conform for an operation.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Inputs for which an operation is undefined, e.g. a zero-norm vector.
class DegenerateInputError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A NaN or Inf showed up where a finite value is required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Negative sampling gave up: the graph is too dense around the target.
class SaturationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ClauseError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gcr
