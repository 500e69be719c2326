#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trustnet {

/// Malformed or inconsistent input data (edge lists, embedding files, model files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Rejection sampling could not find a non-edge within its attempt budget.
class InfeasibleSampling : public DataError {
 public:
  using DataError::DataError;
};

/// A NaN or Inf appeared in model state or in a function being differentiated.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace trustnet
