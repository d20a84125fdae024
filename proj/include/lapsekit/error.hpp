#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lapsekit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Feature width or sequence length disagreement.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input violates an operation precondition (empty input, single class, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Two independent evaluations of the same quantity disagree.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Malformed CSV or model file. Row numbers are 1-based and count the header.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& what)
      : Error("row " + std::to_string(row) + ", column '" + column + "': " + what),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const noexcept { return row_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

}  // namespace lapsekit
