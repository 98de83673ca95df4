#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gapscore {

// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid parameters or option combinations. The CLI maps these to exit 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A cell of an input file could not be parsed as a number.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, std::string column, const std::string& detail)
      : Error("parse error at row " + std::to_string(row) + ", column " +
              column + ": " + detail),
        row_(row),
        column_(std::move(column)) {}

  std::size_t row() const { return row_; }
  const std::string& column() const { return column_; }

 private:
  std::size_t row_;
  std::string column_;
};

// Structurally malformed input (ragged rows, empty header, ...).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Input the algorithms do not accept, e.g. missing values in training data.
class UnsupportedInputError : public Error {
 public:
  using Error::Error;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A caller broke a documented precondition (e.g. baseline scoring of a row
// with missing values).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// AUC requested for a label vector that has only one class.
class UndefinedAucError : public Error {
 public:
  using Error::Error;
};

}  // namespace gapscore
