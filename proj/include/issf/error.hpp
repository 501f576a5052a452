#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace issf {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed expression text; line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
        line_(line),
        column_(column),
        detail_(message) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string detail_;
};

/// An intrinsic or operator was evaluated outside its mathematical domain.
class DomainError : public Error {
 public:
  DomainError(const std::string& message, std::string subexpression)
      : Error(message + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}

  const std::string& subexpression() const { return subexpression_; }

 private:
  std::string subexpression_;
};

/// Argument lies outside a certified or tabulated window.
class WindowError : public Error {
 public:
  using Error::Error;
};

/// Numeric inversion could not bracket the requested value.
class BracketError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A numerical construction did not meet its postconditions.
class ConstructionError : public Error {
 public:
  using Error::Error;
};

/// Dimension or variable mismatch between fields.
class DimensionError : public Error {
 public:
  using Error::Error;
};

}  // namespace issf
