#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace clusterfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A query fell outside the tabulated model (age/metallicity off-grid, or a
/// mass above the heaviest node of a bracketing track).
class OutOfRange : public Error {
public:
  using Error::Error;
};

class InvalidConfig : public Error {
public:
  using Error::Error;
};

/// Malformed text input. Line and column are 1-based; 0 means "unknown".
class ParseError : public Error {
public:
  ParseError(std::string source, std::size_t line, std::size_t column, const std::string& what)
      : Error(format(source, line, column, what)),
        source_(std::move(source)),
        line_(line),
        column_(column) {}

  const std::string& source() const noexcept { return source_; }
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

private:
  static std::string format(const std::string& source, std::size_t line, std::size_t column,
                            const std::string& what) {
    std::string s = source.empty() ? std::string("<input>") : source;
    if (line > 0) s += ":" + std::to_string(line);
    if (column > 0) s += ":" + std::to_string(column);
    return s + ": " + what;
  }

  std::string source_;
  std::size_t line_;
  std::size_t column_;
};

/// A semantically invalid value; field() names the offending setting.
class ValidationError : public Error {
public:
  ValidationError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

class DegenerateRange : public Error {
public:
  using Error::Error;
};

class DegenerateSample : public Error {
public:
  using Error::Error;
};

class ConstantPredictor : public Error {
public:
  using Error::Error;
};

class TooLarge : public Error {
public:
  using Error::Error;
};

class InsufficientStars : public Error {
public:
  using Error::Error;
};

/// A star has no member draws to condition on.
class EmptyConditional : public Error {
public:
  using Error::Error;
};

/// The log posterior of a chain became (or started) non-finite.
class DegeneratePosterior : public Error {
public:
  using Error::Error;
};

}  // namespace clusterfit
