#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace heidih {

// Invalid argument values (non-positive orders, points outside a domain, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Grid sizes that do not divide each other, or mismatched vector lengths.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Circulant embedding could not reach a nonnegative spectrum within the
// allowed number of doublings.
class EmbeddingError : public std::runtime_error {
 public:
  EmbeddingError(const std::string& what, double negative_fraction)
      : std::runtime_error(what), negative_fraction_(negative_fraction) {}
  double negative_fraction() const noexcept { return negative_fraction_; }

 private:
  double negative_fraction_;
};

class FactorizationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Quadratic form that should be strictly positive is numerically zero.
class DegenerateFormError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A requested accuracy cannot be met with the given truncation or window.
class ToleranceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::runtime_error {
 public:
  // line/column are 1-based; 0 means "not tied to a source position".
  ConfigError(const std::string& what, std::size_t line = 0, std::size_t column = 0,
              std::string field = {})
      : std::runtime_error(what), line_(line), column_(column), field_(std::move(field)) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t line_;
  std::size_t column_;
  std::string field_;
};

}  // namespace heidih
