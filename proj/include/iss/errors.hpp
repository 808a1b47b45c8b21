#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace iss {

/// Dimension mismatch between an argument and what the callee expects.
class ShapeError : public std::invalid_argument {
public:
  ShapeError(const std::string& what, std::size_t expected, std::size_t actual)
      : std::invalid_argument(what + ": expected " + std::to_string(expected) +
                              ", got " + std::to_string(actual)),
        expected_(expected), actual_(actual) {}

  std::size_t expected() const { return expected_; }
  std::size_t actual() const { return actual_; }

private:
  std::size_t expected_;
  std::size_t actual_;
};

/// Argument outside the mathematical domain of an operation (e.g. sigma <= 0).
class DomainError : public std::domain_error {
public:
  using std::domain_error::domain_error;
};

/// A NaN or infinity appeared where a finite value is required.
class NumericError : public std::runtime_error {
public:
  NumericError(std::string primitive, const std::string& detail)
      : std::runtime_error(primitive + ": " + detail), primitive_(std::move(primitive)),
        detail_(detail) {}

  const std::string& primitive() const { return primitive_; }
  const std::string& detail() const { return detail_; }

private:
  std::string primitive_;
  std::string detail_;
};

/// Invalid experiment configuration.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong lifecycle state (e.g. step after done).
class StateError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace iss
