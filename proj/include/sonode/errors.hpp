#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sonode {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SingularityError : public Error {
 public:
  using Error::Error;
};

// Step budget exhausted or step size collapsed below h_min.
class NonconvergenceError : public Error {
 public:
  using Error::Error;
};

// Vector field produced NaN/Inf.
class InstabilityError : public Error {
 public:
  using Error::Error;
};

class ModelKindError : public Error {
 public:
  using Error::Error;
};

class MemoryCapError : public Error {
 public:
  using Error::Error;
};

class UnsupportedCaseError : public Error {
 public:
  using Error::Error;
};

class SchemaError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row) : Error(what), row_(row) {}
  /// 1-based data row (header excluded).
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sonode
