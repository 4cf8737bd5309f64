#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pqr {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Input files that cannot be read; row is 1-based counting the header, 0 if unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0)
      : Error(row ? "row " + std::to_string(row) + ": " + what : what), row_(row) {}
  std::size_t row() const { return row_; }

 private:
  std::size_t row_;
};

class ModelError : public Error {
 public:
  using Error::Error;
};

class LogError : public Error {
 public:
  using Error::Error;
};

class ArcExprError : public Error {
 public:
  using Error::Error;
};

class RestoreError : public Error {
 public:
  using Error::Error;
};

class ConstraintError : public Error {
 public:
  using Error::Error;
};

}  // namespace pqr
