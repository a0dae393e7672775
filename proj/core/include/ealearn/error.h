#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ealearn {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input file. `line` is 1-based; 0 when the error is not tied to a
// specific line (e.g. an empty file).
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what);

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A configuration or precondition check failed before any work was done.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or representation.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long last_finite_epoch)
      : Error(what), last_finite_epoch_(last_finite_epoch) {}

  long last_finite_epoch() const { return last_finite_epoch_; }

 private:
  long last_finite_epoch_;
};

}  // namespace ealearn
