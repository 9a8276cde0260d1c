#pragma once

#include <stdexcept>
#include <string>

namespace convo_anon {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated (dimension mismatch, zero norm,
/// non-square matrix, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

class EmptyCollectionError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// No candidate (or not enough distinct candidates) to satisfy a request.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class NoCandidatesError : public InfeasibleError {
 public:
  using InfeasibleError::InfeasibleError;
};

/// A rate with an empty denominator (no reference speech, empty reference).
class UndefinedRateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class BoundsError : public Error {
 public:
  using Error::Error;
};

class CombinatorialLimitError : public Error {
 public:
  using Error::Error;
};

}  // namespace convo_anon
