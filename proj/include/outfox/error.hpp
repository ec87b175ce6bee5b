#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace outfox {

// Base of every error raised by the library. Each subclass maps to one
// failure category so callers (and the CLI) can react per category.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  explicit ValidationError(const std::string& what) : Error(what), line_(0) {}
  // 0 when the error is not tied to an input line.
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class SizeError : public Error {
  using Error::Error;
};

class ArgumentError : public Error {
  using Error::Error;
};

// A required upstream artifact (attacked essay, machine essay, ...) is missing.
class DependencyError : public Error {
  using Error::Error;
};

class CredentialError : public Error {
  using Error::Error;
};

class BackendUnavailableError : public Error {
  using Error::Error;
};

// Non-transient backend failure (e.g. HTTP 400).
class BackendError : public Error {
  using Error::Error;
};

class ScriptMissError : public Error {
  using Error::Error;
};

class UnparseableLabelError : public Error {
  using Error::Error;
};

class GenerationError : public Error {
  using Error::Error;
};

}  // namespace outfox
