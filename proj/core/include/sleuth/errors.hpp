#pragma once

#include <stdexcept>
#include <string>

namespace sleuth {

// Base of every error raised by the library. The CLI maps the subclasses
// onto process exit codes (see tools/sleuth.cpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed CoNLL-U input. `line()` is 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Shapes that do not agree (store layers, probe inputs, metric vectors).
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad arguments that violate an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class RangeError : public Error {
 public:
  using Error::Error;
};

// Store not recognised as the container format (magic, version, dtype).
class FormatError : public Error {
 public:
  using Error::Error;
};

// Checksum mismatch or truncated data.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Activations and manifest disagree.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class SingularSystemError : public Error {
 public:
  using Error::Error;
};

class DivergenceError : public Error {
 public:
  DivergenceError(int epoch, const std::string& what)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Forest refused for tasks with too many classes.
class GuardError : public Error {
 public:
  using Error::Error;
};

// Train/validation overlap and similar evaluation-protocol violations.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

// Zero-variance input to PCA.
class DegenerateSpectrumError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace sleuth
