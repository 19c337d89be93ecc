#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace proxsaga {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected argument or configuration (bad sizes, non-positive steps, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind {
  empty_input,
  malformed_token,
  non_increasing_index,
  non_finite_value,
  dimension_overflow,
  io_failure,
};

inline const char* to_string(ParseErrorKind kind) {
  switch (kind) {
    case ParseErrorKind::empty_input: return "EmptyInput";
    case ParseErrorKind::malformed_token: return "MalformedToken";
    case ParseErrorKind::non_increasing_index: return "NonIncreasingIndex";
    case ParseErrorKind::non_finite_value: return "NonFiniteValue";
    case ParseErrorKind::dimension_overflow: return "DimensionOverflow";
    case ParseErrorKind::io_failure: return "IoFailure";
  }
  return "Unknown";
}

/// Input text could not be read. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, std::size_t line, const std::string& detail)
      : Error(std::string(to_string(kind)) +
              (line ? "(line " + std::to_string(line) + ")" : std::string()) +
              (detail.empty() ? std::string() : ": " + detail)),
        kind_(kind),
        line_(line) {}

  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t line() const noexcept { return line_; }

 private:
  ParseErrorKind kind_;
  std::size_t line_;
};

/// A block of the partition is never touched by any sample (n_B = 0).
class DeadBlockError : public Error {
 public:
  explicit DeadBlockError(std::size_t block)
      : Error("DeadBlock(" + std::to_string(block) + ")"), block_(block) {}
  std::size_t block() const noexcept { return block_; }

 private:
  std::size_t block_;
};

/// A trace objective lies below the cached optimum: the optimum must be recomputed.
class StaleOptimumError : public Error {
 public:
  using Error::Error;
};

}  // namespace proxsaga
