#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cpmmd {

/// Base of every error raised by the library. A pipeline stage may tag the
/// error with its name on the way out; what() then reads "stage: message".
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& message) : std::runtime_error(message), message_(message) {}

  const char* what() const noexcept override { return full_.empty() ? message_.c_str() : full_.c_str(); }

  const std::string& stage() const noexcept { return stage_; }
  void set_stage(std::string stage) {
    stage_ = std::move(stage);
    full_ = stage_ + ": " + message_;
  }

 private:
  std::string message_;
  std::string stage_;
  std::string full_;
};

class ContractViolation : public Error {
 public:
  using Error::Error;
};

class InsufficientSample : public Error {
 public:
  using Error::Error;
};

class UnsupportedConfiguration : public Error {
 public:
  using Error::Error;
};

class DegenerateProxy : public Error {
 public:
  using Error::Error;
};

class DegenerateBandwidth : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

enum class ParseErrorKind { Unreadable, Empty, RaggedRow, NonNumeric, ColumnMismatch };

/// CSV ingestion failure. Rows and columns are 1-based file coordinates
/// (0 when not applicable).
class ParseError : public Error {
 public:
  ParseError(ParseErrorKind kind, const std::string& message, std::size_t row, std::size_t column)
      : Error(message), kind_(kind), row_(row), column_(column) {}
  ParseErrorKind kind() const noexcept { return kind_; }
  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  ParseErrorKind kind_;
  std::size_t row_;
  std::size_t column_;
};

}  // namespace cpmmd
