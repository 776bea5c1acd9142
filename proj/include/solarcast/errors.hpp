#pragma once

#include <stdexcept>
#include <string>

namespace solarcast {

/// Input that violates a documented bound or contract of the caller.
/// Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A required field was absent from a payload.
class MissingFieldError : public ValidationError {
 public:
  explicit MissingFieldError(const std::string& field)
      : ValidationError("missing required field '" + field + "'"), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// A field was present but could not be read as the expected type.
class FieldTypeError : public ValidationError {
 public:
  FieldTypeError(const std::string& field, const std::string& detail)
      : ValidationError("field '" + field + "': " + detail), field_(field) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Tensor/vector dimensions disagree.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A file does not follow its documented format (bad magic, truncation,
/// version or feature-order mismatch).
class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Filesystem or network failure. Maps to CLI exit code 2.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A record with the same storage key but different content already exists.
class ConflictError : public IoError {
 public:
  using IoError::IoError;
};

/// Internal invariant violated (e.g. a stale activation cache). Exit code 3.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace solarcast
