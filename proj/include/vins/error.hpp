#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vins {

enum class ErrorKind {
  MalformedRow,
  NonMonotoneTime,
  TimeGap,
  EmptyFile,
  OutOfRange,
  InsufficientOverlap,
  BadArguments,
  ShapeMismatch,
  StaleCache,
  InsufficientData,
  IoError,
  CorruptWeights,
  BadDt,
  InsufficientSamples,
  EmptyInput,
  BadSpec,
};

std::string_view to_string(ErrorKind kind);

/// Every failure raised by the library carries one of the kinds above so
/// callers (CLI, Python bindings) can map them without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace vins
