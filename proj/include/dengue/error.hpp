#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dengue {

enum class ErrorKind {
  Validation,
  EmptyInput,
  EmptyTrain,
  DuplicateKey,
  NotFitted,
  Shape,
  State,
  Numerical,
  Spec,
  StaleCache,
  Divergence,
  Precision,
  Io,
};

std::string_view to_string(ErrorKind kind);

/// Base exception for every failure raised by the library. The kind tag lets
/// callers (the CLI in particular) map failures onto exit codes without
/// string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t epoch, const std::string& message)
      : Error(ErrorKind::Divergence, "epoch " + std::to_string(epoch) + ": " + message), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyTrain: return "EmptyTrain";
    case ErrorKind::DuplicateKey: return "DuplicateKey";
    case ErrorKind::NotFitted: return "NotFitted";
    case ErrorKind::Shape: return "ShapeError";
    case ErrorKind::State: return "StateError";
    case ErrorKind::Numerical: return "NumericalError";
    case ErrorKind::Spec: return "SpecError";
    case ErrorKind::StaleCache: return "StaleCache";
    case ErrorKind::Divergence: return "DivergenceError";
    case ErrorKind::Precision: return "PrecisionError";
    case ErrorKind::Io: return "IoError";
  }
  return "Error";
}

}  // namespace dengue
