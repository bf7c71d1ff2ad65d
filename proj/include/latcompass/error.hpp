#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace latcompass {

// Every failure the engine can report. The service layer maps each code to a
// distinct machine-readable string and an HTTP status.
enum class ErrorCode {
  InvalidArgument,
  ZeroVector,
  NonFinite,
  DimensionMismatch,
  SpaceMismatch,
  SingleClass,
  IterationLimit,
  DegenerateHyperplane,
  BackendUnavailable,
  UnknownCategory,
  UnknownLayer,
  ShapeMismatch,
  UnknownImage,
  UnknownSession,
  UnknownCompass,
  UnknownTrajectory,
  CalibrationUnderfilled,
  ClassTooSmall,
  ClassImbalance,
  DegenerateStep,
  EmptyLabel,
  LabelTooLong,
  StorageFailure,
  UnknownRecord,
};

std::string_view error_name(ErrorCode code);
std::optional<ErrorCode> error_from_name(std::string_view name);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace latcompass
