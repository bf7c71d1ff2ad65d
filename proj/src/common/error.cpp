#include "latcompass/error.hpp"

#include <array>
#include <utility>

namespace latcompass {
namespace {

constexpr std::array<std::pair<ErrorCode, std::string_view>, 24> kNames{{
    {ErrorCode::InvalidArgument, "InvalidArgument"},
    {ErrorCode::ZeroVector, "ZeroVector"},
    {ErrorCode::NonFinite, "NonFinite"},
    {ErrorCode::DimensionMismatch, "DimensionMismatch"},
    {ErrorCode::SpaceMismatch, "SpaceMismatch"},
    {ErrorCode::SingleClass, "SingleClass"},
    {ErrorCode::IterationLimit, "IterationLimit"},
    {ErrorCode::DegenerateHyperplane, "DegenerateHyperplane"},
    {ErrorCode::BackendUnavailable, "BackendUnavailable"},
    {ErrorCode::UnknownCategory, "UnknownCategory"},
    {ErrorCode::UnknownLayer, "UnknownLayer"},
    {ErrorCode::ShapeMismatch, "ShapeMismatch"},
    {ErrorCode::UnknownImage, "UnknownImage"},
    {ErrorCode::UnknownSession, "UnknownSession"},
    {ErrorCode::UnknownCompass, "UnknownCompass"},
    {ErrorCode::UnknownTrajectory, "UnknownTrajectory"},
    {ErrorCode::CalibrationUnderfilled, "CalibrationUnderfilled"},
    {ErrorCode::ClassTooSmall, "ClassTooSmall"},
    {ErrorCode::ClassImbalance, "ClassImbalance"},
    {ErrorCode::DegenerateStep, "DegenerateStep"},
    {ErrorCode::EmptyLabel, "EmptyLabel"},
    {ErrorCode::LabelTooLong, "LabelTooLong"},
    {ErrorCode::StorageFailure, "StorageFailure"},
    {ErrorCode::UnknownRecord, "UnknownRecord"},
}};

}  // namespace

std::string_view error_name(ErrorCode code) {
  for (const auto& [c, name] : kNames) {
    if (c == code) return name;
  }
  return "Unknown";
}

std::optional<ErrorCode> error_from_name(std::string_view name) {
  for (const auto& [c, n] : kNames) {
    if (n == name) return c;
  }
  return std::nullopt;
}

}  // namespace latcompass
