#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace lasca {

enum class ErrorCode {
  ConfigTooSmall,
  NoPathThroughWire,
  EmptyLot,
  UnknownNet,
  EmptyInput,
  PathFailsAtNominal,
  EmptyBin,
  InsufficientPaths,
  DegenerateData,
  DimensionMismatch,
  MissingModel,
  NegativeThreshold,
  SingleClass,
  SchemaError,
  StageFailure,
  IoError,
  InvalidArgument,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ConfigTooSmall: return "ConfigTooSmall";
    case ErrorCode::NoPathThroughWire: return "NoPathThroughWire";
    case ErrorCode::EmptyLot: return "EmptyLot";
    case ErrorCode::UnknownNet: return "UnknownNet";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::PathFailsAtNominal: return "PathFailsAtNominal";
    case ErrorCode::EmptyBin: return "EmptyBin";
    case ErrorCode::InsufficientPaths: return "InsufficientPaths";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::MissingModel: return "MissingModel";
    case ErrorCode::NegativeThreshold: return "NegativeThreshold";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::StageFailure: return "StageFailure";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

// Every failure in the library is reported through this type. `detail` carries
// the machine-readable context (a schema field path, a stage name, a net name).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string detail = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(std::move(detail)) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace lasca
