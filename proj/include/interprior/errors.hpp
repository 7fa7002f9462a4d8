#pragma once

#include <stdexcept>
#include <string>

namespace interprior {

enum class ErrorCode {
  DegenerateRotation,
  DegenerateCorrespondences,
  EmptyCloud,
  ShapeMismatch,
  StaleTape,
  GraspFailure,
  EmptyView,
  PartCountMismatch,
  BadTimestep,
  TooFewPoints,
  NonFiniteLoss,
  NoContactPoints,
  IdMismatch,
  CountMismatch,
  Io,
  Format,
  Usage,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateRotation: return "DegenerateRotation";
    case ErrorCode::DegenerateCorrespondences: return "DegenerateCorrespondences";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::StaleTape: return "StaleTape";
    case ErrorCode::GraspFailure: return "GraspFailure";
    case ErrorCode::EmptyView: return "EmptyView";
    case ErrorCode::PartCountMismatch: return "PartCountMismatch";
    case ErrorCode::BadTimestep: return "BadTimestep";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NoContactPoints: return "NoContactPoints";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::CountMismatch: return "CountMismatch";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

}  // namespace interprior
