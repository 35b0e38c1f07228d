#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vecot {

enum class ErrorCode {
  DimensionMismatch,
  NonzeroTotalMass,
  DuplicatePoint,
  InvalidArgument,
  WrongDimension,
  NotLipschitz,
  NumericalBreakdown,
  ZeroVector,
  RankDeficiency,
  InvalidSpec,
  BallOverlap,
  CenterOutsideBox,
  GeometryMismatch,
  NonpositiveDensity,
  TooFewPoints,
  ParseError,
  IterLimit,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonzeroTotalMass: return "NonzeroTotalMass";
    case ErrorCode::DuplicatePoint: return "DuplicatePoint";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WrongDimension: return "WrongDimension";
    case ErrorCode::NotLipschitz: return "NotLipschitz";
    case ErrorCode::NumericalBreakdown: return "NumericalBreakdown";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::RankDeficiency: return "RankDeficiency";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::BallOverlap: return "BallOverlap";
    case ErrorCode::CenterOutsideBox: return "CenterOutsideBox";
    case ErrorCode::GeometryMismatch: return "GeometryMismatch";
    case ErrorCode::NonpositiveDensity: return "NonpositiveDensity";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IterLimit: return "IterLimit";
  }
  return "Unknown";
}

/// Base exception for every validation or numerical failure raised by the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when an instance does not carry zero total mass; keeps the offending residual.
class NonzeroTotalMassError : public Error {
 public:
  NonzeroTotalMassError(std::vector<double> residual, const std::string& message)
      : Error(ErrorCode::NonzeroTotalMass, message), residual_(std::move(residual)) {}

  const std::vector<double>& residual() const noexcept { return residual_; }

 private:
  std::vector<double> residual_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace vecot
