#pragma once

#include <stdexcept>
#include <string>

namespace portopt {

enum class ErrorCode {
  InsufficientData,
  InvalidPrice,
  NonPositiveGrowth,
  InfeasibleBounds,
  InsufficientUniverse,
  DimensionError,
  InvalidPenalty,
  SizeLimit,
  IndexError,
  InvalidSchedule,
  InvalidTenure,
  InvalidStep,
  InvalidLayers,
  InvalidBudget,
  Infeasible,
  NotConverged,
  InvalidOptimum,
  ParseError,
  IoError,
};

inline const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InvalidPrice: return "InvalidPrice";
    case ErrorCode::NonPositiveGrowth: return "NonPositiveGrowth";
    case ErrorCode::InfeasibleBounds: return "InfeasibleBounds";
    case ErrorCode::InsufficientUniverse: return "InsufficientUniverse";
    case ErrorCode::DimensionError: return "DimensionError";
    case ErrorCode::InvalidPenalty: return "InvalidPenalty";
    case ErrorCode::SizeLimit: return "SizeLimit";
    case ErrorCode::IndexError: return "IndexError";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::InvalidTenure: return "InvalidTenure";
    case ErrorCode::InvalidStep: return "InvalidStep";
    case ErrorCode::InvalidLayers: return "InvalidLayers";
    case ErrorCode::InvalidBudget: return "InvalidBudget";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::InvalidOptimum: return "InvalidOptimum";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

namespace detail {

inline void require_size(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw Error(ErrorCode::DimensionError, std::string(what) + ": expected length " +
                                               std::to_string(expected) + ", got " +
                                               std::to_string(got));
  }
}

}  // namespace detail
}  // namespace portopt
