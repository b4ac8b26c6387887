#include "pnpb/error.hpp"

namespace pnpb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveBulkVoid: return "NonPositiveBulkVoid";
    case ErrorKind::NonPositiveTotalVoid: return "NonPositiveTotalVoid";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::SingularAtZero: return "SingularAtZero";
    case ErrorKind::QuadratureNonConvergence: return "QuadratureNonConvergence";
    case ErrorKind::VoidCollapse: return "VoidCollapse";
    case ErrorKind::NonpositiveConcentration: return "NonpositiveConcentration";
    case ErrorKind::LinearSolveFailure: return "LinearSolveFailure";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_validation_error(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonPositiveBulkVoid:
    case ErrorKind::NonPositiveTotalVoid:
    case ErrorKind::DimensionMismatch:
    case ErrorKind::InvalidParameter:
    case ErrorKind::ParseError:
      return true;
    default:
      return false;
  }
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

}  // namespace pnpb
