#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pnpb {

enum class ErrorKind {
  NonPositiveBulkVoid,
  NonPositiveTotalVoid,
  DimensionMismatch,
  InvalidParameter,
  SingularAtZero,
  QuadratureNonConvergence,
  VoidCollapse,
  NonpositiveConcentration,
  LinearSolveFailure,
  NoConvergence,
  ParseError,
  IoError,
};

std::string_view to_string(ErrorKind kind);

/// True for errors caused by the input configuration rather than by a solver.
bool is_validation_error(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace pnpb
