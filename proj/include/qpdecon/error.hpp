#pragma once

#include <stdexcept>
#include <string>

namespace qpdecon {

enum class ErrorKind
{
  DegenerateData,
  OutOfRange,
  IndexOutOfGrid,
  EmptySupport,
  GridTooSmall,
  DimensionMismatch,
  SingularD,
  Infeasible,
  SolverFailure,
  InvalidProbability,
  AllZero,
  NumericalOverflow,
  InvalidSpec,
  SelectionRequired
};

const char* to_string(ErrorKind kind);

//! Every library failure is reported through this type; `kind()` drives the
//! CLI exit-code mapping.
class DeconError : public std::runtime_error
{
public:
  DeconError(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what)
    , kind_(kind)
  {}

  ErrorKind kind() const { return kind_; }

private:
  ErrorKind kind_;
};

inline const char* to_string(ErrorKind kind)
{
  switch (kind) {
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::OutOfRange: return "OutOfRange";
    case ErrorKind::IndexOutOfGrid: return "IndexOutOfGrid";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::GridTooSmall: return "GridTooSmall";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::SingularD: return "SingularD";
    case ErrorKind::Infeasible: return "Infeasible";
    case ErrorKind::SolverFailure: return "SolverFailure";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::AllZero: return "AllZero";
    case ErrorKind::NumericalOverflow: return "NumericalOverflow";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::SelectionRequired: return "SelectionRequired";
  }
  return "Unknown";
}

} // namespace qpdecon
