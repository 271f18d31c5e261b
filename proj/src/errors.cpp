#include "hmflow/errors.hpp"

namespace hmf {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ResourceLimit: return "resource-limit";
    case ErrorKind::ShapeMismatch: return "shape-mismatch";
    case ErrorKind::InterpolationDegenerate: return "interpolation-degenerate";
    case ErrorKind::DegreeUnresolved: return "degree-unresolved";
    case ErrorKind::ParameterDomain: return "parameter-domain";
    case ErrorKind::PullbackUnderresolved: return "pullback-underresolved";
    case ErrorKind::BalanceFailed: return "balance-failed";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Solver: return "solver";
    case ErrorKind::StepDegenerate: return "step-degenerate";
    case ErrorKind::FitFailed: return "fit-failed";
    case ErrorKind::VacuousRegime: return "vacuous-regime";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace hmf
