#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace hmf {

enum class ErrorKind {
  ResourceLimit,
  ShapeMismatch,
  InterpolationDegenerate,
  DegreeUnresolved,
  ParameterDomain,
  PullbackUnderresolved,
  BalanceFailed,
  Precondition,
  Solver,
  StepDegenerate,
  FitFailed,
  VacuousRegime,
  Parse,
  Io,
};

const char* to_string(ErrorKind kind);

// Domain errors. The CLI maps all of these to exit code 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class BalanceFailedError : public Error {
 public:
  BalanceFailedError(const std::string& what, Eigen::Vector3d best, double best_residual)
      : Error(ErrorKind::BalanceFailed, what), best_(best), best_residual_(best_residual) {}
  const Eigen::Vector3d& best_iterate() const noexcept { return best_; }
  double best_residual() const noexcept { return best_residual_; }

 private:
  Eigen::Vector3d best_;
  double best_residual_;
};

}  // namespace hmf
