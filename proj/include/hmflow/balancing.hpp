#pragma once

#include "hmflow/mobius.hpp"

#include <vector>

namespace hmf {

struct BalanceConfig {
  double tol = 1e-6;
  int max_iter = 50;  // Newton iterations per seed
  double fd_step = 1e-4;
  PullbackGuard guard;
};

struct BalanceResult {
  Vec3 a_star = Vec3::Zero();
  double residual = 0.0;  // |Phi(a_star)|
  int iterations = 0;     // total over all seeds tried
  std::vector<Vec3> path;
  // Further roots met by the multi-start, farther from the origin than a_star.
  std::vector<Vec3> other_roots;
};

// Phi(a) = mean(u o phi_a).
Vec3 center_functional(const SphereMap& u, const Vec3& a, const PullbackGuard& guard = {});

// Root of Phi in the guarded ball. Damped Newton with a forward-difference
// Jacobian from a = 0; if that stalls, restarts from +-0.3 e_k. Requires
// degree(u) = 1. Throws BalanceFailedError with the best iterate on failure.
BalanceResult balance(const SphereMap& u, const BalanceConfig& cfg = {});

}  // namespace hmf
