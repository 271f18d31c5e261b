#include "hmflow/balancing.hpp"

#include "hmflow/errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>

namespace hmf {

Vec3 center_functional(const SphereMap& u, const Vec3& a, const PullbackGuard& guard) {
  return mean(pullback(u, a, guard));
}

namespace {

struct Attempt {
  bool ok = false;
  Vec3 a = Vec3::Zero();
  double residual = INFINITY;
};

Vec3 project(const Vec3& a, double radius) {
  const double r = a.norm();
  return r > radius ? Vec3(a * (radius / r)) : a;
}

Attempt newton(const SphereMap& u, Vec3 a, double radius, const BalanceConfig& cfg,
               BalanceResult& out) {
  Attempt best;
  Vec3 F = center_functional(u, a, cfg.guard);
  out.path.push_back(a);
  for (int it = 0;; ++it) {
    const double res = F.norm();
    if (res < best.residual) best = {false, a, res};
    if (res <= cfg.tol) {
      best.ok = true;
      return best;
    }
    if (it == cfg.max_iter) return best;
    ++out.iterations;

    Eigen::Matrix3d J;
    for (int k = 0; k < 3; ++k) {
      Vec3 e = Vec3::Zero();
      e[k] = cfg.fd_step;
      // step inward when the forward point would leave the guarded ball
      if ((a + e).norm() > radius) e = -e;
      J.col(k) = (center_functional(u, a + e, cfg.guard) - F) / e[k];
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(J);
    if (!lu.isInvertible()) return best;
    const Vec3 delta = lu.solve(-F);

    double s = 1.0;
    bool moved = false;
    for (int halvings = 0; halvings < 30; ++halvings, s *= 0.5) {
      const Vec3 trial = project(a + s * delta, radius);
      const Vec3 Ft = center_functional(u, trial, cfg.guard);
      if (Ft.norm() < res) {
        a = trial;
        F = Ft;
        moved = true;
        break;
      }
    }
    out.path.push_back(a);
    if (!moved) return best;  // stagnation
  }
}

}  // namespace

BalanceResult balance(const SphereMap& u, const BalanceConfig& cfg) {
  if (const int d = degree(u); d != 1)
    throw Error(ErrorKind::Precondition,
                "balancing needs a degree-one map (degree is " + std::to_string(d) + ")");
  // stay strictly inside the guard so finite-difference points are admissible
  const double radius = cfg.guard.radius(u.mesh()) - 2.0 * cfg.fd_step;
  if (!(radius > 0.0))
    throw Error(ErrorKind::PullbackUnderresolved, "mesh too coarse for any pullback");

  BalanceResult out;
  std::vector<Vec3> seeds{Vec3::Zero()};
  const double s = std::min(0.3, 0.5 * radius);
  for (int k = 0; k < 3; ++k) {
    Vec3 e = Vec3::Zero();
    e[k] = s;
    seeds.push_back(e);
    seeds.push_back(-e);
  }

  Attempt best;
  std::vector<Vec3> roots;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    const Attempt at = newton(u, seeds[i], radius, cfg, out);
    if (at.residual < best.residual) best = at;
    if (at.ok) {
      bool known = false;
      for (const auto& r : roots) known = known || (r - at.a).norm() <= 1e-4;
      if (!known) roots.push_back(at.a);
      // the origin seed succeeding is the common case; the others only run
      // after a stall
      if (i == 0) break;
    }
  }
  if (roots.empty()) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "balancing did not reach |Phi| <= %.3g (best %.3g)", cfg.tol,
                  best.residual);
    throw BalanceFailedError(buf, best.a, best.residual);
  }
  std::size_t pick = 0;
  for (std::size_t i = 1; i < roots.size(); ++i)
    if (roots[i].norm() < roots[pick].norm()) pick = i;
  for (std::size_t i = 0; i < roots.size(); ++i)
    if (i != pick) out.other_roots.push_back(roots[i]);
  out.a_star = roots[pick];
  out.residual = center_functional(u, out.a_star, cfg.guard).norm();
  return out;
}

}  // namespace hmf
