#include "hmflow/mobius.hpp"

#include "hmflow/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace hmf {

namespace {

void check_a(const Vec3& a) {
  if (!(a.norm() < MobiusParams::kMaxNorm))
    throw Error(ErrorKind::ParameterDomain, "Moebius parameter must satisfy |a| < 1");
}

// Half-angle tangent s = tan(theta/2) of the polar angle from n, and the unit
// direction e of x in the plane orthogonal to n. Returns false at x = +-n.
bool polar_frame(const Vec3& n, const Vec3& x, double* s, Vec3* e) {
  const double c = std::clamp(x.dot(n), -1.0, 1.0);
  const Vec3 t = x - c * n;
  const double st = t.norm();
  if (st == 0.0) {
    *s = c > 0 ? 0.0 : INFINITY;
    return false;
  }
  *e = t / st;
  *s = c >= 0.0 ? st / (1.0 + c) : (1.0 - c) / st;
  return true;
}

}  // namespace

void MobiusParams::validate() const {
  check_a(a);
  if (!(std::abs(rotation.norm() - 1.0) <= 1e-12))
    throw Error(ErrorKind::ParameterDomain, "rotation quaternion is not unit");
}

std::string MobiusParams::to_string() const {
  char buf[256];
  std::snprintf(buf, sizeof buf, "mobius %.17g %.17g %.17g %.17g %.17g %.17g %.17g",
                rotation.w(), rotation.x(), rotation.y(), rotation.z(), a.x(), a.y(), a.z());
  return buf;
}

MobiusParams MobiusParams::parse(const std::string& line) {
  std::istringstream is(line);
  std::string tag;
  double qw, qx, qy, qz, ax, ay, az;
  if (!(is >> tag >> qw >> qx >> qy >> qz >> ax >> ay >> az) || tag != "mobius")
    throw Error(ErrorKind::Parse, "expected 'mobius qw qx qy qz ax ay az'");
  MobiusParams m{Eigen::Quaterniond(qw, qx, qy, qz), Vec3(ax, ay, az)};
  m.validate();
  return m;
}

double dilation(double a_norm) { return (1.0 + a_norm) / (1.0 - a_norm); }

double norm_for_dilation(double lambda) { return (lambda - 1.0) / (lambda + 1.0); }

Vec3 eval_phi(const Vec3& a, const Vec3& x) {
  check_a(a);
  const double r = a.norm();
  if (r == 0.0) return x;
  const Vec3 n = a / r;
  double s;
  Vec3 e;
  if (!polar_frame(n, x, &s, &e)) return x;
  const double sp = s / dilation(r);
  const double d = 1.0 + sp * sp;
  return ((1.0 - sp * sp) / d) * n + (2.0 * sp / d) * e;
}

Vec3 eval_mobius(const MobiusParams& m, const Vec3& x) {
  return m.rotation * eval_phi(m.a, x);
}

double conformal_factor(const Vec3& a, const Vec3& x) {
  check_a(a);
  const double r = a.norm();
  if (r == 0.0) return 1.0;
  const double lambda = dilation(r);
  double s;
  Vec3 e;
  polar_frame(a / r, x, &s, &e);
  if (s <= 1.0) return (1.0 + s * s) / (lambda + s * s / lambda);
  const double inv = 1.0 / (s * s);
  return (inv + 1.0) / (lambda * inv + 1.0 / lambda);
}

double conformal_factor(const MobiusParams& m, const Vec3& x) {
  return conformal_factor(m.a, x);
}

SphereMap sample(const MobiusParams& m, const MeshPtr& mesh) {
  m.validate();
  const auto X = mesh->vertices();
  std::vector<Vec3> v(X.size());
  const auto n = static_cast<std::ptrdiff_t>(X.size());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) v[i] = eval_mobius(m, X[i]).normalized();
  return SphereMap(mesh, std::move(v));
}

double PullbackGuard::radius(const TriMesh& mesh) const {
  const double lambda_max = max_lambda_h / mesh.mean_edge_length();
  if (lambda_max <= 1.0) return 0.0;
  return std::min(max_norm, norm_for_dilation(lambda_max));
}

SphereMap pullback(const SphereMap& u, const Vec3& a, const PullbackGuard& guard) {
  const auto& mesh = u.mesh();
  const double r = a.norm();
  if (r > 0.0) {
    if (!(r <= guard.max_norm) || !(dilation(r) * mesh.mean_edge_length() <= guard.max_lambda_h)) {
      char buf[160];
      std::snprintf(buf, sizeof buf,
                    "pullback under-resolved: |a| = %.6g needs dilation*h = %.4g (limit %.4g)", r,
                    r < 1.0 ? dilation(r) * mesh.mean_edge_length() : INFINITY,
                    guard.max_lambda_h);
      throw Error(ErrorKind::PullbackUnderresolved, buf);
    }
  }
  const auto X = mesh.vertices();
  std::vector<Vec3> out(X.size());
  detail::parallel_for(static_cast<std::ptrdiff_t>(X.size()), [&](std::ptrdiff_t i) {
    out[i] = mesh.interpolate(u.values(), eval_phi(a, X[i]));
  });
  return SphereMap(u.mesh_ptr(), std::move(out));
}

}  // namespace hmf
