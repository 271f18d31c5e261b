#pragma once

#include "hmflow/map_fields.hpp"

#include <Eigen/Geometry>

#include <iosfwd>
#include <string>

namespace hmf {

// Degree-one Moebius map x -> R * phi_a(x).
struct MobiusParams {
  Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
  Vec3 a = Vec3::Zero();

  static constexpr double kMaxNorm = 1.0 - 1e-9;

  // Throws ParameterDomain if |a| >= kMaxNorm or the quaternion is not unit.
  void validate() const;

  // "mobius qw qx qy qz ax ay az"
  std::string to_string() const;
  static MobiusParams parse(const std::string& line);
};

// Dilation factor (1 + |a|) / (1 - |a|).
double dilation(double a_norm);
// Inverse of dilation(): the |a| giving dilation factor lambda.
double norm_for_dilation(double lambda);

// The axial dilation fixing +-a/|a| whose ball extension sends 0 to a.
// Points move toward +a/|a|: tan(theta'/2) = tan(theta/2) / lambda with theta
// measured from a/|a|.
Vec3 eval_phi(const Vec3& a, const Vec3& x);

Vec3 eval_mobius(const MobiusParams& m, const Vec3& x);

// Common singular value of the differential at x. Rotations do not change it.
double conformal_factor(const MobiusParams& m, const Vec3& x);
double conformal_factor(const Vec3& a, const Vec3& x);

SphereMap sample(const MobiusParams& m, const MeshPtr& mesh);

// Limits on how hard a pullback may compress the mesh.
struct PullbackGuard {
  double max_norm = 0.99;
  double max_lambda_h = 0.5;  // dilation * mean edge length

  // Largest admissible |a| on `mesh`.
  double radius(const TriMesh& mesh) const;
};

// u o phi_a, evaluated by point location and interpolation.
// Throws PullbackUnderresolved when the guard is violated.
SphereMap pullback(const SphereMap& u, const Vec3& a, const PullbackGuard& guard = {});

}  // namespace hmf
