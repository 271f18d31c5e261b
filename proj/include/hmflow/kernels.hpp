#pragma once

// Data-parallel inner loops over vertices and edges. Each kernel exists twice:
// `serial` is the plain reference loop kept for testing and benchmarking,
// `omp` is the OpenMP version the library uses. Reductions in `omp` are
// summed in fixed-size blocks and combined in block order, so results are
// bit-identical for any thread count.

#include "hmflow/sphere_mesh.hpp"

#include <cmath>
#include <span>

namespace hmf::kernels {

namespace serial {

void laplacian(const TriMesh& mesh, std::span<const Vec3> f, std::span<Vec3> out);
void tension(const TriMesh& mesh, std::span<const Vec3> u, std::span<Vec3> out);
double edge_form(const TriMesh& mesh, std::span<const Vec3> f);
double edge_form_diff(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g);
double mass_norm_sq(const TriMesh& mesh, std::span<const Vec3> f);
double mass_dist_sq(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g);
Vec3 mass_sum(const TriMesh& mesh, std::span<const Vec3> f);
double solid_angle_sum(const TriMesh& mesh, std::span<const Vec3> u);
double explicit_update(std::span<const Vec3> u, std::span<const Vec3> tau, double dt,
                       std::span<Vec3> out);

}  // namespace serial

namespace omp {

void laplacian(const TriMesh& mesh, std::span<const Vec3> f, std::span<Vec3> out);
void tension(const TriMesh& mesh, std::span<const Vec3> u, std::span<Vec3> out);
double edge_form(const TriMesh& mesh, std::span<const Vec3> f);
double edge_form_diff(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g);
double mass_norm_sq(const TriMesh& mesh, std::span<const Vec3> f);
double mass_dist_sq(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g);
Vec3 mass_sum(const TriMesh& mesh, std::span<const Vec3> f);
double solid_angle_sum(const TriMesh& mesh, std::span<const Vec3> u);
// out_i = normalize(u_i + dt * tau_i); returns the smallest pre-normalisation norm.
double explicit_update(std::span<const Vec3> u, std::span<const Vec3> tau, double dt,
                       std::span<Vec3> out);

}  // namespace omp

// Signed solid angle of the spherical triangle (a, b, c).
inline double solid_angle(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double det = a.dot(b.cross(c));
  return 2.0 * std::atan2(det, 1.0 + a.dot(b) + b.dot(c) + c.dot(a));
}

}  // namespace hmf::kernels
