#pragma once

#include "hmflow/sphere_mesh.hpp"

#include <iosfwd>
#include <span>
#include <utility>
#include <vector>

namespace hmf {

// A discrete map S^2 -> S^2: one unit vector per mesh vertex.
class SphereMap {
 public:
  static constexpr double kUnitTol = 1e-12;

  // Validates |u_i| = 1 to kUnitTol.
  SphereMap(MeshPtr mesh, std::vector<Vec3> values);

  // Normalises every value first; errors if any norm is below 1e-300.
  static SphereMap normalized(MeshPtr mesh, std::vector<Vec3> values);

  static SphereMap identity(MeshPtr mesh);
  static SphereMap antipodal(MeshPtr mesh);
  static SphereMap constant(MeshPtr mesh, const Vec3& c);

  const TriMesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  std::span<const Vec3> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }
  const Vec3& operator[](std::size_t i) const { return values_[i]; }

 private:
  MeshPtr mesh_;
  std::vector<Vec3> values_;
};

// Per-vertex vectors tangent to a companion map, e.g. the tension field.
struct TangentField {
  MeshPtr mesh;
  std::vector<Vec3> values;
};

// E(u) = 1/2 sum_edges w_ij |u_i - u_j|^2
double energy(const SphereMap& u);

// Unrounded degree: total signed solid angle of the image triangles / 4 pi.
double degree_estimate(const SphereMap& u);

// round(degree_estimate); DegreeUnresolved if it is more than 0.1 from an integer.
int degree(const SphereMap& u);

// Projection of the cotan Laplacian onto the tangent planes of the target.
TangentField tension(const SphereMap& u);

// Discrete ambient Laplacian, (1/A_i) sum_j w_ij (f_j - f_i).
std::vector<Vec3> laplacian_apply(const TriMesh& mesh, std::span<const Vec3> field);

// sum_i A_i |t_i|^2
double l2_norm_sq(const TriMesh& mesh, std::span<const Vec3> field);
double l2_norm_sq(const TangentField& t);

// Area-weighted average of the values (the normalised mean).
Vec3 mean(const SphereMap& u);

// int |D(u - v)|^2, i.e. the full edge form (no factor 1/2) of u - v.
double dirichlet_diff(const SphereMap& u, const SphereMap& v);

double l2_dist_sq(const SphereMap& u, const SphereMap& v);

// Energy restricted to edges whose endpoints both lie within geodesic
// distance r of `center`.
double local_energy(const SphereMap& u, const Vec3& center, double r);

// Same quantity for a vertex centre, gathered by a breadth-first search over
// the vertex graph instead of scanning every edge. `scratch` (all zeros,
// length V) avoids a per-call allocation and is left zeroed on return.
double local_energy_at_vertex(const SphereMap& u, int center, double r,
                              std::vector<char>* scratch = nullptr);

// Largest vertex-centred local energy and the vertex attaining it.
std::pair<double, int> max_local_energy(const SphereMap& u, double r);

// Map file: "s2map level V" then V lines "x y z".
void write_map(std::ostream& os, const SphereMap& u);
SphereMap read_map(std::istream& is);

}  // namespace hmf
