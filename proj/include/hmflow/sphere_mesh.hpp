#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

namespace hmf {

using Vec3 = Eigen::Vector3d;
using Face = std::array<int, 3>;

struct Edge {
  int i;
  int j;
  double weight;  // (cot alpha + cot beta) / 2
};

// Result of locating a unit vector on the triangulated sphere. The weights
// are barycentric coordinates of the gnomonic projection of the query onto
// the face plane; they sum to one.
struct Location {
  int face = -1;
  std::array<double, 3> weights{};
};

// Geodesic icosphere with the cotan Laplacian substrate. Immutable after
// construction and safe to share between threads.
class TriMesh {
 public:
  static constexpr int kMaxLevel = 8;

  // Midpoint subdivision of the unit icosahedron, re-projected at every level.
  static std::shared_ptr<const TriMesh> icosphere(int level);

  int level() const noexcept { return level_; }
  std::size_t num_vertices() const noexcept { return vertices_.size(); }
  std::size_t num_faces() const noexcept { return faces().size(); }
  std::size_t num_edges() const noexcept { return edges_.size(); }

  std::span<const Vec3> vertices() const noexcept { return vertices_; }
  std::span<const Face> faces() const noexcept { return face_levels_.back(); }
  std::span<const Edge> edges() const noexcept { return edges_; }
  std::span<const double> vertex_areas() const noexcept { return vertex_areas_; }

  // CSR rows of the Laplacian: neighbours of vertex i live in
  // [row_offsets()[i], row_offsets()[i+1]).
  std::span<const int> row_offsets() const noexcept { return row_offsets_; }
  std::span<const int> row_neighbors() const noexcept { return row_neighbors_; }
  std::span<const double> row_weights() const noexcept { return row_weights_; }

  // face_neighbors()[f][k] is the face across the edge opposite corner k.
  std::span<const Face> face_neighbors() const noexcept { return face_neighbors_; }

  double total_area() const noexcept { return total_area_; }
  double mean_edge_length() const noexcept { return mean_edge_length_; }
  double min_edge_length() const noexcept { return min_edge_length_; }

  // 4*pi minus the discrete energy of the identity map. Used as the
  // per-level allowance when comparing energies against 4*pi*|k|.
  double energy_deficit() const noexcept { return energy_deficit_; }

  // Gnomonic barycentric coordinates of p with respect to face f. Not
  // normalised; their sum is positive when p lies in the cone over f.
  std::array<double, 3> raw_weights(int f, const Vec3& p) const;

  // Adjacency walk from `hint`; without a hint the walk is seeded by a
  // descent through the subdivision hierarchy. Falls back to brute force.
  Location locate(const Vec3& p, int hint = -1) const;
  Location locate_brute_force(const Vec3& p) const;

  // Interpolates a per-vertex field at p and renormalises to unit length.
  // Throws InterpolationDegenerate when the blend nearly cancels.
  Vec3 interpolate(std::span<const Vec3> field, const Vec3& p, int hint = -1) const;

  // "level V F", V lines "x y z", F lines "i j k".
  void write_text(std::ostream& os) const;

 private:
  TriMesh() = default;
  void finalize();
  int hierarchy_seed(const Vec3& p) const;
  bool contains(int f, const Vec3& p, Location* loc) const;

  int level_ = 0;
  std::vector<Vec3> vertices_;
  // face_levels_[l] holds the faces at subdivision depth l; the children of
  // face f at depth l are faces 4f..4f+3 at depth l+1.
  std::vector<std::vector<Face>> face_levels_;
  std::vector<Edge> edges_;
  std::vector<double> vertex_areas_;
  std::vector<int> row_offsets_;
  std::vector<int> row_neighbors_;
  std::vector<double> row_weights_;
  std::vector<Face> face_neighbors_;
  double total_area_ = 0.0;
  double mean_edge_length_ = 0.0;
  double min_edge_length_ = 0.0;
  double energy_deficit_ = 0.0;
};

using MeshPtr = std::shared_ptr<const TriMesh>;

// Process-wide cache of icospheres, one per level.
MeshPtr shared_icosphere(int level);

}  // namespace hmf
