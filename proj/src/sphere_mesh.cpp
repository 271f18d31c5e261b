#include "hmflow/sphere_mesh.hpp"

#include "hmflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <string>
#include <unordered_map>

namespace hmf {

namespace {

constexpr double kInsideTol = 1e-12;

double triple(const Vec3& a, const Vec3& b, const Vec3& c) { return a.dot(b.cross(c)); }

double cot_at(const Vec3& apex, const Vec3& b, const Vec3& c) {
  const Vec3 u = b - apex;
  const Vec3 v = c - apex;
  return u.dot(v) / u.cross(v).norm();
}

std::vector<Vec3> icosahedron_vertices() {
  const double phi = std::numbers::phi;
  std::vector<Vec3> v = {
      {-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
      {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
      {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1},
  };
  for (auto& x : v) x.normalize();
  return v;
}

std::vector<Face> icosahedron_faces(const std::vector<Vec3>& v) {
  std::vector<Face> f = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
      {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
      {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
      {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1},
  };
  for (auto& t : f) {
    if (triple(v[t[0]], v[t[1]], v[t[2]]) < 0) std::swap(t[1], t[2]);
  }
  return f;
}

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

}  // namespace

std::shared_ptr<const TriMesh> TriMesh::icosphere(int level) {
  if (level < 0) throw Error(ErrorKind::ParameterDomain, "mesh level must be non-negative");
  if (level > kMaxLevel) {
    throw Error(ErrorKind::ResourceLimit,
                "mesh level " + std::to_string(level) + " exceeds the limit of " +
                    std::to_string(kMaxLevel));
  }
  std::shared_ptr<TriMesh> mesh(new TriMesh());
  mesh->level_ = level;
  mesh->vertices_ = icosahedron_vertices();
  mesh->face_levels_.push_back(icosahedron_faces(mesh->vertices_));

  for (int l = 0; l < level; ++l) {
    const auto& coarse = mesh->face_levels_.back();
    std::vector<Face> fine;
    fine.reserve(coarse.size() * 4);
    std::unordered_map<std::uint64_t, int> midpoint;
    midpoint.reserve(coarse.size() * 2);
    auto mid = [&](int a, int b) {
      const auto key = edge_key(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      const int idx = static_cast<int>(mesh->vertices_.size());
      mesh->vertices_.push_back((mesh->vertices_[a] + mesh->vertices_[b]).normalized());
      midpoint.emplace(key, idx);
      return idx;
    };
    for (const auto& t : coarse) {
      const int ab = mid(t[0], t[1]);
      const int bc = mid(t[1], t[2]);
      const int ca = mid(t[2], t[0]);
      fine.push_back({t[0], ab, ca});
      fine.push_back({ab, t[1], bc});
      fine.push_back({ca, bc, t[2]});
      fine.push_back({ab, bc, ca});
    }
    mesh->face_levels_.push_back(std::move(fine));
  }
  mesh->finalize();
  return mesh;
}

void TriMesh::finalize() {
  const auto& F = face_levels_.back();
  const std::size_t nv = vertices_.size();

  struct HalfEdge {
    std::uint64_t key;
    int face;
    int corner;
  };
  std::vector<HalfEdge> half;
  half.reserve(F.size() * 3);
  for (std::size_t f = 0; f < F.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      half.push_back({edge_key(F[f][(k + 1) % 3], F[f][(k + 2) % 3]), static_cast<int>(f), k});
    }
  }
  std::sort(half.begin(), half.end(), [](const HalfEdge& a, const HalfEdge& b) {
    return a.key != b.key ? a.key < b.key : a.face < b.face;
  });

  face_neighbors_.assign(F.size(), Face{-1, -1, -1});
  edges_.clear();
  edges_.reserve(half.size() / 2);
  for (std::size_t h = 0; h + 1 < half.size(); h += 2) {
    const auto& e0 = half[h];
    const auto& e1 = half[h + 1];
    if (e0.key != e1.key) throw Error(ErrorKind::Precondition, "mesh is not closed");
    face_neighbors_[e0.face][e0.corner] = e1.face;
    face_neighbors_[e1.face][e1.corner] = e0.face;
    const auto& t0 = F[e0.face];
    const auto& t1 = F[e1.face];
    const double w =
        0.5 * (cot_at(vertices_[t0[e0.corner]], vertices_[t0[(e0.corner + 1) % 3]],
                      vertices_[t0[(e0.corner + 2) % 3]]) +
               cot_at(vertices_[t1[e1.corner]], vertices_[t1[(e1.corner + 1) % 3]],
                      vertices_[t1[(e1.corner + 2) % 3]]));
    edges_.push_back({static_cast<int>(e0.key >> 32), static_cast<int>(e0.key & 0xffffffffu), w});
  }

  vertex_areas_.assign(nv, 0.0);
  total_area_ = 0.0;
  for (const auto& t : F) {
    const double area =
        0.5 * (vertices_[t[1]] - vertices_[t[0]]).cross(vertices_[t[2]] - vertices_[t[0]]).norm();
    for (int k = 0; k < 3; ++k) vertex_areas_[t[k]] += area / 3.0;
  }
  for (double a : vertex_areas_) total_area_ += a;

  double len_sum = 0.0;
  min_edge_length_ = std::numeric_limits<double>::infinity();
  double identity_energy = 0.0;
  for (const auto& e : edges_) {
    const double len = (vertices_[e.i] - vertices_[e.j]).norm();
    len_sum += len;
    min_edge_length_ = std::min(min_edge_length_, len);
    identity_energy += 0.5 * e.weight * len * len;
  }
  mean_edge_length_ = len_sum / static_cast<double>(edges_.size());
  energy_deficit_ = 4.0 * std::numbers::pi - identity_energy;

  std::vector<int> degree(nv, 0);
  for (const auto& e : edges_) {
    ++degree[e.i];
    ++degree[e.j];
  }
  row_offsets_.assign(nv + 1, 0);
  for (std::size_t i = 0; i < nv; ++i) row_offsets_[i + 1] = row_offsets_[i] + degree[i];
  row_neighbors_.assign(row_offsets_.back(), 0);
  row_weights_.assign(row_offsets_.back(), 0.0);
  std::vector<int> fill(row_offsets_.begin(), row_offsets_.end() - 1);
  // edges_ is sorted by (i, j), so each row comes out sorted by neighbour.
  for (const auto& e : edges_) {
    row_neighbors_[fill[e.i]] = e.j;
    row_weights_[fill[e.i]++] = e.weight;
  }
  for (const auto& e : edges_) {
    row_neighbors_[fill[e.j]] = e.i;
    row_weights_[fill[e.j]++] = e.weight;
  }
  for (std::size_t i = 0; i < nv; ++i) {
    std::vector<std::pair<int, double>> row;
    for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k)
      row.emplace_back(row_neighbors_[k], row_weights_[k]);
    std::sort(row.begin(), row.end());
    for (int k = row_offsets_[i]; k < row_offsets_[i + 1]; ++k) {
      row_neighbors_[k] = row[k - row_offsets_[i]].first;
      row_weights_[k] = row[k - row_offsets_[i]].second;
    }
  }
}

std::array<double, 3> TriMesh::raw_weights(int f, const Vec3& p) const {
  const auto& t = faces()[f];
  const Vec3& a = vertices_[t[0]];
  const Vec3& b = vertices_[t[1]];
  const Vec3& c = vertices_[t[2]];
  return {triple(p, b, c), triple(a, p, c), triple(a, b, p)};
}

bool TriMesh::contains(int f, const Vec3& p, Location* loc) const {
  const auto w = raw_weights(f, p);
  const double sum = w[0] + w[1] + w[2];
  if (!(sum > 0.0)) return false;
  const std::array<double, 3> n = {w[0] / sum, w[1] / sum, w[2] / sum};
  if (std::min({n[0], n[1], n[2]}) < -kInsideTol) return false;
  if (loc) *loc = Location{f, n};
  return true;
}

int TriMesh::hierarchy_seed(const Vec3& p) const {
  auto score = [&](const Face& t) {
    const Vec3& a = vertices_[t[0]];
    const Vec3& b = vertices_[t[1]];
    const Vec3& c = vertices_[t[2]];
    const double w0 = triple(p, b, c), w1 = triple(a, p, c), w2 = triple(a, b, p);
    const double sum = w0 + w1 + w2;
    if (!(sum > 0.0)) return -std::numeric_limits<double>::infinity();
    return std::min({w0, w1, w2}) / sum;
  };
  int best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < static_cast<int>(face_levels_[0].size()); ++f) {
    const double s = score(face_levels_[0][f]);
    if (s > best_score) {
      best_score = s;
      best = f;
    }
  }
  for (std::size_t l = 1; l < face_levels_.size(); ++l) {
    int next = 4 * best;
    best_score = -std::numeric_limits<double>::infinity();
    for (int c = 4 * best; c < 4 * best + 4; ++c) {
      const double s = score(face_levels_[l][c]);
      if (s > best_score) {
        best_score = s;
        next = c;
      }
    }
    best = next;
  }
  return best;
}

Location TriMesh::locate(const Vec3& p, int hint) const {
  int f = (hint >= 0 && hint < static_cast<int>(num_faces())) ? hint : hierarchy_seed(p);
  const int max_steps = 4 * (1 << level_) + 32;
  Location loc;
  for (int step = 0; step < max_steps; ++step) {
    if (contains(f, p, &loc)) return loc;
    const auto w = raw_weights(f, p);
    int k = 0;
    if (w[1] < w[k]) k = 1;
    if (w[2] < w[k]) k = 2;
    f = face_neighbors_[f][k];
  }
  return locate_brute_force(p);
}

Location TriMesh::locate_brute_force(const Vec3& p) const {
  Location loc;
  Location best;
  double best_min = -std::numeric_limits<double>::infinity();
  for (int f = 0; f < static_cast<int>(num_faces()); ++f) {
    if (contains(f, p, &loc)) return loc;
    const auto w = raw_weights(f, p);
    const double sum = w[0] + w[1] + w[2];
    if (sum > 0.0) {
      const double m = std::min({w[0], w[1], w[2]}) / sum;
      if (m > best_min) {
        best_min = m;
        best = Location{f, {w[0] / sum, w[1] / sum, w[2] / sum}};
      }
    }
  }
  return best;
}

Vec3 TriMesh::interpolate(std::span<const Vec3> field, const Vec3& p, int hint) const {
  if (field.size() != num_vertices())
    throw Error(ErrorKind::ShapeMismatch, "field length does not match the mesh");
  const Location loc = locate(p, hint);
  const auto& t = faces()[loc.face];
  for (int k = 0; k < 3; ++k) {
    if (vertices_[t[k]] == p) return field[t[k]];
  }
  const Vec3 v = loc.weights[0] * field[t[0]] + loc.weights[1] * field[t[1]] +
                 loc.weights[2] * field[t[2]];
  const double n = v.norm();
  if (n < 1e-6) throw Error(ErrorKind::InterpolationDegenerate, "interpolated value cancels");
  return v / n;
}

void TriMesh::write_text(std::ostream& os) const {
  char buf[128];
  os << level_ << ' ' << num_vertices() << ' ' << num_faces() << '\n';
  for (const auto& x : vertices_) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x.x(), x.y(), x.z());
    os << buf;
  }
  for (const auto& t : faces()) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

MeshPtr shared_icosphere(int level) {
  static std::mutex mutex;
  static std::array<MeshPtr, TriMesh::kMaxLevel + 1> cache;
  if (level < 0 || level > TriMesh::kMaxLevel) return TriMesh::icosphere(level);
  std::lock_guard lock(mutex);
  if (!cache[level]) cache[level] = TriMesh::icosphere(level);
  return cache[level];
}

}  // namespace hmf
