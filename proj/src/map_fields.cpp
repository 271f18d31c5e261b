#include "hmflow/map_fields.hpp"

#include "hmflow/errors.hpp"
#include "hmflow/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>

namespace hmf {

namespace k = kernels::omp;

SphereMap::SphereMap(MeshPtr mesh, std::vector<Vec3> values)
    : mesh_(std::move(mesh)), values_(std::move(values)) {
  if (!mesh_) throw Error(ErrorKind::Precondition, "map without a mesh");
  if (values_.size() != mesh_->num_vertices())
    throw Error(ErrorKind::ShapeMismatch, "map length does not match the mesh");
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(std::abs(values_[i].norm() - 1.0) <= kUnitTol))
      throw Error(ErrorKind::Precondition, "map value " + std::to_string(i) + " is not unit");
  }
}

SphereMap SphereMap::normalized(MeshPtr mesh, std::vector<Vec3> values) {
  for (auto& v : values) {
    const double n = v.norm();
    if (!(n > 1e-300)) throw Error(ErrorKind::Precondition, "cannot normalise a zero vector");
    v /= n;
  }
  return SphereMap(std::move(mesh), std::move(values));
}

SphereMap SphereMap::identity(MeshPtr mesh) {
  std::vector<Vec3> v(mesh->vertices().begin(), mesh->vertices().end());
  return SphereMap(std::move(mesh), std::move(v));
}

SphereMap SphereMap::antipodal(MeshPtr mesh) {
  std::vector<Vec3> v;
  v.reserve(mesh->num_vertices());
  for (const auto& x : mesh->vertices()) v.push_back(-x);
  return SphereMap(std::move(mesh), std::move(v));
}

SphereMap SphereMap::constant(MeshPtr mesh, const Vec3& c) {
  std::vector<Vec3> v(mesh->num_vertices(), c.normalized());
  return SphereMap(std::move(mesh), std::move(v));
}

double energy(const SphereMap& u) { return 0.5 * k::edge_form(u.mesh(), u.values()); }

double degree_estimate(const SphereMap& u) {
  return k::solid_angle_sum(u.mesh(), u.values()) / (4.0 * std::numbers::pi);
}

int degree(const SphereMap& u) {
  const double d = degree_estimate(u);
  const double r = std::round(d);
  if (!(std::abs(d - r) <= 0.1)) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "degree unresolved: solid-angle sum gives %.6f", d);
    throw Error(ErrorKind::DegreeUnresolved, buf);
  }
  return static_cast<int>(r);
}

TangentField tension(const SphereMap& u) {
  TangentField t{u.mesh_ptr(), std::vector<Vec3>(u.size())};
  k::tension(u.mesh(), u.values(), t.values);
  return t;
}

std::vector<Vec3> laplacian_apply(const TriMesh& mesh, std::span<const Vec3> field) {
  if (field.size() != mesh.num_vertices())
    throw Error(ErrorKind::ShapeMismatch, "field length does not match the mesh");
  std::vector<Vec3> out(field.size());
  k::laplacian(mesh, field, out);
  return out;
}

double l2_norm_sq(const TriMesh& mesh, std::span<const Vec3> field) {
  if (field.size() != mesh.num_vertices())
    throw Error(ErrorKind::ShapeMismatch, "field length does not match the mesh");
  return k::mass_norm_sq(mesh, field);
}

double l2_norm_sq(const TangentField& t) { return l2_norm_sq(*t.mesh, t.values); }

Vec3 mean(const SphereMap& u) {
  return k::mass_sum(u.mesh(), u.values()) / u.mesh().total_area();
}

namespace {
void require_same_mesh(const SphereMap& u, const SphereMap& v) {
  if (&u.mesh() != &v.mesh() && u.mesh().level() != v.mesh().level())
    throw Error(ErrorKind::ShapeMismatch, "maps live on different meshes");
}
}  // namespace

double dirichlet_diff(const SphereMap& u, const SphereMap& v) {
  require_same_mesh(u, v);
  return k::edge_form_diff(u.mesh(), u.values(), v.values());
}

double l2_dist_sq(const SphereMap& u, const SphereMap& v) {
  require_same_mesh(u, v);
  return k::mass_dist_sq(u.mesh(), u.values(), v.values());
}

double local_energy(const SphereMap& u, const Vec3& center, double r) {
  const auto& mesh = u.mesh();
  const auto X = mesh.vertices();
  const auto c = center.normalized();
  const double cos_r = r >= std::numbers::pi ? -2.0 : std::cos(std::max(r, 0.0));
  if (r <= 0.0) return 0.0;
  double e = 0.0;
  for (const auto& edge : mesh.edges()) {
    if (X[edge.i].dot(c) >= cos_r && X[edge.j].dot(c) >= cos_r)
      e += edge.weight * (u[edge.i] - u[edge.j]).squaredNorm();
  }
  return 0.5 * e;
}

double local_energy_at_vertex(const SphereMap& u, int center, double r,
                              std::vector<char>* scratch) {
  if (r <= 0.0) return 0.0;
  const auto& mesh = u.mesh();
  const auto X = mesh.vertices();
  const auto off = mesh.row_offsets();
  const auto nb = mesh.row_neighbors();
  const auto w = mesh.row_weights();
  const double cos_r = r >= std::numbers::pi ? -2.0 : std::cos(r);
  const Vec3& c = X[center];

  std::vector<char> local;
  if (!scratch) scratch = &local;
  scratch->resize(mesh.num_vertices(), 0);
  auto& mark = *scratch;

  std::vector<int> members{center};
  mark[center] = 1;
  for (std::size_t q = 0; q < members.size(); ++q) {
    const int i = members[q];
    for (int kk = off[i]; kk < off[i + 1]; ++kk) {
      const int j = nb[kk];
      if (!mark[j] && X[j].dot(c) >= cos_r) {
        mark[j] = 1;
        members.push_back(j);
      }
    }
  }
  std::sort(members.begin(), members.end());
  double e = 0.0;
  for (const int i : members) {
    for (int kk = off[i]; kk < off[i + 1]; ++kk) {
      const int j = nb[kk];
      if (j > i && mark[j]) e += w[kk] * (u[i] - u[j]).squaredNorm();
    }
  }
  for (const int i : members) mark[i] = 0;
  return 0.5 * e;
}

std::pair<double, int> max_local_energy(const SphereMap& u, double r) {
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  std::vector<double> probe(u.size());
#pragma omp parallel
  {
    std::vector<char> scratch(u.size(), 0);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i)
      probe[i] = local_energy_at_vertex(u, static_cast<int>(i), r, &scratch);
  }
  const auto it = std::max_element(probe.begin(), probe.end());
  return {*it, static_cast<int>(it - probe.begin())};
}

void write_map(std::ostream& os, const SphereMap& u) {
  char buf[128];
  os << "s2map " << u.mesh().level() << ' ' << u.size() << '\n';
  for (const auto& x : u.values()) {
    std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", x.x(), x.y(), x.z());
    os << buf;
  }
}

SphereMap read_map(std::istream& is) {
  std::string line;
  int lineno = 1;
  auto fail = [&](const std::string& msg) -> Error {
    return Error(ErrorKind::Parse, "map file line " + std::to_string(lineno) + ": " + msg);
  };
  if (!std::getline(is, line)) throw fail("missing header");
  std::istringstream hs(line);
  std::string tag;
  int level = -1;
  long long nv = -1;
  if (!(hs >> tag >> level >> nv) || tag != "s2map") throw fail("expected 's2map level V'");
  if (level < 0 || level > TriMesh::kMaxLevel) throw fail("level out of range");
  auto mesh = shared_icosphere(level);
  if (nv != static_cast<long long>(mesh->num_vertices()))
    throw fail("vertex count " + std::to_string(nv) + " does not match level " +
               std::to_string(level));
  std::vector<Vec3> values;
  values.reserve(static_cast<std::size_t>(nv));
  while (static_cast<long long>(values.size()) < nv) {
    ++lineno;
    if (!std::getline(is, line)) throw fail("unexpected end of file");
    std::istringstream ls(line);
    double x, y, z;
    if (!(ls >> x >> y >> z)) throw fail("expected 'x y z'");
    const Vec3 v(x, y, z);
    if (!(std::abs(v.norm() - 1.0) <= 1e-6)) throw fail("value is not a unit vector");
    const double n = v.norm();
    values.push_back(std::abs(n - 1.0) > 4e-16 ? Vec3(v / n) : v);
  }
  return SphereMap(std::move(mesh), std::move(values));
}

}  // namespace hmf
