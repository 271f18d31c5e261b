#include "hmflow/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace hmf::kernels {

namespace {

constexpr std::ptrdiff_t kBlock = 2048;

template <class T, class Term>
T blocked_sum(std::ptrdiff_t n, T zero, Term term) {
  const std::ptrdiff_t nblocks = (n + kBlock - 1) / kBlock;
  std::vector<T> partial(static_cast<std::size_t>(nblocks), zero);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t b = 0; b < nblocks; ++b) {
    T acc = zero;
    const std::ptrdiff_t end = std::min(n, (b + 1) * kBlock);
    for (std::ptrdiff_t k = b * kBlock; k < end; ++k) acc += term(k);
    partial[b] = acc;
  }
  T total = zero;
  for (const auto& p : partial) total += p;
  return total;
}

template <class T, class Term>
T serial_sum(std::ptrdiff_t n, T zero, Term term) {
  T total = zero;
  for (std::ptrdiff_t k = 0; k < n; ++k) total += term(k);
  return total;
}

inline Vec3 laplacian_row(const TriMesh& mesh, std::span<const Vec3> f, std::ptrdiff_t i) {
  const auto off = mesh.row_offsets();
  const auto nb = mesh.row_neighbors();
  const auto w = mesh.row_weights();
  Vec3 acc = Vec3::Zero();
  for (int k = off[i]; k < off[i + 1]; ++k) acc += w[k] * (f[nb[k]] - f[i]);
  return acc / mesh.vertex_areas()[i];
}

inline Vec3 tangential(const Vec3& y, const Vec3& u) { return y - y.dot(u) * u; }

inline Vec3 normalized_step(const Vec3& u, const Vec3& t, double dt, double* norm) {
  const Vec3 y = u + dt * t;
  *norm = y.norm();
  return y / *norm;
}

}  // namespace

namespace serial {

void laplacian(const TriMesh& mesh, std::span<const Vec3> f, std::span<Vec3> out) {
  const auto n = static_cast<std::ptrdiff_t>(mesh.num_vertices());
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = laplacian_row(mesh, f, i);
}

void tension(const TriMesh& mesh, std::span<const Vec3> u, std::span<Vec3> out) {
  const auto n = static_cast<std::ptrdiff_t>(mesh.num_vertices());
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = tangential(laplacian_row(mesh, u, i), u[i]);
}

double edge_form(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto e = mesh.edges();
  return serial_sum(static_cast<std::ptrdiff_t>(e.size()), 0.0, [&](std::ptrdiff_t k) {
    return e[k].weight * (f[e[k].i] - f[e[k].j]).squaredNorm();
  });
}

double edge_form_diff(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g) {
  const auto e = mesh.edges();
  return serial_sum(static_cast<std::ptrdiff_t>(e.size()), 0.0, [&](std::ptrdiff_t k) {
    const int i = e[k].i, j = e[k].j;
    return e[k].weight * ((f[i] - g[i]) - (f[j] - g[j])).squaredNorm();
  });
}

double mass_norm_sq(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto a = mesh.vertex_areas();
  return serial_sum(static_cast<std::ptrdiff_t>(f.size()), 0.0,
                    [&](std::ptrdiff_t i) { return a[i] * f[i].squaredNorm(); });
}

double mass_dist_sq(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g) {
  const auto a = mesh.vertex_areas();
  return serial_sum(static_cast<std::ptrdiff_t>(f.size()), 0.0,
                    [&](std::ptrdiff_t i) { return a[i] * (f[i] - g[i]).squaredNorm(); });
}

Vec3 mass_sum(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto a = mesh.vertex_areas();
  return serial_sum(static_cast<std::ptrdiff_t>(f.size()), Vec3(Vec3::Zero()),
                    [&](std::ptrdiff_t i) -> Vec3 { return a[i] * f[i]; });
}

double solid_angle_sum(const TriMesh& mesh, std::span<const Vec3> u) {
  const auto F = mesh.faces();
  return serial_sum(static_cast<std::ptrdiff_t>(F.size()), 0.0, [&](std::ptrdiff_t k) {
    return solid_angle(u[F[k][0]], u[F[k][1]], u[F[k][2]]);
  });
}

double explicit_update(std::span<const Vec3> u, std::span<const Vec3> tau, double dt,
                       std::span<Vec3> out) {
  double min_norm = INFINITY;
  for (std::size_t i = 0; i < u.size(); ++i) {
    double n;
    out[i] = normalized_step(u[i], tau[i], dt, &n);
    min_norm = std::min(min_norm, n);
  }
  return min_norm;
}

}  // namespace serial

namespace omp {

void laplacian(const TriMesh& mesh, std::span<const Vec3> f, std::span<Vec3> out) {
  const auto n = static_cast<std::ptrdiff_t>(mesh.num_vertices());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = laplacian_row(mesh, f, i);
}

void tension(const TriMesh& mesh, std::span<const Vec3> u, std::span<Vec3> out) {
  const auto n = static_cast<std::ptrdiff_t>(mesh.num_vertices());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = tangential(laplacian_row(mesh, u, i), u[i]);
}

double edge_form(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto e = mesh.edges();
  return blocked_sum(static_cast<std::ptrdiff_t>(e.size()), 0.0, [&](std::ptrdiff_t k) {
    return e[k].weight * (f[e[k].i] - f[e[k].j]).squaredNorm();
  });
}

double edge_form_diff(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g) {
  const auto e = mesh.edges();
  return blocked_sum(static_cast<std::ptrdiff_t>(e.size()), 0.0, [&](std::ptrdiff_t k) {
    const int i = e[k].i, j = e[k].j;
    return e[k].weight * ((f[i] - g[i]) - (f[j] - g[j])).squaredNorm();
  });
}

double mass_norm_sq(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto a = mesh.vertex_areas();
  return blocked_sum(static_cast<std::ptrdiff_t>(f.size()), 0.0,
                     [&](std::ptrdiff_t i) { return a[i] * f[i].squaredNorm(); });
}

double mass_dist_sq(const TriMesh& mesh, std::span<const Vec3> f, std::span<const Vec3> g) {
  const auto a = mesh.vertex_areas();
  return blocked_sum(static_cast<std::ptrdiff_t>(f.size()), 0.0,
                     [&](std::ptrdiff_t i) { return a[i] * (f[i] - g[i]).squaredNorm(); });
}

Vec3 mass_sum(const TriMesh& mesh, std::span<const Vec3> f) {
  const auto a = mesh.vertex_areas();
  return blocked_sum(static_cast<std::ptrdiff_t>(f.size()), Vec3(Vec3::Zero()),
                     [&](std::ptrdiff_t i) -> Vec3 { return a[i] * f[i]; });
}

double solid_angle_sum(const TriMesh& mesh, std::span<const Vec3> u) {
  const auto F = mesh.faces();
  return blocked_sum(static_cast<std::ptrdiff_t>(F.size()), 0.0, [&](std::ptrdiff_t k) {
    return solid_angle(u[F[k][0]], u[F[k][1]], u[F[k][2]]);
  });
}

double explicit_update(std::span<const Vec3> u, std::span<const Vec3> tau, double dt,
                       std::span<Vec3> out) {
  const auto n = static_cast<std::ptrdiff_t>(u.size());
  double min_norm = INFINITY;
#pragma omp parallel for schedule(static) reduction(min : min_norm)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double norm;
    out[i] = normalized_step(u[i], tau[i], dt, &norm);
    min_norm = std::min(min_norm, norm);
  }
  return min_norm;
}

}  // namespace omp

}  // namespace hmf::kernels
