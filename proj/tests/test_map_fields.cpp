#include <doctest.h>

#include "hmflow/errors.hpp"
#include "hmflow/map_fields.hpp"
#include "hmflow/mobius.hpp"
#include "hmflow/scenarios.hpp"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

using namespace hmf;

namespace {

constexpr double kPi = std::numbers::pi;

SphereMap z_squared(int level) {
  ScenarioSpec s;
  s.kind = ScenarioKind::RationalK;
  s.k = 2;
  s.level = level;
  return generate(s);
}

MobiusParams params(const Vec3& axis, double angle, const Vec3& a) {
  return {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())), a};
}

}  // namespace

TEST_CASE("energy of simple maps") {
  auto m5 = shared_icosphere(5);
  CHECK(energy(SphereMap::constant(m5, Vec3::UnitY())) == 0.0);
  const double e_id = energy(SphereMap::identity(m5));
  MESSAGE("E(identity, L5) = " << e_id);
  CHECK(std::abs(e_id - 4 * kPi) <= 0.005 * 4 * kPi);
  const double e_z2 = energy(z_squared(5));
  MESSAGE("E(z^2, L5) = " << e_z2);
  CHECK(std::abs(e_z2 - 8 * kPi) <= 0.01 * 8 * kPi);
}

TEST_CASE("identity energy converges at second order") {
  std::vector<double> err;
  for (int level = 3; level <= 6; ++level)
    err.push_back(std::abs(energy(SphereMap::identity(shared_icosphere(level))) - 4 * kPi));
  for (std::size_t i = 1; i < err.size(); ++i) {
    const double order = std::log2(err[i - 1] / err[i]);
    MESSAGE("energy error " << err[i] << " order " << order);
    CHECK(order >= 1.8);
  }
}

TEST_CASE("degree of the basic maps") {
  for (int level = 3; level <= 5; ++level) {
    auto mesh = shared_icosphere(level);
    const double d_id = degree_estimate(SphereMap::identity(mesh));
    const double d_anti = degree_estimate(SphereMap::antipodal(mesh));
    const double d_const = degree_estimate(SphereMap::constant(mesh, Vec3::UnitX()));
    const double d_z2 = degree_estimate(z_squared(level));
    CHECK(std::abs(d_id - 1.0) <= 1e-3);
    CHECK(std::abs(d_anti + 1.0) <= 1e-3);
    CHECK(std::abs(d_const) <= 1e-3);
    CHECK(std::abs(d_z2 - 2.0) <= 1e-3);
    CHECK(degree(SphereMap::identity(mesh)) == 1);
    CHECK(degree(SphereMap::antipodal(mesh)) == -1);
    CHECK(degree(z_squared(level)) == 2);
  }
}

TEST_CASE("solid angle sum is an integer even for rough maps") {
  // The signed geodesic image triangles of a closed surface cover the sphere
  // an integer number of times, so the estimate stays integral even when the
  // map is far too rough for the mesh.
  auto mesh = shared_icosphere(1);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<Vec3> v;
    for (std::size_t i = 0; i < mesh->num_vertices(); ++i) v.emplace_back(g(rng), g(rng), g(rng));
    const double d = degree_estimate(SphereMap::normalized(mesh, v));
    CHECK(std::abs(d - std::round(d)) <= 1e-9);
  }
}

TEST_CASE("degree is stable under small tangent perturbations") {
  auto mesh = shared_icosphere(4);
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  const auto base = {SphereMap::identity(mesh), z_squared(4), SphereMap::antipodal(mesh)};
  for (const auto& u : base) {
    const int d0 = degree(u);
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<Vec3> v(u.size());
      for (std::size_t i = 0; i < u.size(); ++i) {
        Vec3 w(g(rng), g(rng), g(rng));
        w -= w.dot(u[i]) * u[i];
        if (w.norm() > 1.0) w.normalize();
        v[i] = u[i] + 0.05 * w;
      }
      CHECK(degree(SphereMap::normalized(mesh, v)) == d0);
    }
  }
}

TEST_CASE("tension is tangent and vanishes on constants") {
  auto mesh = shared_icosphere(4);
  const auto tc = tension(SphereMap::constant(mesh, Vec3::UnitZ()));
  for (const auto& t : tc.values) CHECK(t.norm() == 0.0);
  const auto u = perturb(SphereMap::identity(mesh), 0.2, 5);
  const auto t = tension(u);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(std::abs(t.values[i].dot(u[i])) <= 1e-10);
}

TEST_CASE("tension of harmonic maps decreases under refinement") {
  const auto m = params(Vec3(1, 2, 0), 0.7, Vec3(0.1, -0.2, 0.2));  // |a| = 0.3
  double prev_id = INFINITY, prev_m = INFINITY;
  for (int level = 3; level <= 6; ++level) {
    auto mesh = shared_icosphere(level);
    const double h = mesh->mean_edge_length();
    const double t_id = std::sqrt(l2_norm_sq(tension(SphereMap::identity(mesh))));
    const double t_m = std::sqrt(l2_norm_sq(tension(sample(m, mesh))));
    MESSAGE("level " << level << " h " << h << " |tau(id)| " << t_id << " |tau(mob)| " << t_m);
    CHECK(t_id < prev_id);
    CHECK(t_m < prev_m);
    CHECK(t_id <= h);
    CHECK(t_m <= 2 * h);
    prev_id = t_id;
    prev_m = t_m;
  }
}

TEST_CASE("l2 norms and distances") {
  auto mesh = shared_icosphere(3);
  const double area = mesh->total_area();
  std::vector<Vec3> zero(mesh->num_vertices(), Vec3::Zero());
  CHECK(l2_norm_sq(*mesh, zero) == 0.0);
  std::vector<Vec3> c(mesh->num_vertices(), Vec3(0.0, 3.0, 0.0));
  CHECK(l2_norm_sq(*mesh, c) == doctest::Approx(9.0 * area).epsilon(1e-14));
  const auto id = SphereMap::identity(mesh);
  CHECK(l2_dist_sq(id, id) == 0.0);
  CHECK(l2_dist_sq(id, SphereMap::antipodal(mesh)) == doctest::Approx(4.0 * area).epsilon(1e-14));
}

TEST_CASE("mean of simple maps") {
  auto mesh = shared_icosphere(4);
  CHECK(mean(SphereMap::identity(mesh)).norm() <= 1e-12);
  const Vec3 c = Vec3(1, 2, 3).normalized();
  CHECK((mean(SphereMap::constant(mesh, c)) - c).norm() <= 1e-13);
}

TEST_CASE("mean of a pulled-back identity matches quadrature") {
  auto mesh = shared_icosphere(5);
  const Vec3 a(0, 0, 0.5);
  const Vec3 mu = mean(pullback(SphereMap::identity(mesh), a));
  const double ref = oracle::mean_axial_of_dilation(dilation(0.5));
  MESSAGE("mean z " << mu.z() << " quadrature " << ref);
  CHECK(ref > 0.0);
  CHECK(std::hypot(mu.x(), mu.y()) <= 1e-10);
  CHECK(mu.z() == doctest::Approx(ref).epsilon(0.01));
}

TEST_CASE("l2 distance between identity and a dilation matches quadrature") {
  auto mesh = shared_icosphere(5);
  const MobiusParams m{Eigen::Quaterniond::Identity(), Vec3(0, 0, 0.2)};
  const double d = l2_dist_sq(SphereMap::identity(mesh), sample(m, mesh));
  const double ref = oracle::l2_dist_sq_identity_dilation(dilation(0.2));
  MESSAGE("l2 dist sq " << d << " quadrature " << ref);
  CHECK(d == doctest::Approx(ref).epsilon(0.01));
}

TEST_CASE("dirichlet_diff properties") {
  auto mesh = shared_icosphere(4);
  const auto u = sample(params(Vec3::UnitX(), 0.3, Vec3(0.2, 0, 0.1)), mesh);
  const auto v = sample(params(Vec3::UnitY(), -0.5, Vec3(0, -0.3, 0.1)), mesh);
  const auto w = perturb(SphereMap::identity(mesh), 0.2, 9);
  CHECK(dirichlet_diff(u, u) == 0.0);
  CHECK(dirichlet_diff(u, v) == doctest::Approx(dirichlet_diff(v, u)).epsilon(1e-14));
  CHECK(dirichlet_diff(u, SphereMap::constant(mesh, Vec3::UnitZ())) ==
        doctest::Approx(2.0 * energy(u)).epsilon(1e-12));
  CHECK(dirichlet_diff(u, w) <= 2.0 * dirichlet_diff(u, v) + 2.0 * dirichlet_diff(v, w));
}

TEST_CASE("dirichlet_diff converges between levels 5 and 7") {
  const auto mu = params(Vec3::UnitX(), 0.3, Vec3(0.2, 0, 0.1));
  const auto mv = params(Vec3(1, 1, 1), -0.5, Vec3(0, -0.3, 0.1));
  auto dd = [&](int level) {
    auto mesh = shared_icosphere(level);
    return dirichlet_diff(sample(mu, mesh), sample(mv, mesh));
  };
  const double d5 = dd(5), d7 = dd(7);
  MESSAGE("dirichlet_diff L5 " << d5 << " L7 " << d7);
  CHECK(d5 == doctest::Approx(d7).epsilon(0.02));
}

TEST_CASE("local energy") {
  auto mesh = shared_icosphere(5);
  const auto id = SphereMap::identity(mesh);
  const auto u = perturb(id, 0.2, 4);
  CHECK(local_energy(u, Vec3::UnitZ(), kPi) == doctest::Approx(energy(u)).epsilon(1e-12));
  CHECK(local_energy(u, Vec3::UnitZ(), 0.0) == 0.0);
  const double half = local_energy(id, Vec3::UnitZ(), kPi / 2);
  MESSAGE("hemisphere local energy " << half);
  CHECK(half == doctest::Approx(2 * kPi).epsilon(0.05));

  std::vector<char> scratch(mesh->num_vertices(), 0);
  for (int i : {0, 17, 400, 5000}) {
    for (double r : {0.05, 0.3, 1.0}) {
      const double bfs = local_energy_at_vertex(u, i, r, &scratch);
      const double brute = local_energy(u, mesh->vertices()[i], r);
      CHECK(bfs == doctest::Approx(brute).epsilon(1e-12));
    }
  }
  for (char c : scratch) CHECK(c == 0);

  auto [mx, where] = max_local_energy(u, 0.3);
  CHECK(mx == doctest::Approx(local_energy(u, mesh->vertices()[where], 0.3)).epsilon(1e-12));
}

TEST_CASE("energy is nearly invariant under pre-composition with a dilation") {
  auto mesh = shared_icosphere(5);
  const auto id = SphereMap::identity(mesh);
  const double e0 = energy(id);
  for (const Vec3& a : {Vec3(0, 0, 0.5), Vec3(0.3, -0.2, 0.1), Vec3(-0.35, 0.35, 0)}) {
    const double e = energy(pullback(id, a));
    MESSAGE("E(pullback) " << e << " vs " << e0);
    CHECK(std::abs(e - e0) <= 0.05 * e0);
  }
}

TEST_CASE("energy lower bound with the identity deficit") {
  // holds for maps that are the identity up to a rotation or a small
  // perturbation of one
  for (int level = 3; level <= 5; ++level) {
    auto mesh = shared_icosphere(level);
    const double dm = mesh->energy_deficit();
    for (double eps : {0.0, 0.05, 0.2}) {
      ScenarioSpec s;
      s.kind = ScenarioKind::PerturbedMobius;
      s.level = level;
      s.mobius = params(Vec3(0, 1, 1), 1.0, Vec3::Zero());
      s.eps = eps;
      s.seed = 42;
      CHECK(energy(generate(s, mesh)) >= 4 * kPi - dm);
    }
  }
}

TEST_CASE("energy deficit of general maps is a stable multiple of the identity deficit") {
  // Concentrated or higher degree maps lose more energy to the piecewise
  // linear discretisation than the identity does; the loss still shrinks like
  // the identity deficit.
  std::vector<ScenarioSpec> specs;
  for (int k : {-3, -2, 2, 3}) {
    ScenarioSpec s;
    s.kind = ScenarioKind::RationalK;
    s.k = k;
    specs.push_back(s);
  }
  {
    ScenarioSpec s;
    s.kind = ScenarioKind::PerturbedMobius;
    s.mobius = params(Vec3(0, 1, 1), 1.0, Vec3(0.1, 0.2, -0.3));
    s.eps = 0.05;
    s.seed = 42;
    specs.push_back(s);
  }
  for (auto s : specs) {
    std::vector<double> ratio;
    for (int level = 3; level <= 5; ++level) {
      s.level = level;
      auto mesh = shared_icosphere(level);
      const double lower = 4 * kPi * std::abs(s.nominal_degree());
      const double deficit = std::max(0.0, lower - energy(generate(s, mesh)));
      ratio.push_back(deficit / mesh->energy_deficit());
    }
    MESSAGE(std::string(to_string(s.kind)) << " k=" << s.k << " deficit/identity deficit: " << ratio[0] << " "
                              << ratio[1] << " " << ratio[2]);
    for (double r : ratio) CHECK(r <= 20.0);
    CHECK(ratio[2] <= 1.25 * ratio[0]);
  }
}

TEST_CASE("map file round trip is bit exact") {
  auto mesh = shared_icosphere(3);
  const auto u = perturb(SphereMap::identity(mesh), 0.17, 8);
  std::stringstream ss;
  write_map(ss, u);
  const auto back = read_map(ss);
  REQUIRE(back.size() == u.size());
  CHECK(back.mesh().level() == 3);
  for (std::size_t i = 0; i < u.size(); ++i) CHECK(back[i] == u[i]);
}

TEST_CASE("map file errors") {
  auto expect_parse = [](const std::string& text, const std::string& needle) {
    std::istringstream is(text);
    try {
      read_map(is);
      FAIL("expected a parse error");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::Parse);
      CHECK(std::string(e.what()).find(needle) != std::string::npos);
    }
  };
  expect_parse("", "line 1");
  expect_parse("s2map 0 11\n", "line 1");
  expect_parse("s2map 0 12\n1 0 0\n1 0\n", "line 3");
  std::string body = "s2map 0 12\n";
  for (int i = 0; i < 11; ++i) body += "0 0 1\n";
  expect_parse(body + "0 0 1.01\n", "line 13");
}
