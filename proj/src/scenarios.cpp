#include "hmflow/scenarios.hpp"

#include "hmflow/errors.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <random>

namespace hmf {

const char* to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::Mobius: return "mobius";
    case ScenarioKind::RationalK: return "rational_k";
    case ScenarioKind::PerturbedMobius: return "perturbed_mobius";
    case ScenarioKind::ConcentratedUnbalanced: return "concentrated_unbalanced";
  }
  return "unknown";
}

ScenarioKind scenario_kind_from_string(const std::string& s) {
  for (auto k : {ScenarioKind::Mobius, ScenarioKind::RationalK, ScenarioKind::PerturbedMobius,
                 ScenarioKind::ConcentratedUnbalanced}) {
    if (s == to_string(k)) return k;
  }
  throw Error(ErrorKind::Parse, "unknown scenario kind '" + s + "'");
}

void ScenarioSpec::validate() const {
  if (level < 0 || level > TriMesh::kMaxLevel)
    throw Error(ErrorKind::ParameterDomain, "scenario level out of range");
  if (!(eps >= 0.0 && eps <= 0.5))
    throw Error(ErrorKind::ParameterDomain, "perturbation size must lie in [0, 0.5]");
  switch (kind) {
    case ScenarioKind::RationalK:
      if (k == 0 || k < -4 || k > 4)
        throw Error(ErrorKind::ParameterDomain, "rational_k needs k in [-4, 4] \\ {0}");
      break;
    case ScenarioKind::Mobius:
    case ScenarioKind::PerturbedMobius:
      mobius.validate();
      break;
    case ScenarioKind::ConcentratedUnbalanced:
      if (!(a_norm >= 0.9 && a_norm < 1.0))
        throw Error(ErrorKind::ParameterDomain, "concentrated_unbalanced needs |a| in [0.9, 1)");
      if (!(axis.norm() > 0.0)) throw Error(ErrorKind::ParameterDomain, "zero axis");
      break;
  }
}

int ScenarioSpec::nominal_degree() const { return kind == ScenarioKind::RationalK ? k : 1; }

nlohmann::json ScenarioSpec::to_json() const {
  nlohmann::json j;
  j["kind"] = to_string(kind);
  j["level"] = level;
  j["seed"] = seed;
  switch (kind) {
    case ScenarioKind::Mobius:
    case ScenarioKind::PerturbedMobius:
      j["params"] = {{"q", {mobius.rotation.w(), mobius.rotation.x(), mobius.rotation.y(),
                            mobius.rotation.z()}},
                     {"a", {mobius.a.x(), mobius.a.y(), mobius.a.z()}}};
      if (kind == ScenarioKind::PerturbedMobius) j["params"]["eps"] = eps;
      break;
    case ScenarioKind::RationalK:
      j["params"] = {{"k", k}};
      break;
    case ScenarioKind::ConcentratedUnbalanced:
      j["params"] = {{"a_norm", a_norm},
                     {"axis", {axis.x(), axis.y(), axis.z()}},
                     {"eps", eps},
                     {"max_lambda_h", guard.max_lambda_h}};
      break;
  }
  return j;
}

ScenarioSpec ScenarioSpec::from_json(const nlohmann::json& j) {
  try {
    ScenarioSpec s;
    s.kind = scenario_kind_from_string(j.at("kind").get<std::string>());
    s.level = j.value("level", 4);
    s.seed = j.value("seed", std::uint64_t{0});
    const auto p = j.value("params", nlohmann::json::object());
    if (p.contains("q")) {
      const auto q = p.at("q");
      s.mobius.rotation = Eigen::Quaterniond(q.at(0), q.at(1), q.at(2), q.at(3));
    }
    if (p.contains("a")) {
      const auto a = p.at("a");
      s.mobius.a = Vec3(a.at(0), a.at(1), a.at(2));
    }
    if (p.contains("axis")) {
      const auto a = p.at("axis");
      s.axis = Vec3(a.at(0), a.at(1), a.at(2));
    }
    s.k = p.value("k", 1);
    s.eps = p.value("eps", 0.0);
    s.a_norm = p.value("a_norm", 0.95);
    s.guard.max_lambda_h = p.value("max_lambda_h", s.guard.max_lambda_h);
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("scenario spec: ") + e.what());
  }
}

Vec3 eval_rational(int k, const Vec3& x) {
  using C = std::complex<double>;
  const int m = std::abs(k);
  auto power = [&](C z) { return std::pow(k > 0 ? z : std::conj(z), m); };
  if (x.z() <= 0.0) {
    // chart from the north pole; the south pole is z = 0
    const C z(x.x() / (1.0 - x.z()), x.y() / (1.0 - x.z()));
    const C w = power(z);
    const double n2 = std::norm(w);
    const Vec3 y(2.0 * w.real(), 2.0 * w.imag(), n2 - 1.0);
    return y / (n2 + 1.0);
  }
  // chart from the south pole, zeta = 1/z; z^k = 1/zeta^k
  const C zeta(x.x() / (1.0 + x.z()), -x.y() / (1.0 + x.z()));
  const C wi = power(zeta);  // 1/w
  const double n2 = std::norm(wi);
  return Vec3(2.0 * wi.real(), -2.0 * wi.imag(), 1.0 - n2) / (1.0 + n2);
}

std::vector<Vec3> low_frequency_tangent(const SphereMap& base, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double c1 = gauss(rng);
  const double c2 = gauss(rng);
  const double c3 = gauss(rng);
  const auto X = base.mesh().vertices();
  std::vector<Vec3> w(X.size());
  double wmax = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Vec3 y = c1 * Vec3::UnitX() + c2 * X[i].z() * Vec3::UnitY() + c3 * X[i].x() * Vec3::UnitZ();
    w[i] = y - y.dot(base[i]) * base[i];
    wmax = std::max(wmax, w[i].norm());
  }
  if (wmax > 0.0) {
    for (auto& v : w) v /= wmax;
  }
  return w;
}

SphereMap perturb(const SphereMap& base, double eps, std::uint64_t seed) {
  if (eps == 0.0) return base;
  const auto w = low_frequency_tangent(base, seed);
  std::vector<Vec3> v(base.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = (base[i] + eps * w[i]).normalized();
  return SphereMap(base.mesh_ptr(), std::move(v));
}

SphereMap generate(const ScenarioSpec& spec, const MeshPtr& mesh) {
  spec.validate();
  if (mesh->level() != spec.level)
    throw Error(ErrorKind::ShapeMismatch, "mesh level differs from the scenario level");
  switch (spec.kind) {
    case ScenarioKind::Mobius:
      return sample(spec.mobius, mesh);
    case ScenarioKind::RationalK: {
      std::vector<Vec3> v;
      v.reserve(mesh->num_vertices());
      for (const auto& x : mesh->vertices()) v.push_back(eval_rational(spec.k, x).normalized());
      return SphereMap(mesh, std::move(v));
    }
    case ScenarioKind::PerturbedMobius:
      return perturb(sample(spec.mobius, mesh), spec.eps, spec.seed);
    case ScenarioKind::ConcentratedUnbalanced: {
      const Vec3 a = spec.a_norm * spec.axis.normalized();
      return perturb(pullback(SphereMap::identity(mesh), a, spec.guard), spec.eps, spec.seed);
    }
  }
  throw Error(ErrorKind::Precondition, "unhandled scenario kind");
}

SphereMap generate(const ScenarioSpec& spec) { return generate(spec, shared_icosphere(spec.level)); }

}  // namespace hmf
