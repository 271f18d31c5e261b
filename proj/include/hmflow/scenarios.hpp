#pragma once

#include "hmflow/mobius.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>

namespace hmf {

enum class ScenarioKind { Mobius, RationalK, PerturbedMobius, ConcentratedUnbalanced };

const char* to_string(ScenarioKind kind);
ScenarioKind scenario_kind_from_string(const std::string& s);

// Deterministic description of a test map. Only the fields relevant to
// `kind` are used.
struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::Mobius;
  int level = 4;
  MobiusParams mobius;        // mobius, perturbed_mobius
  int k = 1;                  // rational_k: the degree; k < 0 uses conj(z)^|k|
  double eps = 0.0;           // perturbed_mobius, concentrated_unbalanced
  double a_norm = 0.95;       // concentrated_unbalanced
  Vec3 axis = Vec3::UnitZ();  // concentrated_unbalanced
  std::uint64_t seed = 0;
  PullbackGuard guard;        // concentrated_unbalanced

  void validate() const;
  // Degree the generated map is expected to have.
  int nominal_degree() const;

  nlohmann::json to_json() const;
  static ScenarioSpec from_json(const nlohmann::json& j);
};

// z -> z^k in the stereographic chart from the north pole (conj(z)^|k| for
// k < 0); the poles are assigned by continuity.
Vec3 eval_rational(int k, const Vec3& x);

// w_i = P_i(c1 e1 + c2 (x_i.e3) e2 + c3 (x_i.e1) e3) with c ~ N(0, 1) from the
// seeded generator, scaled so that max |w_i| = 1. P_i projects onto the
// tangent plane at base_i.
std::vector<Vec3> low_frequency_tangent(const SphereMap& base, std::uint64_t seed);

// normalize(base_i + eps * w_i)
SphereMap perturb(const SphereMap& base, double eps, std::uint64_t seed);

SphereMap generate(const ScenarioSpec& spec, const MeshPtr& mesh);
SphereMap generate(const ScenarioSpec& spec);

}  // namespace hmf
