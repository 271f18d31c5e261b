#pragma once

#include "hmflow/balancing.hpp"
#include "hmflow/errors.hpp"
#include "hmflow/flow.hpp"
#include "hmflow/scenarios.hpp"

#include <json.hpp>

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace hmf {

// Discrete stand-in for 4 pi |k|: 0, the identity energy for |k| = 1, and the
// energy of the z^k sample otherwise. Cached per mesh and k.
double reference_energy(const MeshPtr& mesh, int k);

struct RigidityConfig {
  FlowConfig flow;
  BalanceConfig balance;
  bool balance_first = true;
  // Working kappa^2 behind the default eps0 = pi / (1 + 4 kappa^2).
  double kappa_sq = 0.25;
  double eps0 = 0.0;  // 0: derived from kappa_sq
  // Ratios are flagged when excess <= degenerate_factor * mesh precision:
  // the larger of |E(v) - E_id| for the flow limit v and the energy error of
  // the balancing pullback applied to an exact Moebius sample.
  double degenerate_factor = 10.0;
  bool fit = true;

  double resolved_eps0() const;
  void validate() const;
};

struct RigidityReport {
  int level = 0;
  double input_excess = 0.0;   // E(u) - E_id, before balancing
  double excess = 0.0;         // E(u0) - E_id for the balanced u0
  double raw_excess = 0.0;     // E(u0) - 4 pi
  double seminorm_dist = NAN;  // int |D(u0 - v)|^2
  double l2_dist_sq = NAN;
  double ratio = NAN;          // seminorm_dist / excess, NaN when degenerate
  bool degenerate = false;
  double tension_sq = 0.0;     // |tau(u0)|^2
  double lemma1_ratio = NAN;   // excess / tension_sq
  Vec3 balance_a = Vec3::Zero();
  double balance_residual = 0.0;
  double pullback_floor = 0.0;  // |E(pullback(phi_{-a*}, a*)) - E_id|
  std::optional<MobiusParams> fitted_params;
  double fit_seminorm_dist = NAN;  // against sample(fitted_params)
  double fit_g = NAN;
  double decomposition_residual = NAN;  // W^{1,2} identity gap for u0, fitted v
  FlowStatus flow_status = FlowStatus::MaxTimeReached;
  std::string flow_note;
  long flow_steps = 0;
  double flow_time = 0.0;
  double limit_excess = NAN;   // E(v) - E_id
  double mean_v_norm = NAN;    // |mean(v)|
  double sup_dv = NAN;         // sqrt(2) * dilation of the fitted v

  nlohmann::json to_json() const;
};

// Balance, flow from the balanced map, compare with the limit.
// Errors: Precondition (degree != 1), VacuousRegime (input excess >= eps0),
// BalanceFailed. A singular flow is reported in flow_status.
RigidityReport verify_rigidity(const SphereMap& u, const RigidityConfig& cfg = {});

struct Lemma1Probe {
  int degree = 0;
  double excess = 0.0;  // E - reference_energy(k)
  double tension_sq = 0.0;
  double ratio = NAN;   // NaN when degenerate
  bool degenerate = false;
};

// Throws VacuousRegime when excess >= eps0.
Lemma1Probe lemma1_probe(const SphereMap& u, double eps0 = INFINITY);

// G(m) = sum_i A_i |u_i - v_m(x_i)|^2 2 mu_m(x_i)^2
double fit_objective(const SphereMap& u, const MobiusParams& m);

struct FitConfig {
  int max_iter = 2000;
  double fd_step = 1e-5;
  double grad_tol = 1e-6;  // stop when |grad G| <= grad_tol (1 + G)
  double max_norm = 0.9;   // bound on |a|
  // Restart from 4 rotated seeds when the first descent fails, or ends above
  // half the initial G and above this absolute level.
  double good_fit = 1e-2;
};

struct FitResult {
  MobiusParams params;
  double g = 0.0;
  double grad_norm = 0.0;
  int iterations = 0;
  int starts = 1;
};

class FitFailedError : public Error {
 public:
  FitFailedError(const std::string& what, const FitResult& best)
      : Error(ErrorKind::FitFailed, what), best_(best) {}
  const FitResult& best() const noexcept { return best_; }

 private:
  FitResult best_;
};

// Gradient of G in the local chart (rotation vector applied on the right of
// the quaternion, then a), by central differences.
Eigen::Matrix<double, 6, 1> fit_gradient(const SphereMap& u, const MobiusParams& m,
                                         double step = 1e-5);

// Procrustes rotation between the mesh vertices and u.
Eigen::Quaterniond procrustes_rotation(const SphereMap& u);

FitResult fit_mobius(const SphereMap& u, std::optional<MobiusParams> init = std::nullopt,
                     const FitConfig& cfg = {});

struct W12Check {
  double lhs = 0.0;
  double rhs = 0.0;
  double relative_gap = 0.0;
};

// lhs = int |D(u - v)|^2, rhs = 2E(u) - 2E(v) + int |u - v|^2 |Dv|^2 with
// v = sample(m) and |Dv|^2 = 2 mu^2 evaluated exactly.
W12Check w12_identity_check(const SphereMap& u, const MobiusParams& m);

struct SweepCase {
  std::string id;
  ScenarioSpec spec;
};

// eps in {0.02, 0.05, 0.1, 0.2} x seeds 1..5 (shifted by seed_offset) on a
// seeded Moebius base with |a| <= 0.3.
std::vector<SweepCase> standard_family(int level, std::uint64_t seed_offset = 0);

struct SweepRow {
  SweepCase c;
  std::string status;  // flow status, or the error kind when the case threw
  std::string error;
  RigidityReport report;
};

struct SweepSummary {
  int level = 0;
  std::size_t cases = 0;
  std::size_t converged = 0;
  std::size_t degenerate = 0;
  std::size_t failed = 0;
  double empirical_C = NAN;
  double empirical_kappa_sq = NAN;
  double max_mean_v_norm = NAN;
  bool mean_v_bound_holds = true;  // |mean v| <= 1/2 on converged rows
  double max_sup_dv = NAN;

  nlohmann::json to_json() const;
};

struct SweepTable {
  std::vector<SweepRow> rows;
  SweepSummary summary;
};

// Cases run concurrently on up to `jobs` threads; output order and content
// do not depend on `jobs`. Concentrated cases are flowed without balancing.
SweepTable constant_sweep(const std::vector<SweepCase>& family, const RigidityConfig& cfg = {},
                          int jobs = 1);

// "case_id,level,eps,excess,seminorm_dist,l2_dist_sq,ratio,lemma1_ratio,ax,ay,az,mean_v_norm,status"
void write_sweep_csv(std::ostream& os, const SweepTable& table);

}  // namespace hmf
