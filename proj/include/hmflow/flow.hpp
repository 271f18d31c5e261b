#pragma once

#include "hmflow/map_fields.hpp"

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace hmf {

enum class Scheme { Explicit, SemiImplicit };
enum class FlowStatus { Converged, SingularityDetected, MaxTimeReached };

const char* to_string(Scheme s);
const char* to_string(FlowStatus s);
Scheme scheme_from_string(const std::string& s);

struct FlowConfig {
  Scheme scheme = Scheme::SemiImplicit;
  double dt = 0.0;  // 0: 0.2 h_min^2 (explicit) or 0.5 h (semi-implicit)
  double stop_tension = 1e-4;
  double t_max = 10.0;
  double concentration_radius = 0.0;  // 0: 5 h
  double concentration_threshold = 4.0 * 3.14159265358979323846 - 1.0;
  int record_every = 10;
  // Probe concentration every this many samples (0: never, 1: every sample).
  int probe_every = 1;
  // Snapshots of u at trace samples, for the displacement certificate; older
  // ones are thinned out once there are more than this.
  std::size_t max_snapshots = 256;
  bool record_steps = false;
  long max_steps = 10'000'000;

  void validate() const;
  double resolved_dt(const TriMesh& mesh) const;
  double resolved_radius(const TriMesh& mesh) const;
};

struct FlowSample {
  long step = 0;
  double t = 0.0;
  double energy = 0.0;
  double tension_sq = 0.0;
  Vec3 mean = Vec3::Zero();
  int degree = 0;
  double max_local = 0.0;  // NaN when not probed
  double path_length = 0.0;  // sum of dt * |tau|_{L^2} up to t
};

// Per-step diagnostics, only kept with FlowConfig::record_steps.
struct StepRecord {
  double t = 0.0;  // time at the start of the step
  double dt = 0.0;
  double energy_before = 0.0;
  double energy_after = 0.0;
  double tension_sq = 0.0;  // of the map before the step
  double mean_shift = 0.0;  // |mean(u_{n+1}) - mean(u_n)|
  double normal_motion = 0.0;  // max_i |<u_{n+1,i} - u_{n,i}, u_{n,i}>|
  double displacement = 0.0;  // |u_{n+1} - u_n|_{L^2}
};

struct Snapshot {
  std::size_t sample = 0;  // index into FlowTrace::samples
  std::vector<Vec3> values;
};

struct FlowTrace {
  std::vector<FlowSample> samples;
  FlowStatus status = FlowStatus::MaxTimeReached;
  std::string note;  // why the run stopped
  double dt = 0.0;   // final time step (after any halving)
  int dt_halvings = 0;
  long steps = 0;
  Vec3 concentration_point = Vec3::Zero();
  std::vector<Snapshot> snapshots;
  std::vector<StepRecord> step_records;
};

struct FlowResult {
  SphereMap u;
  FlowTrace trace;
};

// Advances one step. Explicit: normalize(u + dt tau). Semi-implicit: solve
// (M + dt L) v = M (u + dt g u) with g_i = |Du|^2_i = -<(Lap u)_i, u_i>, then
// normalize; maps with tau = 0 are fixed points.
class Stepper {
 public:
  Stepper(MeshPtr mesh, Scheme scheme, double dt);
  ~Stepper();
  Stepper(Stepper&&) noexcept;
  Stepper& operator=(Stepper&&) noexcept;

  double dt() const noexcept { return dt_; }
  Scheme scheme() const noexcept { return scheme_; }
  // `tau` must be tension(u).
  SphereMap step(const SphereMap& u, const std::vector<Vec3>& tau) const;

 private:
  struct Impl;
  MeshPtr mesh_;
  Scheme scheme_;
  double dt_;
  std::unique_ptr<Impl> impl_;
};

SphereMap step(const SphereMap& u, const FlowConfig& cfg);

FlowResult run_flow(const SphereMap& u0, const FlowConfig& cfg);

struct Concentration {
  bool flag = false;
  double max_local = 0.0;
  Vec3 where = Vec3::Zero();
};

Concentration detect_concentration(const SphereMap& u, const FlowConfig& cfg);

struct CertificateRow {
  std::size_t sample = 0;
  double t = 0.0;
  double lhs = 0.0;        // |u(T) - u(s)|_{L^2}
  double mid = 0.0;        // sum over [s, T] of dt |tau|_{L^2}
  double rhs_shape = 0.0;  // [E(s) - E_ref]_+^{1/2}
  double ratio = 0.0;      // mid / rhs_shape (NaN when rhs_shape = 0)
  bool holds = true;       // lhs <= mid (1 + 1e-6)
};

struct FlowCertificates {
  std::vector<CertificateRow> rows;
  bool all_hold = true;
  double max_ratio = 0.0;  // empirical 2 kappa witness
};

// Uses the snapshots in the trace; `final_u` is u(T). E_ref is the energy
// floor for the excess (4 pi minus the mesh deficit by default).
FlowCertificates flow_certificates(const FlowTrace& trace, const SphereMap& final_u,
                                   std::optional<double> energy_ref = std::nullopt);

// "t,energy,tension_sq,mx,my,mz,degree,max_local", 17 significant digits.
void write_trace_csv(std::ostream& os, const FlowTrace& trace);

}  // namespace hmf
