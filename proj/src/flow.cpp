#include "hmflow/flow.hpp"

#include "hmflow/errors.hpp"
#include "hmflow/kernels.hpp"
#include "parallel.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include <cmath>
#include <cstdio>
#include <numbers>
#include <ostream>

namespace hmf {

namespace k = kernels::omp;

const char* to_string(Scheme s) {
  return s == Scheme::Explicit ? "explicit" : "semi-implicit";
}

const char* to_string(FlowStatus s) {
  switch (s) {
    case FlowStatus::Converged: return "Converged";
    case FlowStatus::SingularityDetected: return "SingularityDetected";
    case FlowStatus::MaxTimeReached: return "MaxTimeReached";
  }
  return "unknown";
}

Scheme scheme_from_string(const std::string& s) {
  if (s == "explicit") return Scheme::Explicit;
  if (s == "semi-implicit" || s == "semi_implicit") return Scheme::SemiImplicit;
  throw Error(ErrorKind::Parse, "unknown scheme '" + s + "'");
}

void FlowConfig::validate() const {
  if (!(dt >= 0.0)) throw Error(ErrorKind::ParameterDomain, "dt must be positive");
  if (!(stop_tension > 0.0) || !(concentration_threshold > 0.0) || !(t_max > 0.0) ||
      !(concentration_radius >= 0.0))
    throw Error(ErrorKind::ParameterDomain, "flow thresholds must be positive");
  if (record_every < 1 || probe_every < 0 || max_snapshots < 2)
    throw Error(ErrorKind::ParameterDomain, "bad recording settings");
}

double FlowConfig::resolved_dt(const TriMesh& mesh) const {
  if (dt > 0.0) return dt;
  if (scheme == Scheme::Explicit) return 0.2 * mesh.min_edge_length() * mesh.min_edge_length();
  return 0.5 * mesh.mean_edge_length();
}

double FlowConfig::resolved_radius(const TriMesh& mesh) const {
  return concentration_radius > 0.0 ? concentration_radius : 5.0 * mesh.mean_edge_length();
}

// ---------------------------------------------------------------------------

struct Stepper::Impl {
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver;
  Eigen::SparseMatrix<double> K;
};

Stepper::Stepper(MeshPtr mesh, Scheme scheme, double dt)
    : mesh_(std::move(mesh)), scheme_(scheme), dt_(dt) {
  if (!(dt > 0.0)) throw Error(ErrorKind::ParameterDomain, "dt must be positive");
  if (scheme_ != Scheme::SemiImplicit) return;
  impl_ = std::make_unique<Impl>();
  const auto n = static_cast<int>(mesh_->num_vertices());
  const auto off = mesh_->row_offsets();
  const auto nb = mesh_->row_neighbors();
  const auto w = mesh_->row_weights();
  const auto A = mesh_->vertex_areas();
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(nb.size() + n);
  for (int i = 0; i < n; ++i) {
    double diag = A[i];
    for (int p = off[i]; p < off[i + 1]; ++p) {
      diag += dt * w[p];
      trips.emplace_back(i, nb[p], -dt * w[p]);
    }
    trips.emplace_back(i, i, diag);
  }
  impl_->K.resize(n, n);
  impl_->K.setFromTriplets(trips.begin(), trips.end());
  impl_->solver.compute(impl_->K);
  if (impl_->solver.info() != Eigen::Success)
    throw Error(ErrorKind::Solver, "factorisation of M + dt L failed");
}

Stepper::~Stepper() = default;
Stepper::Stepper(Stepper&&) noexcept = default;
Stepper& Stepper::operator=(Stepper&&) noexcept = default;

SphereMap Stepper::step(const SphereMap& u, const std::vector<Vec3>& tau) const {
  const std::size_t n = u.size();
  if (n != mesh_->num_vertices() || tau.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "step: field sizes differ from the mesh");
  std::vector<Vec3> out(n);
  if (scheme_ == Scheme::Explicit) {
    // |u + dt tau| >= 1 since tau is tangent
    const double min_norm = k::explicit_update(u.values(), tau, dt_, out);
    if (!(min_norm >= 1e-6)) throw Error(ErrorKind::StepDegenerate, "explicit step degenerate");
    return SphereMap(u.mesh_ptr(), std::move(out));
  }
  // (M + dt L) delta = dt M tau, the increment form of
  // (M + dt L) v = M u + dt M g u since M tau = M g u - L u.
  const auto A = mesh_->vertex_areas();
  Eigen::MatrixX3d rhs(n, 3);
  for (std::size_t i = 0; i < n; ++i) rhs.row(i) = (dt_ * A[i]) * tau[i].transpose();
  const Eigen::MatrixX3d delta = impl_->solver.solve(rhs);
  const double rn = rhs.norm();
  if (impl_->solver.info() != Eigen::Success || !delta.allFinite())
    throw Error(ErrorKind::Solver, "semi-implicit solve failed");
  if (rn > 0.0) {
    const double res = (impl_->K * delta - rhs).norm() / rn;
    if (!(res <= 1e-10)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "semi-implicit residual %.3g exceeds 1e-10", res);
      throw Error(ErrorKind::Solver, buf);
    }
  }
  double min_norm = INFINITY;
  const auto uv = u.values();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 v = uv[i] + delta.row(i).transpose();
    const double nv = v.norm();
    min_norm = std::min(min_norm, nv);
    out[i] = v / nv;
  }
  if (!(min_norm >= 1e-6))
    throw Error(ErrorKind::StepDegenerate, "semi-implicit step degenerate (reduce dt)");
  return SphereMap(u.mesh_ptr(), std::move(out));
}

SphereMap step(const SphereMap& u, const FlowConfig& cfg) {
  cfg.validate();
  const Stepper s(u.mesh_ptr(), cfg.scheme, cfg.resolved_dt(u.mesh()));
  return s.step(u, tension(u).values);
}

// ---------------------------------------------------------------------------

Concentration detect_concentration(const SphereMap& u, const FlowConfig& cfg) {
  const auto [mx, at] = max_local_energy(u, cfg.resolved_radius(u.mesh()));
  Concentration c;
  c.max_local = mx;
  c.where = u.mesh().vertices()[at];
  c.flag = mx >= cfg.concentration_threshold;
  return c;
}

namespace {

class Runner {
 public:
  Runner(const SphereMap& u0, const FlowConfig& cfg)
      : cfg_(cfg),
        u_(u0),
        stepper_(u0.mesh_ptr(), cfg.scheme, cfg.resolved_dt(u0.mesh())) {}

  FlowResult run() {
    tau_ = tension(u_).values;
    tension_sq_ = l2_norm_sq(u_.mesh(), tau_);
    energy_ = energy(u_);
    degree0_ = degree(u_);
    if (const char* why = record()) finish(FlowStatus::SingularityDetected, why);
    while (trace_.status == FlowStatus::MaxTimeReached && trace_.note.empty()) {
      if (std::sqrt(tension_sq_) <= cfg_.stop_tension) {
        finish(FlowStatus::Converged, "tension below threshold");
        break;
      }
      if (t_ >= cfg_.t_max * (1.0 - 1e-12)) {
        finish(FlowStatus::MaxTimeReached, "t_max reached");
        break;
      }
      if (steps_ >= cfg_.max_steps) {
        finish(FlowStatus::MaxTimeReached, "step budget exhausted");
        break;
      }
      advance();
      if (steps_ % cfg_.record_every == 0) {
        if (const char* why = record()) finish(FlowStatus::SingularityDetected, why);
      }
    }
    trace_.dt = stepper_.dt();
    trace_.steps = steps_;
    return {u_, std::move(trace_)};
  }

 private:
  void halve_dt(const char* why) {
    if (trace_.dt_halvings > 0)
      throw Error(ErrorKind::StepDegenerate,
                  std::string(why) + " again after halving dt at t = " + std::to_string(t_));
    ++trace_.dt_halvings;
    stepper_ = Stepper(u_.mesh_ptr(), cfg_.scheme, 0.5 * stepper_.dt());
  }

  void advance() {
    for (;;) {
      std::optional<SphereMap> next;
      try {
        next.emplace(stepper_.step(u_, tau_));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::StepDegenerate && e.kind() != ErrorKind::Solver) throw;
        halve_dt(e.what());
        continue;
      }
      const double e_new = energy(*next);
      if (e_new > energy_ + 1e-9 * energy_) {
        halve_dt("energy increased");
        continue;
      }
      const double dt = stepper_.dt();
      if (cfg_.record_steps) {
        StepRecord r;
        r.t = t_;
        r.dt = dt;
        r.energy_before = energy_;
        r.energy_after = e_new;
        r.tension_sq = tension_sq_;
        r.mean_shift = (mean(*next) - mean(u_)).norm();
        r.displacement = std::sqrt(l2_dist_sq(*next, u_));
        double nm = 0.0;
        for (std::size_t i = 0; i < u_.size(); ++i)
          nm = std::max(nm, std::abs(((*next)[i] - u_[i]).dot(u_[i])));
        r.normal_motion = nm;
        trace_.step_records.push_back(r);
      }
      path_ += dt * std::sqrt(tension_sq_);
      t_ += dt;
      ++steps_;
      u_ = std::move(*next);
      energy_ = e_new;
      tau_ = tension(u_).values;
      tension_sq_ = l2_norm_sq(u_.mesh(), tau_);
      return;
    }
  }

  // Appends a trace sample; returns the reason if it shows a singularity.
  const char* record() {
    FlowSample s;
    s.step = steps_;
    s.t = t_;
    s.energy = energy_;
    s.tension_sq = tension_sq_;
    s.mean = mean(u_);
    s.path_length = path_;
    s.max_local = NAN;
    const double d = degree_estimate(u_);
    s.degree = static_cast<int>(std::lround(d));
    const std::size_t index = trace_.samples.size();
    const bool probe = cfg_.probe_every > 0 && index % cfg_.probe_every == 0;
    Concentration c;
    if (probe) {
      c = detect_concentration(u_, cfg_);
      s.max_local = c.max_local;
    }
    trace_.samples.push_back(s);
    snapshot(index);
    if (std::abs(d - std::round(d)) > 0.1) return "degree unresolved";
    if (s.degree != degree0_) return "degree changed";
    if (c.flag) {
      trace_.concentration_point = c.where;
      return "energy concentration";
    }
    return nullptr;
  }

  void finish(FlowStatus status, const char* note) {
    if (trace_.samples.empty() || trace_.samples.back().step != steps_) {
      if (const char* why = record()) {
        status = FlowStatus::SingularityDetected;
        note = why;
      }
    }
    trace_.status = status;
    trace_.note = note;
  }

  void snapshot(std::size_t index) {
    auto& snaps = trace_.snapshots;
    snaps.push_back({index, std::vector<Vec3>(u_.values().begin(), u_.values().end())});
    if (snaps.size() > cfg_.max_snapshots) {
      // keep the first and every other one after it; the newest stays
      std::vector<Snapshot> kept;
      for (std::size_t i = 0; i < snaps.size(); ++i)
        if (i % 2 == 0 || i + 1 == snaps.size()) kept.push_back(std::move(snaps[i]));
      snaps = std::move(kept);
    }
  }

  FlowConfig cfg_;
  SphereMap u_;
  Stepper stepper_;
  FlowTrace trace_;
  std::vector<Vec3> tau_;
  double tension_sq_ = 0.0;
  double energy_ = 0.0;
  double t_ = 0.0;
  double path_ = 0.0;
  long steps_ = 0;
  int degree0_ = 0;
};

}  // namespace

FlowResult run_flow(const SphereMap& u0, const FlowConfig& cfg) {
  cfg.validate();
  return Runner(u0, cfg).run();
}

// ---------------------------------------------------------------------------

FlowCertificates flow_certificates(const FlowTrace& trace, const SphereMap& final_u,
                                   std::optional<double> energy_ref) {
  const double e_ref = energy_ref.value_or(4.0 * std::numbers::pi - final_u.mesh().energy_deficit());
  FlowCertificates out;
  if (trace.samples.empty()) return out;
  const double path_T = trace.samples.back().path_length;
  for (const auto& snap : trace.snapshots) {
    const FlowSample& s = trace.samples.at(snap.sample);
    CertificateRow r;
    r.sample = snap.sample;
    r.t = s.t;
    r.lhs = std::sqrt(k::mass_dist_sq(final_u.mesh(), final_u.values(), snap.values));
    r.mid = path_T - s.path_length;
    r.rhs_shape = std::sqrt(std::max(0.0, s.energy - e_ref));
    r.ratio = r.rhs_shape > 0.0 ? r.mid / r.rhs_shape : NAN;
    r.holds = r.lhs <= r.mid * (1.0 + 1e-6);
    out.all_hold = out.all_hold && r.holds;
    if (std::isfinite(r.ratio)) out.max_ratio = std::max(out.max_ratio, r.ratio);
    out.rows.push_back(r);
  }
  return out;
}

void write_trace_csv(std::ostream& os, const FlowTrace& trace) {
  os << "t,energy,tension_sq,mx,my,mz,degree,max_local\n";
  char buf[512];
  for (const auto& s : trace.samples) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%d,%.17g\n", s.t,
                  s.energy, s.tension_sq, s.mean.x(), s.mean.y(), s.mean.z(), s.degree,
                  s.max_local);
    os << buf;
  }
}

}  // namespace hmf
