#include "hmflow/rigidity.hpp"

#include <Eigen/SVD>
#include <omp.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <ostream>
#include <random>
#include <thread>

namespace hmf {

namespace {

constexpr double kPi = std::numbers::pi;

nlohmann::json num(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

}  // namespace

double reference_energy(const MeshPtr& mesh, int k) {
  k = std::abs(k);
  if (k == 0) return 0.0;
  if (k == 1) return 4.0 * kPi - mesh->energy_deficit();
  static std::mutex mu;
  static std::map<std::pair<int, int>, double> cache;
  const std::pair key{mesh->level(), k};
  {
    std::lock_guard lock(mu);
    if (auto it = cache.find(key); it != cache.end()) return it->second;
  }
  ScenarioSpec s;
  s.kind = ScenarioKind::RationalK;
  s.level = mesh->level();
  s.k = k;
  const double e = energy(generate(s, mesh));
  std::lock_guard lock(mu);
  cache.emplace(key, e);
  return e;
}

double RigidityConfig::resolved_eps0() const {
  return eps0 > 0.0 ? eps0 : kPi / (1.0 + 4.0 * kappa_sq);
}

void RigidityConfig::validate() const {
  flow.validate();
  if (!(kappa_sq > 0.0) || eps0 < 0.0 || !(degenerate_factor > 0.0))
    throw Error(ErrorKind::ParameterDomain, "rigidity: kappa_sq, eps0, degenerate_factor");
}

nlohmann::json RigidityReport::to_json() const {
  nlohmann::json j;
  j["level"] = level;
  j["input_excess"] = num(input_excess);
  j["excess"] = num(excess);
  j["raw_excess"] = num(raw_excess);
  j["seminorm_dist"] = num(seminorm_dist);
  j["l2_dist_sq"] = num(l2_dist_sq);
  j["ratio"] = num(ratio);
  j["degenerate"] = degenerate;
  j["tension_sq"] = num(tension_sq);
  j["lemma1_ratio"] = num(lemma1_ratio);
  j["balance_a"] = {balance_a.x(), balance_a.y(), balance_a.z()};
  j["balance_residual"] = num(balance_residual);
  j["pullback_floor"] = num(pullback_floor);
  if (fitted_params) {
    const auto& q = fitted_params->rotation;
    const auto& a = fitted_params->a;
    j["fitted_params"] = {{"rotation", {q.w(), q.x(), q.y(), q.z()}},
                          {"a", {a.x(), a.y(), a.z()}}};
  } else {
    j["fitted_params"] = nullptr;
  }
  j["fit_seminorm_dist"] = num(fit_seminorm_dist);
  j["fit_g"] = num(fit_g);
  j["decomposition_residual"] = num(decomposition_residual);
  j["flow_status"] = to_string(flow_status);
  j["flow_note"] = flow_note;
  j["flow_steps"] = flow_steps;
  j["flow_time"] = num(flow_time);
  j["limit_excess"] = num(limit_excess);
  j["mean_v_norm"] = num(mean_v_norm);
  j["sup_dv"] = num(sup_dv);
  return j;
}

RigidityReport verify_rigidity(const SphereMap& u, const RigidityConfig& cfg) {
  cfg.validate();
  if (const int d = degree(u); d != 1)
    throw Error(ErrorKind::Precondition,
                "rigidity needs a degree-one map (degree is " + std::to_string(d) + ")");
  const auto& mesh = u.mesh_ptr();
  const double e_id = reference_energy(mesh, 1);

  RigidityReport r;
  r.level = mesh->level();
  r.input_excess = energy(u) - e_id;
  if (r.input_excess >= cfg.resolved_eps0()) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "excess %.6g is above the working eps0 %.6g; the estimate is vacuous there",
                  r.input_excess, cfg.resolved_eps0());
    throw Error(ErrorKind::VacuousRegime, buf);
  }

  SphereMap u0 = u;
  if (cfg.balance_first) {
    const auto b = balance(u, cfg.balance);
    r.balance_a = b.a_star;
    r.balance_residual = b.residual;
    if (b.a_star.norm() > 0.0) {
      u0 = pullback(u, b.a_star, cfg.balance.guard);
      // interpolation error of this pullback on an exact Moebius map
      const auto probe = sample(MobiusParams{Eigen::Quaterniond::Identity(), -b.a_star}, mesh);
      r.pullback_floor = std::abs(energy(pullback(probe, b.a_star, cfg.balance.guard)) - e_id);
    }
  } else {
    r.balance_residual = mean(u).norm();
  }

  const double e0 = energy(u0);
  r.excess = e0 - e_id;
  r.raw_excess = e0 - 4.0 * kPi;
  r.tension_sq = l2_norm_sq(tension(u0));

  const auto flow = run_flow(u0, cfg.flow);
  r.flow_status = flow.trace.status;
  r.flow_note = flow.trace.note;
  r.flow_steps = flow.trace.steps;
  r.flow_time = flow.trace.samples.empty() ? 0.0 : flow.trace.samples.back().t;

  const double precision_floor = 64.0 * std::numeric_limits<double>::epsilon() * e_id;
  if (r.flow_status == FlowStatus::Converged) {
    const SphereMap& v = flow.u;
    r.seminorm_dist = dirichlet_diff(u0, v);
    r.l2_dist_sq = l2_dist_sq(u0, v);
    r.limit_excess = energy(v) - e_id;
    r.mean_v_norm = mean(v).norm();
    const double floor =
        std::max({std::abs(r.limit_excess), r.pullback_floor, precision_floor});
    r.degenerate = r.excess <= cfg.degenerate_factor * floor;
    if (!r.degenerate) {
      r.ratio = r.seminorm_dist / r.excess;
      r.lemma1_ratio = r.excess / r.tension_sq;
    }
    if (cfg.fit) {
      const auto fit = fit_mobius(v);
      r.fitted_params = fit.params;
      r.fit_g = fit.g;
      r.fit_seminorm_dist = dirichlet_diff(u0, sample(fit.params, mesh));
      r.decomposition_residual = w12_identity_check(u0, fit.params).relative_gap;
      r.sup_dv = std::sqrt(2.0) * dilation(fit.params.a.norm());
    }
  } else {
    r.degenerate =
        r.excess <= cfg.degenerate_factor * std::max(r.pullback_floor, precision_floor);
    if (!r.degenerate && r.tension_sq > 0.0) r.lemma1_ratio = r.excess / r.tension_sq;
  }
  return r;
}

Lemma1Probe lemma1_probe(const SphereMap& u, double eps0) {
  Lemma1Probe p;
  p.degree = degree(u);
  const double e = energy(u);
  p.excess = e - reference_energy(u.mesh_ptr(), p.degree);
  if (p.excess >= eps0) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "excess %.6g is above eps0 %.6g", p.excess, eps0);
    throw Error(ErrorKind::VacuousRegime, buf);
  }
  p.tension_sq = l2_norm_sq(tension(u));
  const double floor = 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, e);
  p.degenerate = p.excess <= floor || p.tension_sq <= floor * floor;
  if (!p.degenerate) p.ratio = p.excess / p.tension_sq;
  return p;
}

// ---- Moebius fit

double fit_objective(const SphereMap& u, const MobiusParams& m) {
  const auto& mesh = u.mesh();
  const auto X = mesh.vertices();
  const auto A = mesh.vertex_areas();
  double g = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const Vec3 v = eval_mobius(m, X[i]).normalized();
    const double mu = conformal_factor(m, X[i]);
    g += A[i] * (u[i] - v).squaredNorm() * 2.0 * mu * mu;
  }
  return g;
}

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

MobiusParams moved(const MobiusParams& m, const Vec6& x, double max_norm) {
  MobiusParams out;
  const Vec3 w = x.head<3>();
  const double angle = w.norm();
  Eigen::Quaterniond dq = Eigen::Quaterniond::Identity();
  if (angle > 0.0) dq = Eigen::Quaterniond(Eigen::AngleAxisd(angle, w / angle));
  out.rotation = (m.rotation * dq).normalized();
  Vec3 a = m.a + x.tail<3>();
  if (a.norm() > max_norm) a *= max_norm / a.norm();
  out.a = a;
  return out;
}

struct Descent {
  FitResult res;
  bool ok = false;
};

Descent descend(const SphereMap& u, MobiusParams m, const FitConfig& cfg) {
  Descent d;
  double g = fit_objective(u, m);
  Vec6 grad = fit_gradient(u, m, cfg.fd_step);
  double alpha = 1e-2;
  Vec6 prev_x = Vec6::Zero(), prev_grad = grad;
  bool have_prev = false;
  for (int it = 0;; ++it) {
    d.res = {m, g, grad.norm(), it, 1};
    if (grad.norm() <= cfg.grad_tol * (1.0 + g)) {
      d.ok = true;
      return d;
    }
    if (it == cfg.max_iter) return d;
    if (have_prev) {
      // Barzilai-Borwein step from the last accepted move
      const Vec6 y = grad - prev_grad;
      const double sy = prev_x.dot(y);
      if (sy > 0.0) alpha = prev_x.squaredNorm() / sy;
    }
    bool accepted = false;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      const Vec6 x = -alpha * grad;
      const MobiusParams trial = moved(m, x, cfg.max_norm);
      const double gt = fit_objective(u, trial);
      if (gt <= g - 1e-4 * alpha * grad.squaredNorm()) {
        // the chart is re-centred at the new point, so the step is
        // expressed there as the same vector
        prev_x = x;
        prev_grad = grad;
        have_prev = true;
        m = trial;
        g = gt;
        grad = fit_gradient(u, m, cfg.fd_step);
        accepted = true;
        break;
      }
    }
    if (!accepted) return d;
  }
}

}  // namespace

Eigen::Matrix<double, 6, 1> fit_gradient(const SphereMap& u, const MobiusParams& m,
                                         double step) {
  Vec6 grad;
  for (int k = 0; k < 6; ++k) {
    Vec6 e = Vec6::Zero();
    e[k] = step;
    // central difference; near the |a| bound both sides stay admissible since
    // the caller keeps |a| below kMaxNorm
    grad[k] = (fit_objective(u, moved(m, e, MobiusParams::kMaxNorm - 1e-6)) -
               fit_objective(u, moved(m, -e, MobiusParams::kMaxNorm - 1e-6))) /
              (2.0 * step);
  }
  return grad;
}

Eigen::Quaterniond procrustes_rotation(const SphereMap& u) {
  const auto X = u.mesh().vertices();
  const auto A = u.mesh().vertex_areas();
  Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < X.size(); ++i) M += A[i] * u[i] * X[i].transpose();
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d D = Eigen::Matrix3d::Identity();
  D(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  const Eigen::Matrix3d R = svd.matrixU() * D * svd.matrixV().transpose();
  return Eigen::Quaterniond(R).normalized();
}

FitResult fit_mobius(const SphereMap& u, std::optional<MobiusParams> init, const FitConfig& cfg) {
  MobiusParams start;
  if (init) {
    init->validate();
    start = *init;
  } else {
    start.rotation = procrustes_rotation(u);
  }
  const double g_first = fit_objective(u, start);
  Descent best = descend(u, start, cfg);
  int starts = 1;
  // restarts only when the first descent failed or left a poor fit; a map
  // that is already close to Moebius cannot halve a G that is nearly zero
  if (!best.ok || (best.res.g > 0.5 * g_first && best.res.g > cfg.good_fit)) {
    const Eigen::Quaterniond turns[4] = {
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi, Vec3::UnitX())),
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi, Vec3::UnitY())),
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi, Vec3::UnitZ())),
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi / 2, Vec3(1, 1, 1).normalized()))};
    for (const auto& t : turns) {
      MobiusParams s = start;
      s.rotation = (start.rotation * t).normalized();
      ++starts;
      Descent d = descend(u, s, cfg);
      if ((d.ok && !best.ok) || (d.ok == best.ok && d.res.g < best.res.g)) best = d;
    }
  }
  best.res.starts = starts;
  if (!best.ok) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "Moebius fit did not converge (G %.6g, |grad| %.3g)",
                  best.res.g, best.res.grad_norm);
    throw FitFailedError(buf, best.res);
  }
  return best.res;
}

W12Check w12_identity_check(const SphereMap& u, const MobiusParams& m) {
  const auto v = sample(m, u.mesh_ptr());
  W12Check c;
  c.lhs = dirichlet_diff(u, v);
  const auto X = u.mesh().vertices();
  const auto A = u.mesh().vertex_areas();
  double weighted = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) {
    const double mu = conformal_factor(m, X[i]);
    weighted += A[i] * (u[i] - v[i]).squaredNorm() * 2.0 * mu * mu;
  }
  c.rhs = 2.0 * energy(u) - 2.0 * energy(v) + weighted;
  const double diff = std::abs(c.lhs - c.rhs);
  c.relative_gap = c.lhs > 0.0 ? diff / c.lhs : diff;
  return c;
}

// ---- sweeps

std::vector<SweepCase> standard_family(int level, std::uint64_t seed_offset) {
  std::vector<SweepCase> out;
  for (double eps : {0.02, 0.05, 0.1, 0.2}) {
    for (std::uint64_t seed = seed_offset + 1; seed <= seed_offset + 5; ++seed) {
      std::mt19937_64 rng(seed * 7919);
      std::normal_distribution<double> gauss(0.0, 1.0);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      const Vec3 axis(gauss(rng), gauss(rng), gauss(rng));
      const Vec3 dir(gauss(rng), gauss(rng), gauss(rng));
      const double angle = 3.0 * unit(rng);
      const double a_norm = 0.3 * unit(rng);
      SweepCase c;
      c.spec.kind = ScenarioKind::PerturbedMobius;
      c.spec.level = level;
      c.spec.mobius = {Eigen::Quaterniond(Eigen::AngleAxisd(angle, axis.normalized())),
                       dir.normalized() * a_norm};
      c.spec.eps = eps;
      c.spec.seed = seed;
      char id[64];
      std::snprintf(id, sizeof id, "pm-L%d-e%.2f-s%llu", level, eps,
                    static_cast<unsigned long long>(seed));
      c.id = id;
      out.push_back(std::move(c));
    }
  }
  return out;
}

nlohmann::json SweepSummary::to_json() const {
  return {{"level", level},
          {"cases", cases},
          {"converged", converged},
          {"degenerate", degenerate},
          {"failed", failed},
          {"empirical_C", num(empirical_C)},
          {"empirical_kappa_sq", num(empirical_kappa_sq)},
          {"max_mean_v_norm", num(max_mean_v_norm)},
          {"mean_v_bound", 0.5},
          {"mean_v_bound_holds", mean_v_bound_holds},
          {"max_sup_dv", num(max_sup_dv)}};
}

namespace {

void run_case(SweepRow& row, const RigidityConfig& base) {
  RigidityConfig cfg = base;
  if (row.c.spec.kind == ScenarioKind::ConcentratedUnbalanced) {
    // the demo is meant to be flowed as is; balancing would undo it
    cfg.balance_first = false;
    cfg.fit = false;
  }
  try {
    const auto u = generate(row.c.spec);
    row.report = verify_rigidity(u, cfg);
    row.status = to_string(row.report.flow_status);
  } catch (const Error& e) {
    row.status = to_string(e.kind());
    row.error = e.what();
    row.report.level = row.c.spec.level;
  }
}

double fmax_nan(double acc, double x) {
  if (!std::isfinite(x)) return acc;
  return std::isfinite(acc) ? std::max(acc, x) : x;
}

}  // namespace

SweepTable constant_sweep(const std::vector<SweepCase>& family, const RigidityConfig& cfg,
                          int jobs) {
  cfg.validate();
  if (jobs < 1) throw Error(ErrorKind::ParameterDomain, "jobs must be at least 1");
  SweepTable t;
  t.rows.resize(family.size());
  for (std::size_t i = 0; i < family.size(); ++i) t.rows[i].c = family[i];

  const std::size_t workers = std::min<std::size_t>(jobs, family.size());
  if (workers <= 1) {
    for (auto& row : t.rows) run_case(row, cfg);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        // cases are the unit of parallelism here
        omp_set_num_threads(1);
        for (std::size_t i; (i = next.fetch_add(1)) < t.rows.size();) run_case(t.rows[i], cfg);
      });
    }
    for (auto& th : pool) th.join();
  }

  auto& s = t.summary;
  s.level = family.empty() ? 0 : family.front().spec.level;
  s.cases = t.rows.size();
  for (const auto& row : t.rows) {
    const auto& r = row.report;
    if (!row.error.empty()) {
      ++s.failed;
      continue;
    }
    if (r.flow_status != FlowStatus::Converged) continue;
    ++s.converged;
    if (r.degenerate) ++s.degenerate;
    s.empirical_C = fmax_nan(s.empirical_C, r.ratio);
    s.empirical_kappa_sq = fmax_nan(s.empirical_kappa_sq, r.lemma1_ratio);
    s.max_mean_v_norm = fmax_nan(s.max_mean_v_norm, r.mean_v_norm);
    s.max_sup_dv = fmax_nan(s.max_sup_dv, r.sup_dv);
    if (!(r.mean_v_norm <= 0.5)) s.mean_v_bound_holds = false;
  }
  return t;
}

void write_sweep_csv(std::ostream& os, const SweepTable& table) {
  os << "case_id,level,eps,excess,seminorm_dist,l2_dist_sq,ratio,lemma1_ratio,ax,ay,az,"
        "mean_v_norm,status\n";
  char buf[512];
  for (const auto& row : table.rows) {
    const auto& r = row.report;
    std::snprintf(buf, sizeof buf,
                  "%s,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s\n",
                  row.c.id.c_str(), row.c.spec.level, row.c.spec.eps, r.excess, r.seminorm_dist,
                  r.l2_dist_sq, r.ratio, r.lemma1_ratio, r.balance_a.x(), r.balance_a.y(),
                  r.balance_a.z(), r.mean_v_norm, row.status.c_str());
    os << buf;
  }
}

}  // namespace hmf
