// Acceptance run: one PASS/FAIL line per criterion. Exit status is nonzero
// when a blocking criterion fails; criterion 10 is reported only.

#include "hmflow/balancing.hpp"
#include "hmflow/errors.hpp"
#include "hmflow/flow.hpp"
#include "hmflow/rigidity.hpp"
#include "hmflow/scenarios.hpp"
#include "oracles.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

using namespace hmf;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int g_failed = 0;

void run(int id, bool blocking, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("criterion %2d: %s%s (%.1f s) %s\n", id, o.pass ? "PASS" : "FAIL",
              blocking ? "" : " [reported, not asserted]", secs, o.detail.c_str());
  std::fflush(stdout);
  if (blocking && !o.pass) ++g_failed;
}

std::string fmt(const char* f, auto... xs) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, xs...);
  return buf;
}

SphereMap perturbed_identity(int level, double eps, std::uint64_t seed) {
  ScenarioSpec s;
  s.kind = ScenarioKind::PerturbedMobius;
  s.level = level;
  s.eps = eps;
  s.seed = seed;
  return generate(s);
}

SphereMap balanced(const SphereMap& u) { return pullback(u, balance(u).a_star); }

int jobs() { return std::max(1, static_cast<int>(std::thread::hardware_concurrency())); }

// Every flow run below is checked against the displacement certificate.
struct CertLog {
  std::size_t flows = 0;
  std::size_t rows = 0;
  std::size_t violations = 0;
  void add(const FlowResult& r) {
    const auto c = flow_certificates(r.trace, r.u);
    ++flows;
    rows += c.rows.size();
    for (const auto& row : c.rows) violations += row.holds ? 0 : 1;
  }
} g_certs;

// Standard sweeps shared by criteria 8, 9, 10 and 11.
SweepTable g_sweep4, g_sweep5;

std::string csv_of(const SweepTable& t) {
  std::ostringstream os;
  write_sweep_csv(os, t);
  return os.str();
}

std::string reports_of(const SweepTable& t) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& row : t.rows) j.push_back(row.report.to_json());
  return j.dump();
}

Outcome energy_ground_truth() {
  std::vector<double> err;
  for (int level = 3; level <= 6; ++level)
    err.push_back(std::abs(energy(SphereMap::identity(shared_icosphere(level))) - 4 * kPi));
  const double rel5 = err[2] / (4 * kPi);
  double min_order = INFINITY;
  for (std::size_t i = 1; i < err.size(); ++i)
    min_order = std::min(min_order, std::log2(err[i - 1] / err[i]));
  return {rel5 <= 0.005 && min_order >= 1.8,
          fmt("L5 relative error %.3g, min order %.3f", rel5, min_order)};
}

Outcome degree_ground_truth() {
  ScenarioSpec z2;
  z2.kind = ScenarioKind::RationalK;
  z2.k = 2;
  double worst = 0.0;
  for (int level = 3; level <= 6; ++level) {
    auto mesh = shared_icosphere(level);
    z2.level = level;
    worst = std::max({worst, std::abs(degree_estimate(SphereMap::identity(mesh)) - 1.0),
                      std::abs(degree_estimate(SphereMap::antipodal(mesh)) + 1.0),
                      std::abs(degree_estimate(SphereMap::constant(mesh, Vec3::UnitX()))),
                      std::abs(degree_estimate(generate(z2, mesh)) - 2.0)});
  }
  return {worst <= 1e-3, fmt("levels 3-6, worst |d - k| %.3g", worst)};
}

Outcome mobius_harmonicity() {
  bool ok = true;
  std::string detail;
  for (double r : {0.2, 0.4, 0.6}) {
    const MobiusParams m{Eigen::Quaterniond(Eigen::AngleAxisd(0.8, Vec3(1, -1, 2).normalized())),
                         Vec3(2, 1, -1).normalized() * r};
    double prev = INFINITY, worst_rel = 0.0, t6 = 0.0;
    for (int level = 4; level <= 6; ++level) {
      const auto v = sample(m, shared_icosphere(level));
      worst_rel = std::max(worst_rel, std::abs(energy(v) - 4 * kPi) / (4 * kPi));
      const double t = std::sqrt(l2_norm_sq(tension(v)));
      ok = ok && t < prev;
      prev = t6 = t;
    }
    ok = ok && worst_rel <= 0.01 && t6 < 0.05;
    detail += fmt("|a|=%.1f: energy err %.3g, |tau| L6 %.4f; ", r, worst_rel, t6);
  }
  return {ok, detail};
}

Outcome gradient_structure() {
  struct Stats {
    double rel_increase = -INFINITY;
    double c = 0.0;
    bool degree_constant = true;
  };
  auto stats = [](const FlowResult& r) {
    Stats s;
    for (const auto& rec : r.trace.step_records) {
      const double dE = rec.energy_after - rec.energy_before;
      s.rel_increase = std::max(s.rel_increase, dE / rec.energy_before);
      s.c = std::max(s.c, std::abs(dE + rec.dt * rec.tension_sq) / (rec.dt * rec.dt));
    }
    for (const auto& x : r.trace.samples) s.degree_constant = s.degree_constant && x.degree == 1;
    return s;
  };
  FlowConfig cfg;
  cfg.scheme = Scheme::Explicit;
  cfg.record_steps = true;
  cfg.record_every = 100;
  cfg.t_max = 2.0;
  const auto u0 = perturbed_identity(4, 0.1, 1);
  const auto r = run_flow(u0, cfg);
  g_certs.add(r);
  const Stats calib = stats(r);
  // calibrated once, then held to 3x on another start and a halved step
  cfg.dt = 0.5 * cfg.resolved_dt(u0.mesh());
  const auto r2 = run_flow(perturbed_identity(4, 0.1, 2), cfg);
  g_certs.add(r2);
  const Stats check = stats(r2);
  const bool ok = calib.rel_increase <= 1e-9 && check.rel_increase <= 1e-9 &&
                  check.c <= 3 * calib.c && calib.degree_constant && check.degree_constant;
  return {ok, fmt("steps %ld, max rel increase %.3g, calibrated C %.4g, rerun C %.4g", r.trace.steps,
                  std::max(calib.rel_increase, check.rel_increase), calib.c, check.c)};
}

Outcome balancing() {
  double worst_res = 0.0;
  for (int level : {4, 5})
    for (const auto& c : standard_family(level))
      worst_res = std::max(worst_res, balance(generate(c.spec)).residual);

  // identity o phi_b is balanced by a = -b: phi_b o phi_{-b} is the identity,
  // and the quadrature oracle pins Phi(0) of the composed map
  const Vec3 b(0, 0, 0.4);
  auto m5 = shared_icosphere(5);
  const auto u = pullback(SphereMap::identity(m5), b);
  const double phi0_err =
      std::abs(center_functional(u, Vec3::Zero()).z() - oracle::mean_axial_of_dilation(dilation(0.4)));
  const double recovery = (balance(u).a_star + b).norm();

  double worst_mean = 0.0;
  for (const auto& c : standard_family(4)) {
    if (c.spec.eps > 0.1) continue;
    const auto r = run_flow(balanced(generate(c.spec)), FlowConfig{});
    g_certs.add(r);
    for (const auto& s : r.trace.samples) worst_mean = std::max(worst_mean, s.mean.norm());
  }
  const bool ok = worst_res <= 1e-6 && recovery <= 1e-3 && phi0_err <= 1e-3 && worst_mean <= 0.1;
  return {ok, fmt("worst residual %.3g (L4, L5 family), |a* + b| %.3g, oracle Phi(0) err %.3g, "
                  "max |mean u(t)| %.4f",
                  worst_res, recovery, phi0_err, worst_mean)};
}

Outcome w12_identity() {
  // 10 cases: the eps = 0.05 and eps = 0.1 members of the standard family
  double prev = INFINITY;
  bool decreasing = true;
  double at5 = 0.0;
  std::string detail;
  for (int level = 4; level <= 6; ++level) {
    double worst = 0.0;
    int n = 0;
    for (const auto& c : standard_family(level)) {
      if (c.spec.eps != 0.05 && c.spec.eps != 0.1) continue;
      ++n;
      worst = std::max(worst, w12_identity_check(generate(c.spec), c.spec.mobius).relative_gap);
    }
    decreasing = decreasing && worst < prev;
    prev = worst;
    if (level == 5) at5 = worst;
    detail += fmt("L%d worst gap %.4g (%d cases); ", level, worst, n);
  }
  return {decreasing && at5 <= 0.02, detail};
}

Outcome theorem_shape() {
  g_sweep4 = constant_sweep(standard_family(4), {}, jobs());
  g_sweep5 = constant_sweep(standard_family(5), {}, jobs());
  const auto& s4 = g_sweep4.summary;
  const auto& s5 = g_sweep5.summary;
  const double agree = std::abs(s4.empirical_C - s5.empirical_C) / s5.empirical_C;
  const bool ok = s4.cases == 20 && s4.converged == 20 && std::isfinite(s4.empirical_C) &&
                  std::isfinite(s5.empirical_C) && agree <= 0.2 && s4.empirical_C <= 100;
  return {ok, fmt("L4: %zu/%zu Converged, C %.5g; L5: %zu/%zu Converged, C %.5g; rel diff %.3g",
                  s4.converged, s4.cases, s4.empirical_C, s5.converged, s5.cases, s5.empirical_C,
                  agree)};
}

Outcome lemma_shape() {
  const double k4 = g_sweep4.summary.empirical_kappa_sq;
  const double k5 = g_sweep5.summary.empirical_kappa_sq;
  const double diff = std::abs(k4 - k5) / std::max(k4, k5);
  return {std::isfinite(k4) && std::isfinite(k5) && diff <= 0.3,
          fmt("kappa^2 L4 %.5g, L5 %.5g, rel diff %.3g", k4, k5, diff)};
}

Outcome no_bubbling() {
  // A run that trips the detector ends SingularityDetected, so a tripped
  // balanced run shows up as a non-Converged sweep row.
  std::size_t balanced_runs = 0, tripped = 0;
  for (const auto* t : {&g_sweep4, &g_sweep5})
    for (const auto& row : t->rows) {
      ++balanced_runs;
      tripped += row.status == to_string(FlowStatus::SingularityDetected) ? 1 : 0;
    }

  ScenarioSpec s;
  s.kind = ScenarioKind::ConcentratedUnbalanced;
  s.level = 4;
  s.a_norm = 0.95;
  s.eps = 0.05;
  s.seed = 7;
  s.guard.max_lambda_h = 4.0;
  FlowConfig cfg;
  cfg.record_every = 1;
  const auto r = run_flow(generate(s), cfg);
  g_certs.add(r);
  const bool demo_tripped = r.trace.note.find("concentration") != std::string::npos;
  int run_len = 0, longest = 0;
  for (std::size_t i = 1; i < r.trace.samples.size(); ++i) {
    const double a = r.trace.samples[i - 1].max_local, b = r.trace.samples[i].max_local;
    run_len = (b > a) ? run_len + 1 : 0;
    longest = std::max(longest, run_len);
  }
  const bool ok = tripped == 0 && (demo_tripped || longest >= 200);
  return {ok, fmt("balanced runs tripping the detector %zu/%zu; demo: %s (%s), t %.4g, longest "
                  "increasing max_local run %d samples",
                  tripped, balanced_runs, to_string(r.trace.status), r.trace.note.c_str(),
                  r.trace.samples.back().t, longest)};
}

Outcome determinism() {
  const auto again = constant_sweep(standard_family(4), {}, 1);
  const bool ok = csv_of(again) == csv_of(g_sweep4) &&
                  again.summary.to_json().dump() == g_sweep4.summary.to_json().dump() &&
                  reports_of(again) == reports_of(g_sweep4);
  return {ok, fmt("L4 sweep csv, summary and reports compared (jobs %d vs 1)", jobs())};
}

}  // namespace

int main() {
  run(1, true, energy_ground_truth);
  run(2, true, degree_ground_truth);
  run(3, true, mobius_harmonicity);
  run(4, true, gradient_structure);
  run(6, true, balancing);
  run(7, true, w12_identity);
  run(8, true, theorem_shape);
  run(9, true, lemma_shape);
  run(10, false, no_bubbling);
  run(11, true, determinism);
  // last, so that it covers every flow recorded above
  run(5, true, [] {
    return Outcome{g_certs.flows > 0 && g_certs.violations == 0,
                   fmt("%zu flows, %zu sampled s, %zu violations", g_certs.flows, g_certs.rows,
                       g_certs.violations)};
  });
  std::printf("%s: %d blocking criteria failed\n", g_failed ? "FAIL" : "PASS", g_failed);
  return g_failed ? 1 : 0;
}
