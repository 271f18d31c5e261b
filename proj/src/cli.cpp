#include "hmflow/cli.hpp"

#include "hmflow/rigidity.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

namespace hmf {

namespace {

using nlohmann::json;

// Everything a subcommand can be configured with. A JSON config file fills
// it first, then explicit flags override.
struct RunConfig {
  int level = 4;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out;
  std::string input;
  ScenarioSpec scenario;
  bool has_scenario = false;
  FlowConfig flow;
  BalanceConfig balance;
  RigidityConfig rigidity;
  std::optional<double> tol;
  std::vector<SweepCase> family;  // empty: the standard family
  bool include_demo = false;
};

json to_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

void apply_json(RunConfig& rc, const json& j) {
  try {
    rc.level = j.value("level", rc.level);
    rc.seed = j.value("seed", rc.seed);
    rc.jobs = j.value("jobs", rc.jobs);
    rc.out = j.value("out", rc.out);
    rc.input = j.value("input", rc.input);
    if (j.contains("scenario")) {
      rc.scenario = ScenarioSpec::from_json(j.at("scenario"));
      rc.has_scenario = true;
    }
    if (j.contains("tol")) rc.tol = j.at("tol").get<double>();
    if (j.contains("flow")) {
      const auto& f = j.at("flow");
      if (f.contains("scheme")) rc.flow.scheme = scheme_from_string(f.at("scheme"));
      rc.flow.dt = f.value("dt", rc.flow.dt);
      rc.flow.stop_tension = f.value("stop_tension", rc.flow.stop_tension);
      rc.flow.t_max = f.value("t_max", rc.flow.t_max);
      rc.flow.record_every = f.value("record_every", rc.flow.record_every);
      rc.flow.probe_every = f.value("probe_every", rc.flow.probe_every);
      rc.flow.concentration_radius = f.value("concentration_radius", rc.flow.concentration_radius);
      rc.flow.concentration_threshold =
          f.value("concentration_threshold", rc.flow.concentration_threshold);
      rc.flow.max_steps = f.value("max_steps", rc.flow.max_steps);
    }
    if (j.contains("balance")) {
      const auto& b = j.at("balance");
      rc.balance.tol = b.value("tol", rc.balance.tol);
      rc.balance.max_iter = b.value("max_iter", rc.balance.max_iter);
      rc.balance.fd_step = b.value("fd_step", rc.balance.fd_step);
      rc.balance.guard.max_lambda_h = b.value("max_lambda_h", rc.balance.guard.max_lambda_h);
    }
    if (j.contains("rigidity")) {
      const auto& r = j.at("rigidity");
      rc.rigidity.kappa_sq = r.value("kappa_sq", rc.rigidity.kappa_sq);
      rc.rigidity.eps0 = r.value("eps0", rc.rigidity.eps0);
      rc.rigidity.degenerate_factor = r.value("degenerate_factor", rc.rigidity.degenerate_factor);
      rc.rigidity.fit = r.value("fit", rc.rigidity.fit);
    }
    if (j.contains("family")) {
      rc.family.clear();
      for (const auto& c : j.at("family"))
        rc.family.push_back({c.at("id").get<std::string>(), ScenarioSpec::from_json(c.at("spec"))});
    }
    rc.include_demo = j.value("include_demo", rc.include_demo);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
}

SphereMap load_map(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::Io, "cannot open map file " + path);
  return read_map(is);
}

void save_map(const std::string& path, const SphereMap& u) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  write_map(os, u);
}

void save_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  os << text;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---- subcommands

int cmd_generate(const RunConfig& rc, std::ostream& out) {
  ScenarioSpec s = rc.scenario;
  s.validate();
  const auto u = generate(s);
  if (rc.out.empty()) {
    write_map(out, u);
  } else {
    save_map(rc.out, u);
    save_text(rc.out + ".spec.json", dump(s.to_json()));
  }
  return kExitOk;
}

int cmd_energy(const RunConfig& rc, std::ostream& out) {
  const auto u = load_map(rc.input);
  const int d = degree(u);
  json j{{"energy", energy(u)},
         {"degree", d},
         {"tension_l2", std::sqrt(l2_norm_sq(tension(u)))},
         {"mean", to_json(mean(u))}};
  out << dump(j);
  return kExitOk;
}

int cmd_balance(const RunConfig& rc, std::ostream& out) {
  const auto u = load_map(rc.input);
  BalanceConfig cfg = rc.balance;
  if (rc.tol) cfg.tol = *rc.tol;
  const auto r = balance(u, cfg);
  json roots = json::array();
  for (const auto& a : r.other_roots) roots.push_back(to_json(a));
  out << dump({{"a_star", to_json(r.a_star)},
               {"residual", r.residual},
               {"iterations", r.iterations},
               {"other_roots", roots}});
  if (!rc.out.empty()) save_map(rc.out, pullback(u, r.a_star, cfg.guard));
  return kExitOk;
}

int cmd_flow(const RunConfig& rc, std::ostream& out) {
  const auto u = load_map(rc.input);
  FlowConfig cfg = rc.flow;
  if (rc.tol) cfg.stop_tension = *rc.tol;
  const auto r = run_flow(u, cfg);
  const auto& last = r.trace.samples.back();
  json j{{"status", to_string(r.trace.status)},
         {"note", r.trace.note},
         {"steps", r.trace.steps},
         {"t", last.t},
         {"energy", last.energy},
         {"tension_l2", std::sqrt(last.tension_sq)},
         {"degree", last.degree},
         {"dt", r.trace.dt},
         {"dt_halvings", r.trace.dt_halvings}};
  if (!rc.out.empty()) {
    save_map(rc.out, r.u);
    std::ostringstream csv;
    write_trace_csv(csv, r.trace);
    save_text(rc.out + ".trace.csv", csv.str());
  }
  out << dump(j);
  return kExitOk;
}

int cmd_verify(const RunConfig& rc, std::ostream& out) {
  const auto u = load_map(rc.input);
  RigidityConfig cfg = rc.rigidity;
  cfg.flow = rc.flow;
  cfg.balance = rc.balance;
  if (rc.tol) cfg.balance.tol = *rc.tol;
  const std::string text = dump(verify_rigidity(u, cfg).to_json());
  if (rc.out.empty())
    out << text;
  else
    save_text(rc.out, text);
  return kExitOk;
}

int cmd_sweep(const RunConfig& rc, std::ostream& out) {
  RigidityConfig cfg = rc.rigidity;
  cfg.flow = rc.flow;
  cfg.balance = rc.balance;
  if (rc.tol) cfg.balance.tol = *rc.tol;
  auto family = rc.family.empty() ? standard_family(rc.level, rc.seed) : rc.family;
  if (rc.include_demo) {
    SweepCase demo;
    demo.id = "concentrated-demo";
    demo.spec.kind = ScenarioKind::ConcentratedUnbalanced;
    demo.spec.level = rc.level;
    demo.spec.a_norm = 0.95;
    demo.spec.eps = 0.05;
    demo.spec.seed = rc.seed + 7;
    demo.spec.guard.max_lambda_h = 4.0;
    family.push_back(demo);
  }
  const auto t = constant_sweep(family, cfg, rc.jobs);
  std::ostringstream csv;
  write_sweep_csv(csv, t);
  json reports = json::array();
  for (const auto& row : t.rows) {
    json r = row.report.to_json();
    r["case_id"] = row.c.id;
    r["spec"] = row.c.spec.to_json();
    r["status"] = row.status;
    if (!row.error.empty()) r["error"] = row.error;
    reports.push_back(std::move(r));
  }
  const std::string prefix = rc.out.empty() ? "sweep" : rc.out;
  save_text(prefix + ".csv", csv.str());
  save_text(prefix + ".summary.json", dump(t.summary.to_json()));
  save_text(prefix + ".reports.json", dump(reports));
  out << dump(t.summary.to_json());
  return kExitOk;
}

int cmd_mesh_info(const RunConfig& rc, std::ostream& out) {
  const auto m = shared_icosphere(rc.level);
  out << dump({{"level", m->level()},
               {"vertices", m->num_vertices()},
               {"faces", m->num_faces()},
               {"edges", m->num_edges()},
               {"mean_edge_length", m->mean_edge_length()},
               {"min_edge_length", m->min_edge_length()},
               {"total_area", m->total_area()},
               {"energy_deficit", m->energy_deficit()}});
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Harmonic map heat flow laboratory for maps S^2 -> S^2", "hmflow"};
  app.require_subcommand(1, 1);

  std::string config_path;
  int level = 4;
  std::string scheme;
  double dt = 0.0, tol = 0.0, t_max = 0.0;
  std::uint64_t seed = 0;
  int jobs = 1;
  std::string out_path, input;
  std::string kind;
  int k = 1;
  double eps = 0.0, a_norm = 0.95, max_lambda_h = 0.5;
  std::vector<double> a, rotation;
  bool demo = false;

  auto common = [&](CLI::App* sc) {
    sc->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sc->add_option("--level", level, "icosphere level")->check(CLI::Range(0, TriMesh::kMaxLevel));
    sc->add_option("--scheme", scheme, "explicit or semi-implicit")
        ->check(CLI::IsMember({"explicit", "semi-implicit"}));
    sc->add_option("--dt", dt, "time step (0: automatic)");
    sc->add_option("--tol", tol,
                   "balancing tolerance (balance, verify, sweep); stopping tension (flow)");
    sc->add_option("--t-max", t_max, "final flow time");
    sc->add_option("--seed", seed, "scenario seed; offset of the sweep seeds");
    sc->add_option("--jobs", jobs, "concurrent sweep cases")->check(CLI::PositiveNumber);
    sc->add_option("--out", out_path, "output path (prefix for sweep)");
  };
  auto with_input = [&](CLI::App* sc) {
    common(sc);
    sc->add_option("map", input, "map file")->required();
  };

  auto* gen = app.add_subcommand("generate", "write a scenario map");
  common(gen);
  gen->add_option("--kind", kind, "scenario kind")
      ->check(CLI::IsMember(
          {"mobius", "rational_k", "perturbed_mobius", "concentrated_unbalanced"}));
  gen->add_option("--k", k, "degree for rational_k");
  gen->add_option("--eps", eps, "perturbation size");
  gen->add_option("--a", a, "Moebius a (3 numbers)")->expected(3);
  gen->add_option("--rotation", rotation, "unit quaternion w x y z")->expected(4);
  gen->add_option("--a-norm", a_norm, "|a| for concentrated_unbalanced");
  gen->add_option("--max-lambda-h", max_lambda_h, "pullback guard for concentrated_unbalanced");
  auto* en = app.add_subcommand("energy", "energy, degree, tension and mean of a map");
  with_input(en);
  auto* bal = app.add_subcommand("balance", "centre-of-mass balancing");
  with_input(bal);
  auto* fl = app.add_subcommand("flow", "run the harmonic map flow");
  with_input(fl);
  auto* ver = app.add_subcommand("verify", "rigidity report for a degree-one map");
  with_input(ver);
  auto* sw = app.add_subcommand("sweep", "rigidity sweep over a family");
  common(sw);
  sw->add_flag("--include-demo", demo, "append the concentrated unbalanced demo case");
  auto* mi = app.add_subcommand("mesh-info", "mesh statistics");
  common(mi);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  CLI::App* sc = app.get_subcommands().front();
  auto given = [&](const char* name) { return sc->get_option_no_throw(name) && sc->count(name) > 0; };

  try {
    RunConfig rc;
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      json j;
      try {
        j = json::parse(is);
      } catch (const json::exception& e) {
        throw Error(ErrorKind::Parse, config_path + ": " + e.what());
      }
      apply_json(rc, j);
    }
    if (given("--level")) rc.level = level;
    if (given("--scheme")) rc.flow.scheme = scheme_from_string(scheme);
    if (given("--dt")) rc.flow.dt = dt;
    if (given("--tol")) rc.tol = tol;
    if (given("--t-max")) rc.flow.t_max = t_max;
    if (given("--seed")) rc.seed = seed;
    if (given("--jobs")) rc.jobs = jobs;
    if (given("--out")) rc.out = out_path;
    if (given("map")) rc.input = input;
    if (demo) rc.include_demo = true;

    const std::string name = sc->get_name();
    if (name == "generate") {
      // the scenario comes from the config, with flags on top
      if (given("--kind")) rc.scenario.kind = scenario_kind_from_string(kind);
      if (!rc.has_scenario || given("--level")) rc.scenario.level = rc.level;
      if (!rc.has_scenario || given("--seed")) rc.scenario.seed = rc.seed;
      if (given("--k")) rc.scenario.k = k;
      if (given("--eps")) rc.scenario.eps = eps;
      if (given("--a-norm")) rc.scenario.a_norm = a_norm;
      if (given("--max-lambda-h")) rc.scenario.guard.max_lambda_h = max_lambda_h;
      if (given("--a")) rc.scenario.mobius.a = Vec3(a[0], a[1], a[2]);
      if (given("--rotation"))
        rc.scenario.mobius.rotation =
            Eigen::Quaterniond(rotation[0], rotation[1], rotation[2], rotation[3]);
      return cmd_generate(rc, out);
    }
    if (name == "energy") return cmd_energy(rc, out);
    if (name == "balance") return cmd_balance(rc, out);
    if (name == "flow") return cmd_flow(rc, out);
    if (name == "verify") return cmd_verify(rc, out);
    if (name == "sweep") return cmd_sweep(rc, out);
    return cmd_mesh_info(rc, out);
  } catch (const Error& e) {
    err << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return kExitDomain;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitDomain;
  }
}

}  // namespace hmf
