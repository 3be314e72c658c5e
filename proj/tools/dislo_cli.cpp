#include "dislo/acceptance.hpp"
#include "dislo/config.hpp"
#include "dislo/io.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace dislo;

namespace {

constexpr int kOk = 0;
constexpr int kInvalidConfig = 2;
constexpr int kNumerical = 3;
constexpr int kCheckFailed = 4;

struct Global {
  std::string config;
  std::string out = "out";
  std::uint64_t seed = 20240611;
  int workers = 1;
  bool check = false;
};

Config load(const Global& g) { return g.config.empty() ? Config{} : load_config(g.config); }

std::string out_path(const Global& g, const std::string& name) {
  std::filesystem::create_directories(g.out);
  return (std::filesystem::path(g.out) / name).string();
}

Vec2 to_vec(const std::vector<double>& v, const char* flag) {
  if (v.size() != 2) throw Error(ErrorKind::InvalidInput, std::string(flag) + " takes two numbers");
  return {v[0], v[1]};
}

// "x,y;x,y;..."
std::vector<Vec2> parse_vectors(const std::string& s) {
  std::vector<Vec2> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    double x, y;
    char comma;
    std::stringstream is(item);
    if (!(is >> x >> comma >> y) || comma != ',')
      throw Error(ErrorKind::InvalidInput, "cannot read vector '" + item + "' (expected x,y)");
    out.emplace_back(x, y);
  }
  if (out.empty()) throw Error(ErrorKind::InvalidInput, "no vectors given");
  return out;
}

int verdict(const Global& g, bool ok, const std::string& what) {
  if (!g.check) return kOk;
  if (ok) return kOk;
  std::fprintf(stderr, "check failed: %s\n", what.c_str());
  return kCheckFailed;
}

Json header(const Global& g, const std::string& command, const Config& c) {
  Json j;
  j["command"] = command;
  j["seed"] = g.seed;
  j["workers"] = g.workers;
  j["config"] = c.to_json();
  return j;
}

// ---------------------------------------------------------------- cell

struct CellArgs {
  std::vector<double> v{1.0, 0.0};
  std::vector<double> deltas{1e-2, 3e-3, 1e-3, 3e-4, 1e-4};
  int cells_per_decade = 0, n_theta = 0;
};

int run_cell(const Global& g, const CellArgs& a) {
  Config c = load(g);
  Vec2 v = to_vec(a.v, "--v");
  CellResolution res = c.tolerances.cell;
  if (a.cells_per_decade > 0) res.cells_per_decade = a.cells_per_decade;
  if (a.n_theta > 0) res.n_theta = a.n_theta;
  QuadraticForm qf = c.quadratic();
  std::vector<CellResult> results;
  for (double d : a.deltas) results.push_back(solve_cell(v, d, qf, res));
  Json j = header(g, "cell", c);
  j["v"] = to_json(v);
  j["resolution"] = {{"cells_per_decade", res.cells_per_decade}, {"n_theta", res.n_theta}};
  Json rs = Json::array();
  std::vector<std::vector<double>> rows;
  for (const auto& r : results) {
    rs.push_back(to_json(r));
    rows.push_back({r.delta, r.value_delta, static_cast<double>(r.elements), r.galerkin_residual, r.max_curl,
                    r.circulation_error});
  }
  j["results"] = rs;
  bool ok = true;
  if (results.size() >= 2) {
    IzeroFit fit = extrapolate_izero(results);
    j["fit"] = to_json(fit);
    ok = fit.monotone;
    if (qf.isotropic && v.norm() > 0.0) {
      double oracle = singular_strain(v, qf).prelog_factor(qf);
      double err = std::abs(fit.izero - oracle) / oracle;
      j["oracle"] = oracle;
      j["relative_error"] = err;
      ok = ok && err <= 0.03;
    }
  }
  write_json(out_path(g, "cell.json"), j);
  write_csv(out_path(g, "cell.csv"),
            {"delta", "value", "elements", "galerkin_residual", "max_curl", "circulation_error"}, rows);
  // strain field at the smallest delta
  const CellResult& last = results.back();
  std::vector<std::vector<double>> field;
  for (std::size_t t = 0; t < last.mesh.num_triangles(); ++t) {
    Vec2 x = last.mesh.centroid(t);
    const Mat2& b = last.beta[t];
    field.push_back({x.x(), x.y(), b(0, 0), b(0, 1), b(1, 0), b(1, 1)});
  }
  write_csv(out_path(g, "cell_field.csv"), {"x", "y", "beta11", "beta12", "beta21", "beta22"}, field);
  return verdict(g, ok, "cell values not monotone or extrapolation off the closed form by more than 3%");
}

// ---------------------------------------------------------------- sigma

int run_sigma(const Global& g, const std::string& vectors, int samples) {
  Config c = load(g);
  Mat2 iq = c.iquad();
  DislocationLattice l = c.resolved_lattice();
  l.validate();
  Json j = header(g, "sigma", c);
  j["cutoff"] = l.cutoff_K;
  j["iquad"] = to_json(iq);
  Json rs = Json::array();
  std::vector<std::vector<double>> rows;
  for (const Vec2& v : parse_vectors(vectors)) {
    SelfEnergyResult s = sigma(l, iq, v);
    Json o;
    o["v"] = to_json(v);
    o["izero"] = quad(iq, v);
    Json sj = to_json(s);
    for (auto it = sj.begin(); it != sj.end(); ++it) o[it.key()] = it.value();
    rs.push_back(o);
    rows.push_back({v.x(), v.y(), s.value, quad(iq, v)});
  }
  j["results"] = rs;
  SigmaPropertyReport props = verify_sigma_properties(l, iq, samples, g.seed);
  j["properties"] = to_json(props);
  double doubling = cutoff_doubling_gap(l, iq, {Vec2(1, 0), Vec2(0, 1), Vec2(1, 1), Vec2(2, -1), Vec2(0.3, 0.7)});
  j["doubling_gap"] = doubling;
  write_json(out_path(g, "sigma.json"), j);
  write_csv(out_path(g, "sigma.csv"), {"v1", "v2", "sigma", "izero"}, rows);
  return verdict(g, props.ok() && doubling <= 1e-9, "self-energy property suite or cutoff certificate");
}

// ---------------------------------------------------------------- build

int run_build(const Global& g) {
  Config c = load(g);
  AssemblyResolution res = c.assembly;
  res.workers = g.workers;
  DislocationMeasure m = approximate_measure(c.target(), c.domain, c.n_eps, c.eps, c.resolved_lattice(), c.iquad());
  AssembledBody b = build_implant(m, res);
  write_mesh(out_path(g, "body.mesh"), b.body.mesh);
  write_matrices(out_path(g, "body.q"), b.body.Q);
  Json j = header(g, "build", c);
  j["body"] = summary_json(b);
  j["deviation"] = to_json(deviation_report(b));
  Json atoms = Json::array();
  for (const auto& a : m.atoms) atoms.push_back({{"position", to_json(a.position)}, {"burgers", to_json(a.burgers)}});
  j["atoms"] = atoms;
  write_json(out_path(g, "body.json"), j);
  bool ok = b.max_circulation_error <= 1e-7 && b.min_det > 0.0;
  return verdict(g, ok, "core circulation above 1e-7 or a non-positive det Q");
}

// ---------------------------------------------------------------- minimize

struct MinimizeArgs {
  std::string body;
  std::vector<double> model;
  double r_in = 0.0, r_out = 1.0;
};

int run_minimize(const Global& g, const MinimizeArgs& a) {
  Config c = load(g);
  Body body;
  Json source;
  if (!a.body.empty()) {
    body.mesh = read_mesh(a.body + ".mesh");
    body.Q = read_matrices(a.body + ".q");
    body.finalize();
    source = {{"body", a.body}};
  } else {
    if (a.model.empty()) throw Error(ErrorKind::InvalidInput, "give --body or --model");
    Vec2 v = to_vec(a.model, "--model");
    double r_in = a.r_in > 0.0 ? a.r_in : v.norm();
    if (!(r_in > 0.0 && a.r_out > r_in)) throw Error(ErrorKind::InvalidInput, "need 0 < r_in < r_out");
    body = model_body(v, Vec2::Zero(), r_in, a.r_out, c.tolerances.cell.cells_per_decade, c.tolerances.cell.n_theta);
    source = {{"model", to_json(v)}, {"r_in", r_in}, {"r_out", a.r_out}};
  }
  Configuration z = identity_configuration(body);
  EnergyBreakdown e0 = energy(body, z, c.density, g.workers);
  MinimizeResult r = minimize(body, c.density, z, c.minimize_options(g.workers));
  RigidityReport rr = best_rotation(body, r.f, g.workers);
  Json j = header(g, "minimize", c);
  j["source"] = source;
  j["elements"] = body.size();
  j["vertices"] = body.mesh.num_vertices();
  j["initial"] = to_json(e0);
  j["energy"] = to_json(r.energy);
  j["iterations"] = r.iterations;
  j["converged"] = r.converged;
  j["rigidity"] = to_json(rr);
  write_json(out_path(g, "energy.json"), j);
  write_configuration(out_path(g, "configuration.csv"), r.f);
  std::vector<std::vector<double>> log;
  for (std::size_t i = 0; i < r.history.size(); ++i) log.push_back({static_cast<double>(i), r.history[i]});
  write_csv(out_path(g, "iterations.csv"), {"iteration", "energy"}, log);
  return verdict(g, r.converged, "minimizer did not converge");
}

// ---------------------------------------------------------------- sweep-scaling

struct SweepArgs {
  std::string kind = "scaling";
  std::vector<double> magnitudes{1e-3, 3e-3, 1e-2};
  std::vector<double> eps;
  std::vector<double> v{1.0, 0.0};
  double R = 1.0, delta = 1e-2;
  int trials = 200;
};

int run_sweep(const Global& g, const SweepArgs& a) {
  Config c = load(g);
  SweepOptions so;
  so.resolution = c.tolerances.cell;
  so.minimize = c.minimize_options(g.workers);
  so.workers = g.workers;
  Vec2 v = to_vec(a.v, "--v");
  std::vector<double> eps = a.eps.empty() ? c.regime.eps : a.eps;
  ScalingReport rep;
  bool ok = true;
  if (a.kind == "scaling") {
    rep = single_scaling_sweep(v, a.magnitudes, a.R, c.density, so);
    ok = !rep.flag("poor_fit");
  } else if (a.kind == "rigidity") {
    rep = rigidity_sweep(v, a.magnitudes, a.R, a.delta, c.density, a.trials, g.seed, so);
    ok = rep.flag("stable_sweep") && rep.flag("stable_refinement");
  } else if (a.kind == "linearization") {
    rep = linearization_sweep(v, eps, a.R, c.density, so);
    ok = rep.flag("gap_decreasing");
  } else if (a.kind == "cell-convergence") {
    rep = cell_convergence_sweep(v, a.delta, a.R, eps, c.density, so);
    ok = rep.flag("gap_decreasing");
  } else {
    throw Error(ErrorKind::InvalidInput, "unknown sweep kind " + a.kind);
  }
  Json j = header(g, "sweep-scaling", c);
  j["kind"] = a.kind;
  j["report"] = to_json(rep);
  write_json(out_path(g, "sweep_" + a.kind + ".json"), j);
  write_csv(out_path(g, "sweep_" + a.kind + ".csv"), rep.columns, rep.rows);
  return verdict(g, ok, "sweep flags");
}

// ---------------------------------------------------------------- gamma-limit

struct GammaArgs {
  double s = 0.75;
  bool no_minimize = false;
  bool compactness = false;
  bool s_sweep = false;
};

int run_gamma(const Global& g, const GammaArgs& a) {
  Config c = load(g);
  RecoveryOptions ro;
  ro.assembly = c.assembly;
  ro.minimize = c.minimize_options(g.workers);
  ro.s = a.s;
  ro.run_minimizer = !a.no_minimize;
  ro.workers = g.workers;
  TargetMeasure mu = c.target();
  std::vector<RecoveryState> states;
  GammaLimitReport rep = recovery_sequence(c.domain, mu, c.regime, nullptr, Mat2::Identity(), c.lattice,
                                           c.density, ro, a.compactness ? &states : nullptr);
  Json j = header(g, "gamma-limit", c);
  j["s"] = a.s;
  j["report"] = to_json(rep);
  bool ok = rep.sandwich && rep.gap_decreasing;
  j["flags"] = {{"final_gap_above_target", rep.final_gap > c.tolerances.gap_target},
                {"recovery_gap_decreasing", rep.recovery_gap_decreasing}};
  if (a.compactness) {
    std::vector<const AssembledBody*> bodies;
    std::vector<const Configuration*> configs;
    Json comp = Json::array();
    for (std::size_t i = 0; i < states.size(); ++i) {
      bodies.push_back(&states[i].body);
      configs.push_back(&states[i].minimized);
      LimitDisplacement d = compactness_diagnostic(states[i].body, states[i].recovery, c.regime, i, mu, c.density);
      comp.push_back(to_json(d));
    }
    j["compactness"] = comp;
    j["liminf"] = to_json(liminf_diagnostic(bodies, configs, c.regime, c.density));
  }
  if (a.s_sweep) {
    Json sw = Json::array();
    RecoveryOptions so = ro;
    so.run_minimizer = false;
    for (double s : {0.6, 0.75, 0.9}) {
      so.s = s;
      GammaLimitReport r = recovery_sequence(c.domain, mu, c.regime, nullptr, Mat2::Identity(), c.lattice, c.density, so);
      Json row;
      row["s"] = s;
      row["recovery_total"] = Json::array();
      row["gap"] = Json::array();
      for (const auto& x : r.rows) {
        row["recovery_total"].push_back(x.E_total);
        row["gap"].push_back(x.gap);
      }
      sw.push_back(row);
    }
    j["s_sweep"] = sw;
  }
  write_json(out_path(g, "gamma_limit.json"), j);
  std::vector<std::vector<double>> rows;
  for (const auto& r : rep.rows)
    rows.push_back({r.eps, r.n_eps, r.h2, r.E_self, r.E_elastic, r.E_total, r.M_total, r.lower, r.gap, r.minimized_gap});
  write_csv(out_path(g, "gamma_limit.csv"),
            {"eps", "n_eps", "h2", "recovery_self", "recovery_elastic", "recovery_total", "minimized_total", "lower",
             "recovery_gap", "minimized_gap"},
            rows);
  return verdict(g, ok, "sandwich or decreasing gap");
}

// ---------------------------------------------------------------- diagnose

int run_diagnose(const Global& g, const std::vector<int>& criteria) {
  AcceptanceOptions opt;
  opt.seed = g.seed;
  opt.workers = g.workers;
  auto results = run_acceptance(opt, criteria);
  Json all = Json::array();
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%s\n", summary_line(r).c_str());
    std::fflush(stdout);
    all.push_back(to_json(r));
    ok = ok && r.pass;
  }
  write_json(out_path(g, "acceptance.json"), all);
  return verdict(g, ok, "acceptance criteria");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dislocation bodies: cell problems, self-energy, assembly, minimization and limit experiments"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--config", g.config, "JSON configuration file");
  app.add_option("--out", g.out, "output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "random seed")->capture_default_str();
  app.add_option("--workers", g.workers, "worker threads")->check(CLI::PositiveNumber)->capture_default_str();
  app.add_flag("--check", g.check, "exit with 4 when the run's checks fail");
  app.fallthrough();

  std::function<int()> action;

  CellArgs ca;
  auto* cell = app.add_subcommand("cell", "cell problem over a delta ladder");
  cell->add_option("--v", ca.v, "Burgers vector x,y")->delimiter(',')->expected(2);
  cell->add_option("--delta", ca.deltas, "delta ladder")->delimiter(',');
  cell->add_option("--cells-per-decade", ca.cells_per_decade);
  cell->add_option("--n-theta", ca.n_theta);
  cell->callback([&] { action = [&] { return run_cell(g, ca); }; });

  std::string vectors = "1,0;0,1;1,1;2,-1";
  int samples = 1000;
  auto* sig = app.add_subcommand("sigma", "relaxed self-energy of lattice vectors");
  sig->add_option("--vectors", vectors, "semicolon-separated x,y pairs")->capture_default_str();
  sig->add_option("--samples", samples, "property suite size")->capture_default_str();
  sig->callback([&] { action = [&] { return run_sigma(g, vectors, samples); }; });

  auto* build = app.add_subcommand("build", "assemble a multi-dislocation body");
  build->callback([&] { action = [&] { return run_build(g); }; });

  MinimizeArgs ma;
  auto* mini = app.add_subcommand("minimize", "minimize the elastic energy on a body");
  auto* body_opt = mini->add_option("--body", ma.body, "artifact prefix written by build (<prefix>.mesh, <prefix>.q)");
  mini->add_option("--model", ma.model, "single-dislocation Burgers vector x,y")
      ->delimiter(',')
      ->expected(2)
      ->excludes(body_opt);
  mini->add_option("--r-in", ma.r_in, "inner radius (default |v|)");
  mini->add_option("--r-out", ma.r_out, "outer radius")->capture_default_str();
  mini->callback([&] { action = [&] { return run_minimize(g, ma); }; });

  SweepArgs sa;
  auto* sweep = app.add_subcommand("sweep-scaling", "single-dislocation sweeps");
  sweep->add_option("--kind", sa.kind)
      ->check(CLI::IsMember({"scaling", "rigidity", "linearization", "cell-convergence"}))
      ->capture_default_str();
  sweep->add_option("--magnitudes", sa.magnitudes)->delimiter(',');
  sweep->add_option("--eps", sa.eps, "eps ladder (default: regime.eps)")->delimiter(',');
  sweep->add_option("--v", sa.v, "Burgers direction x,y")->delimiter(',')->expected(2);
  sweep->add_option("--R", sa.R)->capture_default_str();
  sweep->add_option("--delta", sa.delta)->capture_default_str();
  sweep->add_option("--trials", sa.trials)->capture_default_str();
  sweep->callback([&] { action = [&] { return run_sweep(g, sa); }; });

  GammaArgs ga;
  auto* gamma = app.add_subcommand("gamma-limit", "recovery sequence, minimized energies and lower bounds");
  gamma->add_option("--s", ga.s, "near-core exponent")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  gamma->add_flag("--no-minimize", ga.no_minimize);
  gamma->add_flag("--compactness", ga.compactness, "add compactness and lim-inf diagnostics");
  gamma->add_flag("--s-sweep", ga.s_sweep, "recovery energies for s in {0.6, 0.75, 0.9}");
  gamma->callback([&] { action = [&] { return run_gamma(g, ga); }; });

  std::vector<int> criteria;
  auto* diag = app.add_subcommand("diagnose", "acceptance criteria 1-11");
  diag->add_option("--criteria", criteria, "subset of criterion ids")->delimiter(',');
  diag->callback([&] { action = [&] { return run_diagnose(g, criteria); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kInvalidConfig;
  }
  try {
    return action();
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "invalid config: %s\n", e.what());
    return kInvalidConfig;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.kind() == ErrorKind::InvalidInput ? kInvalidConfig : kNumerical;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kNumerical;
  }
}
