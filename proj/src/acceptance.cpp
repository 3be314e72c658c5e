#include "dislo/acceptance.hpp"

#include "dislo/geometry.hpp"

#include <chrono>
#include <cmath>
#include <random>
#include <sstream>

namespace dislo {

namespace {

// pinned tolerances
constexpr double kMetricTol = 1e-12;
constexpr double kCirculationTol = 1e-8;
constexpr double kDeviationBound = 0.25;
constexpr double kIzeroTol = 0.03;
constexpr double kRefinementFactor = 0.5;
constexpr double kSigmaExactTol = 1e-12;
constexpr double kSigmaSuiteTol = 1e-7;
constexpr double kDoublingTol = 1e-9;
constexpr double kScalingResidual = 0.10;
constexpr double kScalingKappa = 0.15;
constexpr double kRigiditySpread = 2.0;
constexpr double kAssemblyCirculation = 1e-7;
constexpr double kDistortionSpread = 2.0;
constexpr double kBurgersFinal = 0.05;
constexpr double kGammaTarget = 0.20;

EnergyDensity reference_density() { return EnergyDensity::isotropic(1.0, 1.0); }  // mu = 1, nu = 1/4

void check(CriterionResult& r, const std::string& name, bool ok) { r.checks.emplace_back(name, ok); }

std::vector<double> ladder_deltas() { return {1e-2, 3e-3, 1e-3, 3e-4, 1e-4}; }

// ---------------------------------------------------------------- 1

void frame_metric(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "frame/metric consistency";
  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> U01(0.0, 1.0);
  const double R = 1.0;
  double worst_metric = 0.0, worst_circ = 0.0;
  Json per = Json::array();
  for (double m : {1e-3, 1e-2, 1e-1}) {
    double ang = kTwoPi * U01(rng);
    ModelManifold M = ModelManifold::make(m * Vec2(std::cos(ang), std::sin(ang)), R);
    double wm = 0.0;
    for (int k = 0; k < 10000; ++k) {
      double rr = m + (R - m) * U01(rng), phi = kTwoPi * U01(rng);
      Mat2 q = frame_at(M, rr, phi);
      wm = std::max(wm, (q.transpose() * q - metric_at(M, rr, phi)).norm());
    }
    // random polygons: some enclose the core (possibly twice), some do not
    double wc = 0.0;
    int enclosing = 0;
    for (int k = 0; k < 50; ++k) {
      Vec2 c = (k % 3 == 2) ? Vec2(0.5 + 0.3 * U01(rng), 0.5 * U01(rng) - 0.25)
                            : Vec2(0.2 * (U01(rng) - 0.5) * m, 0.2 * (U01(rng) - 0.5) * m);
      double rad = (k % 3 == 2) ? 0.1 + 0.2 * U01(rng) : 2.0 * m + (0.9 - 2.0 * m) * U01(rng);
      int turns = (k % 5 == 4) ? 2 : 1;
      int sides = 5 + static_cast<int>(8 * U01(rng));
      std::vector<Vec2> pts;
      for (int s = 0; s < sides * turns; ++s) {
        double t = kTwoPi * s / sides + 0.3 * U01(rng) / sides;
        double rs = rad * (0.8 + 0.2 * U01(rng)) * (1.0 + 0.05 * (s / sides));
        pts.push_back(c + rs * Vec2(std::cos(t), std::sin(t)));
      }
      Vec2 circ = Vec2::Zero();
      double wind = 0.0;
      for (std::size_t s = 0; s < pts.size(); ++s)
        circ += integrate_frame_segment(M, pts[s], pts[(s + 1) % pts.size()], &wind);
      double w = std::round(wind / kTwoPi);
      if (w != 0.0) ++enclosing;
      wc = std::max(wc, (circ - w * M.burgers).norm() / m);
    }
    worst_metric = std::max(worst_metric, wm);
    worst_circ = std::max(worst_circ, wc);
    per.push_back({{"magnitude", m}, {"metric_error", wm}, {"circulation_error_over_v", wc}, {"enclosing_loops", enclosing}});
  }
  r.report["sweep"] = per;
  r.report["metric_error"] = worst_metric;
  r.report["circulation_error_over_v"] = worst_circ;
  check(r, "metric <= 1e-12", worst_metric <= kMetricTol);
  check(r, "circulation <= 1e-8|v|", worst_circ <= kCirculationTol);
}

// ---------------------------------------------------------------- 2

void deviation_law(CriterionResult& r) {
  r.title = "deviation law";
  const double R = 1.0;
  double sup = 0.0;
  Json per = Json::array();
  for (double m : {1e-3, 1e-2, 1e-1}) {
    ModelManifold M = ModelManifold::make(m * Vec2::UnitX(), R);
    double s = 0.0;
    const int nr = 200, np = 128;
    for (int i = 0; i <= nr; ++i) {
      double rr = m * std::pow(R / m, static_cast<double>(i) / nr);
      double dist = core_distance_bounds(M, rr).second;
      for (int j = 0; j < np; ++j) s = std::max(s, dist * chart_deviation(M, rr, kTwoPi * j / np) / m);
    }
    sup = std::max(sup, s);
    per.push_back({{"magnitude", m}, {"sup", s}});
  }
  r.report["sweep"] = per;
  r.report["sup"] = sup;
  check(r, "sup r|dZ - Q|/|v| <= 0.25", sup <= kDeviationBound);
}

// ---------------------------------------------------------------- 3

void cell_oracle(CriterionResult& r) {
  r.title = "cell problem vs closed form";
  QuadraticForm qf = hessian_at_identity(reference_density());
  const Vec2 v = Vec2::UnitX();
  double oracle = singular_strain(v, qf).prelog_factor(qf);
  auto run = [&](const CellResolution& res) {
    std::vector<double> vals;
    for (double d : ladder_deltas()) vals.push_back(solve_cell(v, d, qf, res).value_delta);
    return std::make_pair(vals, extrapolate_izero(ladder_deltas(), vals));
  };
  auto [base_vals, base] = run(CellResolution{});
  CellResolution fine{2 * CellResolution{}.cells_per_decade, 2 * CellResolution{}.n_theta};
  auto [fine_vals, refined] = run(fine);
  double err = std::abs(base.izero - oracle) / oracle;
  double err_fine = std::abs(refined.izero - oracle) / oracle;
  // discretization component: the per-delta change under refinement, then under a second refinement
  CellResolution finer{4 * CellResolution{}.cells_per_decade, 4 * CellResolution{}.n_theta};
  double d1 = 0.0, d2 = 0.0;
  for (std::size_t i = 0; i < ladder_deltas().size(); ++i) {
    double vf2 = solve_cell(v, ladder_deltas()[i], qf, finer).value_delta;
    d1 = std::max(d1, std::abs(base_vals[i] - vf2));
    d2 = std::max(d2, std::abs(fine_vals[i] - vf2));
  }
  r.report["oracle"] = oracle;
  r.report["deltas"] = ladder_deltas();
  r.report["values"] = base_vals;
  r.report["values_refined"] = fine_vals;
  r.report["izero"] = base.izero;
  r.report["izero_refined"] = refined.izero;
  r.report["relative_error"] = err;
  r.report["relative_error_refined"] = err_fine;
  r.report["discretization_error"] = d1;
  r.report["discretization_error_refined"] = d2;
  check(r, "I0 within 3% of oracle", err <= kIzeroTol);
  check(r, "refinement halves the discretization error", d2 <= kRefinementFactor * d1);
}

// ---------------------------------------------------------------- 4

void self_energy(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "self-energy program";
  QuadraticForm qf = hessian_at_identity(reference_density());
  Mat2 iq = isotropic_prelog(qf, Vec2::UnitX()) * Mat2::Identity();
  DislocationLattice l;
  l.cutoff_K = derive_cutoff(l, iq);
  SelfEnergyResult s = sigma(l, iq, Vec2::UnitX());
  double i0 = quad(iq, Vec2::UnitX());
  bool single = s.decomposition.size() == 1 && s.decomposition[0].first.v.isApprox(Vec2::UnitX());
  SigmaPropertyReport props = verify_sigma_properties(l, iq, 1000, opt.seed);
  std::vector<Vec2> probes{Vec2(1, 0), Vec2(0, 1), Vec2(1, 1), Vec2(2, -1), Vec2(0.3, 0.7), Vec2(-1.5, 2.5)};
  double doubling = cutoff_doubling_gap(l, iq, probes);
  r.report["cutoff"] = l.cutoff_K;
  r.report["sigma"] = to_json(s);
  r.report["izero"] = i0;
  r.report["properties"] = to_json(props);
  r.report["doubling_gap"] = doubling;
  check(r, "Sigma(e1) = I0(e1)", std::abs(s.value - i0) <= kSigmaExactTol * i0);
  check(r, "single generator", single);
  check(r, "homogeneity/convexity suite", props.ok() && props.max_homogeneity_error <= kSigmaSuiteTol &&
                                              props.max_convexity_excess <= kSigmaSuiteTol);
  check(r, "cutoff doubling", doubling <= kDoublingTol);
}

// ---------------------------------------------------------------- 5, 6, 10

void scaling(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "single-dislocation energy scaling";
  SweepOptions so;
  so.workers = opt.workers;
  ScalingReport rep = single_scaling_sweep(Vec2::UnitX(), {1e-3, 3e-3, 1e-2}, 1.0, reference_density(), so);
  r.report = to_json(rep);
  check(r, "fit residual <= 10%", rep.get("residual") <= kScalingResidual);
  check(r, "kappa within 15% of I0", rep.get("kappa_vs_izero") <= kScalingKappa);
  if (rep.get("residual_proportional") > kScalingResidual) r.flags.push_back("proportional fit misfit above 10%");
}

void rigidity(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "rigidity probe";
  SweepOptions so;
  so.workers = opt.workers;
  ScalingReport rep =
      rigidity_sweep(Vec2::UnitX(), {1e-3, 3e-3, 1e-2}, 1.0, 1e-2, reference_density(), 200, opt.seed, so);
  r.report = to_json(rep);
  check(r, "stable within 2x across the sweep", rep.get("sweep_spread") <= kRigiditySpread);
  check(r, "stable within 2x under refinement", rep.get("refinement_spread") <= kRigiditySpread);
}

void linearization(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "linearization consistency";
  SweepOptions so;
  so.workers = opt.workers;
  ScalingReport rep = linearization_sweep(Vec2::UnitX(), {1e-2, 1e-3, 1e-4}, 1.0, reference_density(), so);
  r.report = to_json(rep);
  check(r, "relative gap decreasing", rep.flag("gap_decreasing"));
}

// ---------------------------------------------------------------- 7, 8

struct AssemblyLadder {
  TargetMeasure mu = TargetMeasure::uniform(Vec2::UnitX());
  Rect omega;
  std::vector<AssembledBody> bodies;
};

AssemblyLadder assembly_ladder(const AcceptanceOptions& opt) {
  AssemblyLadder L;
  QuadraticForm qf = hessian_at_identity(reference_density());
  Mat2 iq = isotropic_prelog(qf, Vec2::UnitX()) * Mat2::Identity();
  DislocationLattice l;
  l.cutoff_K = derive_cutoff(l, iq);
  AssemblyResolution res;
  res.workers = opt.workers;
  for (double n : {25.0, 100.0, 400.0})
    L.bodies.push_back(build_implant(approximate_measure(L.mu, L.omega, n, 1e-3, l, iq), res));
  return L;
}

void assembly(CriterionResult& r, const AssemblyLadder& L) {
  r.title = "multi-dislocation assembly";
  Json rows = Json::array();
  double circ = 0.0, det = 1e300, cmin = 1e300, cmax = 0.0;
  for (const auto& b : L.bodies) {
    DeviationReport d = deviation_report(b);
    Json o = summary_json(b);
    o["deviation"] = to_json(d);
    rows.push_back(o);
    circ = std::max(circ, b.max_circulation_error);
    det = std::min(det, b.min_det);
    cmin = std::min(cmin, d.integral_over_h2);
    cmax = std::max(cmax, d.integral_over_h2);
  }
  r.report["bodies"] = rows;
  r.report["max_circulation_error"] = circ;
  r.report["min_det"] = det;
  r.report["distortion_spread"] = cmax / cmin;
  check(r, "per-core circulation <= 1e-7", circ <= kAssemblyCirculation);
  check(r, "det Q > 0", det > 0.0);
  check(r, "distortion constant within 2x", cmax <= kDistortionSpread * cmin);
}

void burgers(CriterionResult& r, const AssemblyLadder& L) {
  r.title = "Burgers convergence";
  std::vector<const AssembledBody*> ptr;
  for (const auto& b : L.bodies) ptr.push_back(&b);
  BurgersConvergence bc = burgers_convergence_check(ptr, L.mu, standard_test_fields(L.omega));
  r.report = to_json(bc);
  bool mono = true;
  for (bool m : bc.monotone) mono = mono && m;
  check(r, "gaps decrease for each field", mono);
  check(r, "final gaps <= 5%", bc.final_max_gap <= kBurgersFinal);
}

// ---------------------------------------------------------------- 9

void gamma_limit(CriterionResult& r, const AcceptanceOptions& opt) {
  r.title = "Gamma-limit sandwich";
  RegimeParams reg;
  reg.eps = {1e-2, 3e-3, 1e-3};
  reg.rule = NRule::Log;
  Rect omega{Vec2::Zero(), Vec2(3.0, 3.0)};
  RecoveryOptions ro;
  ro.workers = opt.workers;
  GammaLimitReport rep = recovery_sequence(omega, TargetMeasure::uniform(Vec2::UnitX()), reg, nullptr,
                                           Mat2::Identity(), DislocationLattice{}, reference_density(), ro);
  r.report = to_json(rep);
  check(r, "lower <= measured <= recovery per eps", rep.sandwich);
  check(r, "gap to the limit energy decreasing", rep.gap_decreasing);
  if (rep.final_gap > kGammaTarget)
    r.flags.push_back("final gap " + std::to_string(rep.final_gap) + " above the 20% target");
  if (!rep.recovery_gap_decreasing) r.flags.push_back("recovery-energy gap not monotone");
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opt) {
  CriterionResult r;
  r.id = id;
  auto t0 = std::chrono::steady_clock::now();
  switch (id) {
    case 1: frame_metric(r, opt); break;
    case 2: deviation_law(r); break;
    case 3: cell_oracle(r); break;
    case 4: self_energy(r, opt); break;
    case 5: scaling(r, opt); break;
    case 6: rigidity(r, opt); break;
    case 7: assembly(r, assembly_ladder(opt)); break;
    case 8: burgers(r, assembly_ladder(opt)); break;
    case 9: gamma_limit(r, opt); break;
    case 10: linearization(r, opt); break;
    default: throw Error(ErrorKind::InvalidInput, "no criterion " + std::to_string(id));
  }
  r.pass = true;
  for (const auto& c : r.checks) r.pass = r.pass && c.second;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

CriterionResult determinism_check(const std::map<int, std::string>& first, const AcceptanceOptions& opt) {
  CriterionResult r;
  r.id = 11;
  r.title = "determinism";
  auto t0 = std::chrono::steady_clock::now();
  Json per;
  for (int id = 3; id <= 9; ++id) {
    auto it = first.find(id);
    if (it == first.end()) throw Error(ErrorKind::InvalidInput, "no first-run report for criterion " + std::to_string(id));
    std::string again = run_criterion(id, opt).report.dump(2);
    bool same = again == it->second;
    per[std::to_string(id)] = same;
    check(r, "criterion " + std::to_string(id) + " identical", same);
  }
  r.report["identical"] = per;
  r.pass = true;
  for (const auto& c : r.checks) r.pass = r.pass && c.second;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, const std::vector<int>& only) {
  auto wanted = [&](int id) { return only.empty() || std::find(only.begin(), only.end(), id) != only.end(); };
  std::vector<CriterionResult> out;
  std::map<int, std::string> dumps;
  std::unique_ptr<AssemblyLadder> ladder;
  for (int id = 1; id <= 10; ++id) {
    bool need = wanted(id) || (wanted(11) && id >= 3 && id <= 9);
    if (!need) continue;
    CriterionResult r;
    if (id == 7 || id == 8) {
      // one ladder for both
      r.id = id;
      auto t0 = std::chrono::steady_clock::now();
      if (!ladder) ladder = std::make_unique<AssemblyLadder>(assembly_ladder(opt));
      if (id == 7) assembly(r, *ladder);
      else burgers(r, *ladder);
      if (id == 8) ladder.reset();
      r.pass = true;
      for (const auto& c : r.checks) r.pass = r.pass && c.second;
      r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    } else {
      r = run_criterion(id, opt);
    }
    dumps[id] = r.report.dump(2);
    if (wanted(id)) out.push_back(std::move(r));
  }
  if (wanted(11)) out.push_back(determinism_check(dumps, opt));
  return out;
}

std::string summary_line(const CriterionResult& r) {
  std::ostringstream s;
  s << "criterion " << r.id << " (" << r.title << "): " << (r.pass ? "PASS" : "FAIL");
  for (const auto& [name, ok] : r.checks)
    if (!ok) s << " [failed: " << name << "]";
  for (const auto& f : r.flags) s << " [flag: " << f << "]";
  s.setf(std::ios::fixed);
  s.precision(1);
  s << " (" << r.seconds << " s)";
  return s.str();
}

Json to_json(const CriterionResult& r) {
  Json j;
  j["id"] = r.id;
  j["title"] = r.title;
  j["pass"] = r.pass;
  Json c = Json::array();
  for (const auto& [name, ok] : r.checks) c.push_back({{"check", name}, {"pass", ok}});
  j["checks"] = c;
  j["flags"] = r.flags;
  j["report"] = r.report;
  return j;
}

}  // namespace dislo
