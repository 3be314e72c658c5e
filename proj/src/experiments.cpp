#include "dislo/experiments.hpp"

#include "dislo/fem.hpp"
#include "dislo/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <tuple>

namespace dislo {

namespace {

constexpr double kGl4x[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGl4w[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

std::string fmt(double x) {
  std::ostringstream s;
  s << x;
  return s.str();
}

// Least squares y = a + b x; returns (a, b, max relative misfit).
std::tuple<double, double, double> affine_fit(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  double det = n * sxx - sx * sx;
  double b = det != 0.0 ? (n * sxy - sx * sy) / det : 0.0;
  double a = (sy - b * sx) / n;
  double res = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] != 0.0) res = std::max(res, std::abs(a + b * x[i] - y[i]) / std::abs(y[i]));
  return {a, b, res};
}

bool strictly_decreasing(const std::vector<double>& v) {
  for (std::size_t i = 1; i < v.size(); ++i)
    if (!(v[i] < v[i - 1])) return false;
  return true;
}

Mat2 self_energy_form(const QuadraticForm& qf) {
  if (!qf.isotropic) throw Error(ErrorKind::Unsupported, "self-energy form needs an isotropic density");
  return isotropic_prelog(qf, Vec2::UnitX()) * Mat2::Identity();
}

Body single_body(const Vec2& v, double r_in, double R, const CellResolution& res) {
  return model_body(v, Vec2::Zero(), r_in, R, res.cells_per_decade, res.n_theta);
}

Mesh rectangle_mesh(const Rect& omega, int nx, int ny) {
  Mesh m;
  double hx = omega.width() / nx, hy = omega.height() / ny;
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) m.vertices.push_back(omega.lo + Vec2(i * hx, j * hy));
  auto id = [nx](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      m.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      m.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  m.core.assign(m.triangles.size(), 0);
  m.site.assign(m.triangles.size(), -1);
  return m;
}

}  // namespace

// ---------------------------------------------------------------- regime

double RegimeParams::n_eps(std::size_t i) const {
  if (i >= eps.size()) throw Error(ErrorKind::InvalidInput, "ladder index out of range");
  double L = std::log(1.0 / eps[i]);
  switch (rule) {
    case NRule::Constant: return constant;
    case NRule::Log: return constant * L;
    case NRule::LogPower: return constant * std::pow(L, power);
    case NRule::Table: return table.at(i);
  }
  return constant;
}

double RegimeParams::h2(std::size_t i) const {
  double n = n_eps(i), e = eps[i];
  return std::max(n * n * e * e, n * e * e * std::log(1.0 / e));
}

std::string RegimeParams::label(std::size_t i) const {
  double ratio = n_eps(i) / std::log(1.0 / eps[i]);
  if (std::abs(ratio - 1.0) <= 1e-9) return "critical";
  return ratio < 1.0 ? "subcritical" : "supercritical";
}

void RegimeParams::validate() const {
  if (eps.size() < 3 || eps.size() > 5)
    throw Error(ErrorKind::InvalidInput, "eps ladder must have between 3 and 5 points");
  for (double e : eps)
    if (!(e > 0.0 && e < 1.0)) throw Error(ErrorKind::InvalidInput, "eps values must lie in (0, 1)");
  if (!strictly_decreasing(eps)) throw Error(ErrorKind::InvalidInput, "eps ladder must be strictly decreasing");
  if (rule == NRule::Table && table.size() != eps.size())
    throw Error(ErrorKind::InvalidInput, "n_eps table length must match the eps ladder");
  if (rule == NRule::LogPower && !(power > 0.0)) throw Error(ErrorKind::InvalidInput, "log power must be positive");
  if (rule != NRule::Table && !(constant > 0.0))
    throw Error(ErrorKind::InvalidInput, "n_eps multiplier must be positive");
  for (std::size_t i = 0; i < eps.size(); ++i)
    if (!(n_eps(i) > 0.0)) throw Error(ErrorKind::InvalidInput, "n_eps must be positive");
}

bool RegimeParams::asymptotics_consistent() const {
  std::vector<double> ne, ln;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    double n = n_eps(i);
    ne.push_back(n * eps[i]);
    ln.push_back(std::log(std::max(n, 1.0)) / std::log(1.0 / eps[i]));
  }
  if (!strictly_decreasing(ne)) return false;
  for (std::size_t i = 1; i < ln.size(); ++i)
    if (ln[i] > ln[i - 1] + 1e-12) return false;
  return true;
}

// ---------------------------------------------------------------- reports

double ScalingReport::get(const std::string& key) const {
  for (const auto& [k, v] : fit)
    if (k == key) return v;
  throw Error(ErrorKind::InvalidInput, "report has no entry " + key);
}

bool ScalingReport::flag(const std::string& key) const {
  for (const auto& [k, v] : flags)
    if (k == key) return v;
  throw Error(ErrorKind::InvalidInput, "report has no flag " + key);
}

// ---------------------------------------------------------------- single dislocation sweeps

ScalingReport single_scaling_sweep(const Vec2& direction, const std::vector<double>& magnitudes, double R,
                                   const EnergyDensity& w, const SweepOptions& opt) {
  ScalingReport rep;
  rep.name = "single_scaling";
  rep.columns = {"magnitude", "log_ratio", "energy", "energy_over_v2", "identity_energy", "iterations"};
  if (magnitudes.empty()) throw Error(ErrorKind::InvalidInput, "no magnitudes");
  const bool zero = direction.norm() == 0.0;
  Vec2 dir = zero ? Vec2(Vec2::Zero()) : Vec2(direction / direction.norm());
  MinimizeOptions mo = opt.minimize;
  mo.workers = opt.workers;
  std::vector<double> L, y;
  double max_energy = 0.0;
  for (double m : magnitudes) {
    if (!zero && !(R > 10.0 * m)) throw Error(ErrorKind::InvalidInput, "R must exceed 10|v| for every magnitude");
    Vec2 v = m * dir;
    double r_in = zero ? 1e-3 * R : m;
    Body body = single_body(v, r_in, R, opt.resolution);
    Configuration z = identity_configuration(body);
    double ez = energy(body, z, w, opt.workers).total;
    MinimizeResult res = minimize(body, w, z, mo);
    double e = res.energy.total;
    max_energy = std::max(max_energy, e);
    double lr = std::log(R / r_in);
    double ev2 = zero ? 0.0 : e / (m * m);
    rep.rows.push_back({m, lr, e, ev2, ez, static_cast<double>(res.iterations)});
    L.push_back(lr);
    y.push_back(ev2);
  }
  QuadraticForm qf = hessian_at_identity(w);
  double izero = zero ? 0.0 : isotropic_prelog(qf, dir);
  rep.fit.emplace_back("izero", izero);
  if (zero || magnitudes.size() < 2) {
    rep.fit.emplace_back("max_energy", max_energy);
    rep.flags.emplace_back("fit_skipped", true);
    rep.flags.emplace_back("poor_fit", false);
    return rep;
  }
  auto [c, kappa, residual] = affine_fit(L, y);
  double num = 0, den = 0;
  for (std::size_t i = 0; i < L.size(); ++i) {
    num += L[i] * y[i];
    den += L[i] * L[i];
  }
  double kprop = num / den, rprop = 0.0;
  for (std::size_t i = 0; i < L.size(); ++i) rprop = std::max(rprop, std::abs(kprop * L[i] - y[i]) / y[i]);
  rep.fit.emplace_back("kappa", kappa);
  rep.fit.emplace_back("intercept", c);
  rep.fit.emplace_back("residual", residual);
  rep.fit.emplace_back("kappa_vs_izero", std::abs(kappa - izero) / izero);
  rep.fit.emplace_back("kappa_proportional", kprop);
  rep.fit.emplace_back("residual_proportional", rprop);
  rep.fit.emplace_back("max_energy", max_energy);
  rep.flags.emplace_back("fit_skipped", false);
  rep.flags.emplace_back("poor_fit", residual > 0.2);
  return rep;
}

ScalingReport cell_convergence_sweep(const Vec2& v, double delta, double R, const std::vector<double>& eps_ladder,
                                     const EnergyDensity& w, const SweepOptions& opt) {
  ScalingReport rep;
  rep.name = "cell_convergence";
  rep.columns = {"eps", "minimized", "ansatz", "cell_quadratic", "gap", "upper_excess_constant"};
  if (eps_ladder.size() < 3) throw Error(ErrorKind::InvalidInput, "ladder needs at least 3 points");
  QuadraticForm qf = hessian_at_identity(w);
  double idelta = solve_cell(v, delta, qf, opt.resolution).value_delta;
  double v2 = v.squaredNorm();
  MinimizeOptions mo = opt.minimize;
  mo.workers = opt.workers;
  std::vector<double> gaps;
  double cmax = 0.0;
  bool ansatz_above = true;
  for (double eps : eps_ladder) {
    if (!(delta * R >= eps * v.norm()))
      throw Error(ErrorKind::InvalidInput, "delta R must be at least eps|v| at eps = " + fmt(eps));
    Body body = cell_body(v, eps, delta, R, opt.resolution);
    Configuration fa = singular_ansatz(body, v, eps, qf.poisson_ratio(), Vec2::Zero());
    double ansatz = nonlinear_cell_energy(body, v, eps, delta, R, w, fa);
    MinimizeResult res = minimize(body, w, fa, mo);
    double mini = nonlinear_cell_energy(body, v, eps, delta, R, w, res.f);
    double gap = mini - idelta;
    double c = v2 > 0.0 ? (ansatz - idelta) * std::log(1.0 / delta) / v2 : 0.0;
    cmax = std::max(cmax, c);
    ansatz_above = ansatz_above && ansatz >= mini;
    gaps.push_back(std::abs(gap));
    rep.rows.push_back({eps, mini, ansatz, idelta, gap, c});
  }
  bool decreasing = strictly_decreasing(gaps);
  double final_rel = v2 > 0.0 ? gaps.back() / v2 : gaps.back();
  rep.fit.emplace_back("cell_quadratic", idelta);
  rep.fit.emplace_back("final_gap_over_v2", final_rel);
  rep.fit.emplace_back("upper_excess_constant", cmax);
  rep.flags.emplace_back("gap_decreasing", decreasing);
  rep.flags.emplace_back("ansatz_above_minimum", ansatz_above);
  rep.flags.emplace_back("final_gap_within_5pct", final_rel <= 0.05);
  return rep;
}

ScalingReport rigidity_sweep(const Vec2& direction, const std::vector<double>& magnitudes, double R, double delta,
                             const EnergyDensity& w, int trials, std::uint64_t seed, const SweepOptions& opt) {
  ScalingReport rep;
  rep.name = "rigidity";
  rep.columns = {"magnitude", "worst_ratio", "minimizer_ratio", "worst_ratio_refined", "minimizer_ratio_refined"};
  if (direction.norm() == 0.0) throw Error(ErrorKind::InvalidInput, "direction must be nonzero");
  Vec2 dir = direction / direction.norm();
  MinimizeOptions mo = opt.minimize;
  mo.workers = opt.workers;
  CellResolution fine{2 * opt.resolution.cells_per_decade, 2 * opt.resolution.n_theta};
  std::vector<double> worst, worst_fine;
  for (double m : magnitudes) {
    if (!(delta * R >= m && delta < 0.1 && R > 10.0 * m))
      throw Error(ErrorKind::InvalidInput, "rigidity probe needs delta R >= |v|, delta < 1/10, R > 10|v|");
    std::vector<double> row{m};
    for (const CellResolution* res : std::initializer_list<const CellResolution*>{&opt.resolution, &fine}) {
      Body body = single_body(m * dir, delta * R, R, *res);
      FjmProbe probe = uniform_fjm_probe(body, trials, seed, 1.0, opt.workers);
      MinimizeResult mr = minimize(body, w, identity_configuration(body), mo);
      double rmin = best_rotation(body, mr.f, opt.workers).ratio;
      double wr = std::max(probe.worst_ratio, rmin);
      row.push_back(wr);
      row.push_back(rmin);
      (res == &opt.resolution ? worst : worst_fine).push_back(wr);
    }
    rep.rows.push_back(row);
  }
  auto spread = [](const std::vector<double>& v) {
    return *std::max_element(v.begin(), v.end()) / *std::min_element(v.begin(), v.end());
  };
  double sweep_spread = std::max(spread(worst), spread(worst_fine));
  double refine_spread = 1.0;
  for (std::size_t i = 0; i < worst.size(); ++i)
    refine_spread = std::max(refine_spread, std::max(worst[i], worst_fine[i]) / std::min(worst[i], worst_fine[i]));
  rep.fit.emplace_back("worst_ratio", *std::max_element(worst.begin(), worst.end()));
  rep.fit.emplace_back("sweep_spread", sweep_spread);
  rep.fit.emplace_back("refinement_spread", refine_spread);
  rep.flags.emplace_back("stable_sweep", sweep_spread <= 2.0);
  rep.flags.emplace_back("stable_refinement", refine_spread <= 2.0);
  return rep;
}

ScalingReport linearization_sweep(const Vec2& v, const std::vector<double>& eps_ladder, double R,
                                  const EnergyDensity& w, const SweepOptions& opt) {
  ScalingReport rep;
  rep.name = "linearization";
  rep.columns = {"eps", "nonlinear", "quadratic", "relative_gap"};
  QuadraticForm qf = hessian_at_identity(w);
  MinimizeOptions mo = opt.minimize;
  mo.workers = opt.workers;
  std::vector<double> gaps;
  for (double eps : eps_ladder) {
    Vec2 ev = eps * v;
    if (!(R > 10.0 * ev.norm())) throw Error(ErrorKind::InvalidInput, "R must exceed 10 eps|v|");
    Body body = single_body(ev, ev.norm(), R, opt.resolution);
    MinimizeResult mr = minimize(body, w, identity_configuration(body), mo);
    RigidityReport rr = best_rotation(body, mr.f, opt.workers);
    double quad = 0.0;
    for (std::size_t t = 0; t < body.size(); ++t) {
      Mat2 beta = rr.U.transpose() * triangle_gradient(body.mesh, t, mr.f) - body.Q[t];
      quad += qf(beta) * body.mesh.area(t);
    }
    double e = mr.energy.total;
    double gap = e > 0.0 ? std::abs(e - quad) / e : 0.0;
    gaps.push_back(gap);
    rep.rows.push_back({eps, e, quad, gap});
  }
  rep.fit.emplace_back("final_gap", gaps.empty() ? 0.0 : gaps.back());
  rep.flags.emplace_back("gap_decreasing", strictly_decreasing(gaps));
  return rep;
}

// ---------------------------------------------------------------- limit strain

std::size_t LimitStrain::locate(const Vec2& x) const {
  double hx = domain.width() / nx, hy = domain.height() / ny;
  double u = (x.x() - domain.lo.x()) / hx, v = (x.y() - domain.lo.y()) / hy;
  int i = std::clamp(static_cast<int>(std::floor(u)), 0, nx - 1);
  int j = std::clamp(static_cast<int>(std::floor(v)), 0, ny - 1);
  double lx = u - i, ly = v - j;
  return 2 * (static_cast<std::size_t>(j) * nx + i) + (ly > lx ? 1 : 0);
}

Vec2 LimitStrain::interpolate(const std::vector<Vec2>& nodal, const Vec2& x) const {
  std::size_t t = locate(x);
  const auto& tr = mesh.triangles[t];
  Mat2 e = mesh.edge_matrix(t);
  Vec2 l = e.inverse() * (x - mesh.vertices[tr[0]]);
  return (1.0 - l.x() - l.y()) * nodal[tr[0]] + l.x() * nodal[tr[1]] + l.y() * nodal[tr[2]];
}

LimitStrain limit_strain(const TargetMeasure& mu, const Rect& omega, const QuadraticForm& w, int n) {
  if (n < 4) throw Error(ErrorKind::InvalidInput, "limit grid too coarse");
  LimitStrain ls;
  ls.domain = omega;
  double side = std::max(omega.width(), omega.height());
  ls.nx = std::max(4, static_cast<int>(std::lround(n * omega.width() / side)));
  ls.ny = std::max(4, static_cast<int>(std::lround(n * omega.height() / side)));
  ls.mesh = rectangle_mesh(omega, ls.nx, ls.ny);
  const Mesh& M = ls.mesh;
  const std::size_t nt = M.num_triangles(), nv = M.num_vertices();
  ls.J.assign(nt, Mat2::Zero());

  // triangle integrals of the density (three-point edge-midpoint rule)
  std::vector<Vec2> s(nt, Vec2::Zero());
  if (mu.atomic()) {
    for (const auto& a : mu.atoms) s[ls.locate(a.position)] += a.burgers;
  } else if (mu.density) {
    for (std::size_t t = 0; t < nt; ++t) {
      const auto& tr = M.triangles[t];
      Vec2 acc = Vec2::Zero();
      for (int k = 0; k < 3; ++k) acc += mu.density(0.5 * (M.vertices[tr[k]] + M.vertices[tr[(k + 1) % 3]]));
      s[t] = acc * M.area(t) / 3.0;
    }
  }
  bool any = false;
  for (const auto& x : s) any = any || !x.isZero(0.0);
  if (!any) return ls;

  SpMat K = assemble_laplacian(M);
  Edges E = build_edges(M);
  auto fixed = boundary_vertex_mask(M, E);
  std::vector<Vec2> phi(nv, Vec2::Zero());
  for (int c = 0; c < 2; ++c) {
    Eigen::VectorXd load = Eigen::VectorXd::Zero(nv);
    for (std::size_t t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) load(M.triangles[t][k]) -= s[t](c) / 3.0;
    Eigen::VectorXd x = solve_dirichlet(K, load, fixed, 1e-12);
    for (std::size_t i = 0; i < nv; ++i) phi[i](c) = x(i);
  }
  for (std::size_t t = 0; t < nt; ++t) {
    Mat2 G = triangle_gradient(M, t, phi);
    Mat2 r;
    r << G(0, 1), -G(0, 0), G(1, 1), -G(1, 0);
    ls.J[t] = r;
    ls.energy += w(r) * M.area(t);
  }
  return ls;
}

// ---------------------------------------------------------------- regions and lower bounds

double ball_radius(const DislocationMeasure& m) {
  if (m.atoms.empty()) return 0.0;
  return std::min(m.smear_radius, std::pow(m.n_eps, -2.0 / 3.0));
}

void label_regions(AssembledBody& b, double r_eps, double s) {
  const auto& mesh = b.body.mesh;
  const auto& atoms = b.measure.atoms;
  double rc = std::min(std::pow(b.measure.eps, s), r_eps);
  b.body.region.assign(b.body.size(), 2);
  b.body.region_names = {"near_core", "ball", "far"};
  for (std::size_t t = 0; t < b.body.size(); ++t) {
    int si = mesh.site[t];
    if (si < 0) continue;
    double r = (mesh.centroid(t) - atoms[si].position).norm();
    if (r < rc) b.body.region[t] = 0;
    else if (r < r_eps) b.body.region[t] = 1;
  }
}

LowerBound liminf_lower_bound(const AssembledBody& b, double r_eps, const EnergyDensity& w, bool supercritical,
                              const CellResolution& cell_res) {
  LowerBound lb;
  const auto& atoms = b.measure.atoms;
  if (atoms.empty()) return lb;
  const double eps = b.measure.eps;
  QuadraticForm qf = hessian_at_identity(w);

  if (!supercritical) {
    std::map<std::tuple<double, double, double>, double> cache;
    for (const auto& at : atoms) {
      double hole = b.resolution.core_factor * eps * at.burgers.norm();
      double delta = hole / r_eps;
      if (!(delta < 1.0)) continue;
      auto key = std::make_tuple(at.burgers.x(), at.burgers.y(), delta);
      auto it = cache.find(key);
      if (it == cache.end())
        it = cache.emplace(key, solve_cell(at.burgers, delta, qf, cell_res).value_delta * std::log(1.0 / delta)).first;
      lb.self += eps * eps * it->second;
    }
  }

  const Mesh& mesh = b.body.mesh;
  auto far = [&](std::size_t t) {
    int si = mesh.site[t];
    return si < 0 || (mesh.centroid(t) - atoms[si].position).norm() >= r_eps;
  };
  std::vector<Mat2> qinv, p;
  std::vector<double> det;
  for (std::size_t t = 0; t < b.body.size(); ++t) {
    if (!far(t)) continue;
    qinv.push_back(b.body.Qinv[t]);
    p.push_back(b.body.Qinv[t] - Mat2::Identity());
    det.push_back(b.body.volume[t] / mesh.area(t));
  }
  Mesh sub = extract_triangles(mesh, far);
  SpMat K = assemble_elasticity(sub, qf, &qinv, &det);
  Eigen::VectorXd f = eigenstrain_load(sub, qf, p, &qinv, &det);
  auto g = gauge_dofs(sub);
  Eigen::VectorXd u = solve_with_fixed(K, f, {g[0], g[1], g[2]});
  std::vector<Vec2> uv(sub.num_vertices());
  for (std::size_t i = 0; i < uv.size(); ++i) uv[i] = Vec2(u(2 * i), u(2 * i + 1));
  for (std::size_t t = 0; t < sub.num_triangles(); ++t)
    lb.far += qf(p[t] + triangle_gradient(sub, t, uv) * qinv[t]) * det[t] * sub.area(t);
  return lb;
}

LiminfReport liminf_diagnostic(const std::vector<const AssembledBody*>& bodies,
                               const std::vector<const Configuration*>& configurations, const RegimeParams& regime,
                               const EnergyDensity& w, double tolerance) {
  if (bodies.size() != configurations.size() || bodies.size() != regime.eps.size())
    throw Error(ErrorKind::InvalidInput, "bodies, configurations and the eps ladder must have equal length");
  LiminfReport rep;
  for (std::size_t i = 0; i < bodies.size(); ++i) {
    const AssembledBody& b = *bodies[i];
    double h2 = regime.h2(i);
    double e = energy(b.body, *configurations[i], w).total / h2;
    LowerBound lb = liminf_lower_bound(b, ball_radius(b.measure), w, regime.label(i) == "supercritical");
    rep.eps.push_back(regime.eps[i]);
    rep.measured.push_back(e);
    rep.lower.push_back(lb.total() / h2);
    rep.ok = rep.ok && e >= lb.total() / h2 - tolerance;
  }
  return rep;
}

// ---------------------------------------------------------------- recovery sequence

namespace {

double self_energy_target(const TargetMeasure& mu, const Rect& omega, const DislocationLattice& lattice,
                          const Mat2& iquad) {
  if (mu.atomic()) {
    double s = 0.0;
    for (const auto& a : mu.atoms) s += sigma(lattice, iquad, a.burgers).value;
    return s;
  }
  if (!mu.density) return 0.0;
  const int cells = 6;
  double hx = omega.width() / cells, hy = omega.height() / cells, s = 0.0;
  for (int i = 0; i < cells; ++i)
    for (int j = 0; j < cells; ++j)
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q) {
          Vec2 x = omega.lo + Vec2(hx * (i + 0.5 * (1 + kGl4x[p])), hy * (j + 0.5 * (1 + kGl4x[q])));
          Vec2 m = mu.density(x);
          if (m.norm() > 0.0) s += kGl4w[p] * kGl4w[q] * sigma(lattice, iquad, m).value;
        }
  return s * 0.25 * hx * hy;
}

}  // namespace

GammaLimitReport recovery_sequence(const Rect& omega, const TargetMeasure& mu, const RegimeParams& regime,
                                   const MatrixField& J, const Mat2& U, const DislocationLattice& lattice_in,
                                   const EnergyDensity& w, const RecoveryOptions& opt,
                                   std::vector<RecoveryState>* states) {
  regime.validate();
  if (!((U.transpose() * U - Mat2::Identity()).norm() < 1e-10 && U.determinant() > 0.0))
    throw Error(ErrorKind::InvalidInput, "U must be a rotation");
  if (!(opt.s > 0.0 && opt.s < 1.0)) throw Error(ErrorKind::InvalidInput, "s must lie in (0, 1)");
  QuadraticForm qf = hessian_at_identity(w);
  Mat2 iquad = self_energy_form(qf);
  DislocationLattice lattice = lattice_in;
  if (!(lattice.cutoff_K > 0.0)) lattice.cutoff_K = derive_cutoff(lattice, iquad);

  GammaLimitReport rep;
  const std::string regime0 = regime.label(0);
  for (std::size_t i = 1; i < regime.eps.size(); ++i)
    if (regime.label(i) != regime0) throw Error(ErrorKind::InvalidInput, "regime label changes along the ladder");
  const bool subcritical = regime0 == "subcritical", supercritical = regime0 == "supercritical";

  LimitStrain ls = limit_strain(mu, omega, qf, opt.limit_grid);
  // reference strain carrying the curl constraint of the regime
  std::vector<Mat2> ref(ls.J.size(), Mat2::Zero());
  if (!subcritical) ref = ls.J;

  // potential of J - J_ref on the structured mesh
  std::vector<Vec2> psi_nodal;
  double psi_grad_max = 0.0;
  if (J) {
    const Mesh& M = ls.mesh;
    std::vector<Mat2> D(M.num_triangles());
    double dnorm = 0.0;
    rep.target_elastic = 0.0;
    for (std::size_t t = 0; t < D.size(); ++t) {
      Mat2 jt = J(M.centroid(t));
      rep.target_elastic += qf(jt) * M.area(t);
      D[t] = jt - ref[t];
      dnorm += D[t].squaredNorm() * M.area(t);
    }
    psi_nodal.assign(M.num_vertices(), Vec2::Zero());
    if (dnorm > 0.0) {
      SpMat K = assemble_laplacian(M);
      std::vector<char> fixed(M.num_vertices(), 0);
      fixed[0] = 1;
      for (int c = 0; c < 2; ++c) {
        Eigen::VectorXd load = Eigen::VectorXd::Zero(M.num_vertices());
        for (std::size_t t = 0; t < D.size(); ++t) {
          auto G = M.basis_gradients(t);
          for (int k = 0; k < 3; ++k) load(M.triangles[t][k]) += M.area(t) * D[t].row(c).dot(G.col(k));
        }
        Eigen::VectorXd x = solve_dirichlet(K, load, fixed, 1e-12);
        for (Eigen::Index v = 0; v < x.size(); ++v) psi_nodal[v](c) = x(v);
      }
      double miss = 0.0;
      for (std::size_t t = 0; t < D.size(); ++t) {
        Mat2 g = triangle_gradient(M, t, psi_nodal);
        miss += (g - D[t]).squaredNorm() * M.area(t);
        psi_grad_max = std::max(psi_grad_max, g.norm());
      }
      if (std::sqrt(miss / dnorm) > 0.05)
        throw Error(ErrorKind::InvalidInput, std::string("J does not satisfy the curl constraint of the ") + regime0 +
                                                 " regime");
    }
  } else {
    rep.target_elastic = subcritical ? 0.0 : ls.energy;
  }
  rep.target_self = supercritical ? 0.0 : self_energy_target(mu, omega, lattice, iquad);
  rep.target_total = rep.target_elastic + rep.target_self;

  MinimizeOptions mo = opt.minimize;
  mo.workers = opt.workers;
  AssemblyResolution ar = opt.assembly;
  ar.workers = opt.workers;

  for (std::size_t i = 0; i < regime.eps.size(); ++i) {
    const double eps = regime.eps[i];
    GammaLimitRow row;
    row.eps = eps;
    row.n_eps = regime.n_eps(i);
    row.h2 = regime.h2(i);
    row.regime = regime.label(i);
    const double h = std::sqrt(row.h2);
    RecoveryState st;
    try {
      DislocationMeasure meas = approximate_measure(mu, omega, row.n_eps, eps, lattice, iquad);
      st.body = build_implant(meas, ar);
    } catch (const Error& e) {
      throw Error(e.kind(), "at eps = " + fmt(eps) + ": " + e.what());
    }
    AssembledBody& ab = st.body;
    const auto& atoms = ab.measure.atoms;
    const Body& body = ab.body;
    row.atoms = atoms.size();
    row.elements = body.size();
    row.smear_radius = ab.measure.smear_radius;
    st.r_eps = row.r_eps = ball_radius(ab.measure);
    label_regions(ab, st.r_eps, opt.s);

    // near-core fields blended into the chart, one atom at a time
    Configuration f = identity_configuration(body);
    std::vector<std::vector<int>> by_site(atoms.size());
    for (std::size_t t = 0; t < body.size(); ++t)
      if (body.mesh.site[t] >= 0) by_site[body.mesh.site[t]].push_back(static_cast<int>(t));
    for (std::size_t k = 0; k < atoms.size(); ++k) {
      NearCoreField nc = near_core_optimal_field(body, atoms[k].burgers, eps, opt.s, ab.measure.smear_radius, f, qf,
                                                 atoms[k].position, &by_site[k]);
      f = std::move(nc.f);
    }
    if (!psi_nodal.empty()) {
      double scale = 1.0;
      double cap = std::pow(eps, 0.6) / h;
      if (psi_grad_max > cap) {
        scale = cap / psi_grad_max;
        row.psi_clipped = true;
      }
      for (std::size_t v = 0; v < f.size(); ++v)
        f[v] += h * scale * ls.interpolate(psi_nodal, body.mesh.vertices[v]);
    }
    for (auto& x : f) x = U * x;
    st.recovery = f;

    auto split = [&](const EnergyBreakdown& e, double& self, double& elastic, double& total) {
      self = (e.per_region.at("near_core") + e.per_region.at("ball")) / row.h2;
      elastic = e.per_region.at("far") / row.h2;
      total = e.total / row.h2;
    };
    split(energy(body, f, w, opt.workers), row.E_self, row.E_elastic, row.E_total);
    if (opt.run_minimizer) {
      MinimizeResult mr;
      try {
        mr = minimize(body, w, f, mo);
      } catch (const Error& e) {
        throw Error(e.kind(), "at eps = " + fmt(eps) + ": " + e.what());
      }
      split(mr.energy, row.M_self, row.M_elastic, row.M_total);
      row.iterations = mr.iterations;
      row.converged = mr.converged;
      st.minimized = std::move(mr.f);
    } else {
      row.M_self = row.E_self;
      row.M_elastic = row.E_elastic;
      row.M_total = row.E_total;
      st.minimized = st.recovery;
    }
    LowerBound lb = liminf_lower_bound(ab, st.r_eps, w, supercritical, opt.cell);
    row.lower_self = lb.self / row.h2;
    row.lower_far = lb.far / row.h2;
    row.lower = lb.total() / row.h2;
    if (!atoms.empty()) row.lower_half_r = liminf_lower_bound(ab, 0.5 * st.r_eps, w, supercritical, opt.cell).total() / row.h2;
    if (rep.target_total > 0.0) {
      row.gap = std::abs(row.E_total - rep.target_total) / rep.target_total;
      row.minimized_gap = std::abs(row.M_total - rep.target_total) / rep.target_total;
    } else {
      row.gap = row.E_total;
      row.minimized_gap = row.M_total;
    }
    if (rep.target_self > 0.0) row.self_gap = std::abs(row.E_self - rep.target_self) / rep.target_self;
    rep.rows.push_back(row);
    if (states) states->push_back(std::move(st));
  }

  rep.gap_decreasing = true;
  rep.recovery_gap_decreasing = true;
  rep.sandwich = true;
  for (std::size_t i = 0; i < rep.rows.size(); ++i) {
    const auto& r = rep.rows[i];
    if (i > 0 && !(r.minimized_gap < rep.rows[i - 1].minimized_gap)) rep.gap_decreasing = false;
    if (i > 0 && !(r.gap < rep.rows[i - 1].gap)) rep.recovery_gap_decreasing = false;
    double slack = 1e-12 * std::max(1.0, r.E_total);
    if (!(r.lower <= r.M_total + slack && r.M_total <= r.E_total + slack)) rep.sandwich = false;
  }
  rep.final_gap = rep.rows.empty() ? 0.0 : rep.rows.back().minimized_gap;
  rep.final_recovery_gap = rep.rows.empty() ? 0.0 : rep.rows.back().gap;
  return rep;
}

// ---------------------------------------------------------------- compactness

LimitDisplacement compactness_diagnostic(const AssembledBody& b, const Configuration& f, const RegimeParams& regime,
                                         std::size_t index, const TargetMeasure& mu, const EnergyDensity& w,
                                         int grid) {
  if (grid < 2) throw Error(ErrorKind::InvalidInput, "coarse grid too small");
  const double h2 = regime.h2(index), h = std::sqrt(h2);
  double e = energy(b.body, f, w).total;
  if (!std::isfinite(e) || e > 1e4 * h2)
    throw Error(ErrorKind::HypothesisViolation, "energy " + fmt(e) + " is not of order h_eps^2 = " + fmt(h2));
  LimitDisplacement out;
  out.n = grid;
  out.domain = b.measure.domain;
  const Rect& om = out.domain;
  RigidityReport rr = best_rotation(b.body, f);
  out.U = rr.U;
  out.curl_target_zero = regime.label(index) == "subcritical";
  const Mesh& mesh = b.body.mesh;
  double cx = om.width() / grid, cy = om.height() / grid;
  std::vector<Mat2> acc(static_cast<std::size_t>(grid) * grid, Mat2::Zero());
  std::vector<double> area(acc.size(), 0.0);
  double l2 = 0.0;
  for (std::size_t t = 0; t < b.body.size(); ++t) {
    Mat2 s = (rr.U.transpose() * triangle_gradient(mesh, t, f) - b.body.Q[t]) / h;
    Vec2 c = mesh.centroid(t);
    int i = std::clamp(static_cast<int>((c.x() - om.lo.x()) / cx), 0, grid - 1);
    int j = std::clamp(static_cast<int>((c.y() - om.lo.y()) / cy), 0, grid - 1);
    double a = mesh.area(t);
    acc[static_cast<std::size_t>(j) * grid + i] += a * s;
    area[static_cast<std::size_t>(j) * grid + i] += a;
    l2 += a * s.squaredNorm();
  }
  out.J.resize(acc.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out.J[k] = area[k] > 0.0 ? Mat2(acc[k] / area[k]) : Mat2(Mat2::Zero());
  out.strain_bound = std::sqrt(l2);
  double bs = 0.0;
  for (const auto& a : b.measure.atoms) bs += a.burgers.squaredNorm();
  out.burgers_square_sum = b.measure.n_eps > 0.0 ? bs / b.measure.n_eps : 0.0;

  for (const auto& psi : standard_test_fields(om)) {
    double res = 0.0, scale = 0.0;
    for (int j = 0; j < grid; ++j)
      for (int i = 0; i < grid; ++i) {
        double x0 = om.lo.x() + i * cx, y0 = om.lo.y() + j * cy;
        // cell integrals of d1 psi and d2 psi from boundary values
        Vec2 d1 = Vec2::Zero(), d2 = Vec2::Zero();
        for (int q = 0; q < 4; ++q) {
          double xs = x0 + 0.5 * cx * (1 + kGl4x[q]), ys = y0 + 0.5 * cy * (1 + kGl4x[q]);
          d2 += 0.5 * cx * kGl4w[q] * (psi(Vec2(xs, y0 + cy)) - psi(Vec2(xs, y0)));
          d1 += 0.5 * cy * kGl4w[q] * (psi(Vec2(x0 + cx, ys)) - psi(Vec2(x0, ys)));
        }
        const Mat2& Jc = out.J[static_cast<std::size_t>(j) * grid + i];
        for (int k = 0; k < 2; ++k) {
          res += Jc(k, 0) * d2(k) - Jc(k, 1) * d1(k);
          scale += std::abs(Jc(k, 0) * d2(k)) + std::abs(Jc(k, 1) * d1(k));
        }
      }
    if (!out.curl_target_zero) {
      double pair = target_pairing(mu, om, psi);
      res += pair;
      scale += std::abs(pair);
    }
    out.weak_curl_residuals.push_back(scale > 0.0 ? std::abs(res) / scale : 0.0);
  }
  return out;
}

double coarse_l2_gap(const LimitDisplacement& d, const MatrixField& ref) {
  const Rect& om = d.domain;
  double cx = om.width() / d.n, cy = om.height() / d.n, num = 0.0, den = 0.0;
  for (int j = 0; j < d.n; ++j)
    for (int i = 0; i < d.n; ++i) {
      Mat2 avg = Mat2::Zero();
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
          avg += 0.25 * kGl4w[p] * kGl4w[q] *
                 ref(om.lo + Vec2(cx * (i + 0.5 * (1 + kGl4x[p])), cy * (j + 0.5 * (1 + kGl4x[q]))));
      num += (d.J[static_cast<std::size_t>(j) * d.n + i] - avg).squaredNorm();
      den += avg.squaredNorm();
    }
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num);
}

}  // namespace dislo
