#include "dislo/cell.hpp"

#include "dislo/fem.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace dislo {

SingularStrain::SingularStrain(const Vec2& v, double nu) : v_(v), nu_(nu), b_(v.norm()) {
  if (!(nu > -1.0 && nu < 0.5)) throw Error(ErrorKind::InvalidInput, "Poisson ratio outside (-1, 1/2)");
  rot_ = b_ > 0.0 ? rotation(std::atan2(v.y(), v.x())) : Mat2::Identity();
}

Mat2 SingularStrain::operator()(const Vec2& xin) const {
  if (b_ == 0.0) return Mat2::Zero();
  Vec2 p = rot_.transpose() * xin;
  double x = p.x(), y = p.y();
  double r2 = x * x + y * y;
  if (!(r2 > 0.0)) throw Error(ErrorKind::OutsideManifold, "singular strain evaluated at the core");
  double r4 = r2 * r2;
  double k = 1.0 / (1.0 - nu_);
  double c = b_ / kTwoPi;
  Mat2 du;
  du(0, 0) = c * (-y / r2 + 0.5 * k * y * (y * y - x * x) / r4);
  du(0, 1) = c * (x / r2 + 0.5 * k * x * (x * x - y * y) / r4);
  du(1, 0) = -c * ((1.0 - 2.0 * nu_) * k * x / (2.0 * r2) + k * x * y * y / r4);
  du(1, 1) = -c * ((1.0 - 2.0 * nu_) * k * y / (2.0 * r2) - k * x * x * y / r4);
  return -(rot_ * du * rot_.transpose());
}

Vec2 SingularStrain::regular_displacement(const Vec2& xin) const {
  if (b_ == 0.0) return Vec2::Zero();
  Vec2 p = rot_.transpose() * xin;
  double x = p.x(), y = p.y();
  double r2 = x * x + y * y;
  double k = 1.0 / (1.0 - nu_);
  double c = b_ / kTwoPi;
  Vec2 us(c * 0.5 * k * x * y / r2,
          -c * (0.25 * (1.0 - 2.0 * nu_) * k * std::log(r2) + 0.25 * k * (x * x - y * y) / r2));
  return -(rot_ * us);
}

double SingularStrain::prelog_factor(const QuadraticForm& w, int samples) const {
  double s = 0.0;
  for (int j = 0; j < samples; ++j) {
    double t = kTwoPi * j / samples;
    s += w((*this)(Vec2(std::cos(t), std::sin(t))));
  }
  return s * kTwoPi / samples;
}

SingularStrain singular_strain(const Vec2& v, const QuadraticForm& w) {
  if (!w.isotropic) throw Error(ErrorKind::Unsupported, "closed-form singular strain needs an isotropic form");
  return SingularStrain(v, w.poisson_ratio());
}

double isotropic_prelog(const QuadraticForm& w, const Vec2& v) {
  return w.mu * v.squaredNorm() / (4.0 * kPi * (1.0 - w.poisson_ratio()));
}

double closed_form_cell_energy(const SingularStrain& beta, const QuadraticForm& w, double delta, int n_r,
                               int n_theta) {
  double s = 0.0;
  double lr = std::log(1.0 / delta);
  for (int i = 0; i < n_r; ++i) {
    double r0 = std::exp(-lr + lr * i / n_r), r1 = std::exp(-lr + lr * (i + 1) / n_r);
    double rm = 0.5 * (r0 + r1);
    double ring = 0.0;
    for (int j = 0; j < n_theta; ++j) {
      double t = kTwoPi * (j + 0.5) / n_theta;
      ring += w(beta(rm * Vec2(std::cos(t), std::sin(t))));
    }
    s += ring * (kTwoPi / n_theta) * rm * (r1 - r0);
  }
  return s / lr;
}

CellResult solve_cell(const Vec2& v, double delta, const QuadraticForm& w, const CellResolution& res, double scale,
                      double angle) {
  if (!(delta > 0.0 && delta < 1.0)) throw Error(ErrorKind::InvalidInput, "delta must lie in (0, 1)");
  if (res.cells_per_decade < 8 || res.n_theta < 16)
    throw Error(ErrorKind::InvalidInput, "cell resolution below the minimum (8 cells per decade)");
  if (!(scale > 0.0)) throw Error(ErrorKind::InvalidInput, "scale must be positive");
  CellResult out;
  out.v = v;
  out.delta = delta;
  out.scale = scale;
  out.mesh = annulus_mesh(Vec2::Zero(), delta * scale, scale, res.cells_per_decade, res.n_theta, angle);
  const Mesh& m = out.mesh;
  std::size_t nt = m.num_triangles();
  out.elements = nt;

  auto pe = [&](const Vec2& a, const Vec2& b) {
    double dt = std::atan2(cross(a, b), a.dot(b));
    return Vec2(-v * dt / kTwoPi);
  };
  std::vector<Mat2> P(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = m.triangles[t];
    const auto& x = m.vertices;
    P[t] = element_from_edges(m, t, pe(x[tri[0]], x[tri[1]]), pe(x[tri[0]], x[tri[2]]));
  }
  SpMat K = assemble_elasticity(m, w);
  Eigen::VectorXd load = eigenstrain_load(m, w, P);
  auto g = gauge_dofs(m);
  Eigen::VectorXd u = solve_with_fixed(K, load, {g.begin(), g.end()}, &out.galerkin_residual);
  out.corrector.resize(m.num_vertices());
  for (std::size_t i = 0; i < out.corrector.size(); ++i) out.corrector[i] = u.segment<2>(2 * i);

  out.beta.resize(nt);
  double e = 0.0;
  for (std::size_t t = 0; t < nt; ++t) {
    out.beta[t] = P[t] + triangle_gradient(m, t, out.corrector);
    e += m.area(t) * w(out.beta[t]);
  }
  out.value_delta = e / std::log(1.0 / delta);

  double vn = std::max(v.norm(), std::numeric_limits<double>::min());
  auto beta_edge = [&](int a, int b) { return Vec2(pe(m.vertices[a], m.vertices[b]) + out.corrector[b] - out.corrector[a]); };
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& tri = m.triangles[t];
    Vec2 c = beta_edge(tri[0], tri[1]) + beta_edge(tri[1], tri[2]) + beta_edge(tri[2], tri[0]);
    out.max_curl = std::max(out.max_curl, c.norm() / vn);
  }
  const auto& loop = m.hole_loops[0];
  Vec2 circ = Vec2::Zero();
  for (std::size_t j = 0; j < loop.size(); ++j) circ += beta_edge(loop[j], loop[(j + 1) % loop.size()]);
  out.circulation_error = (circ + v).norm() / vn;
  out.value_zero_extrapolated = std::numeric_limits<double>::quiet_NaN();
  return out;
}

IzeroFit extrapolate_izero(const std::vector<double>& deltas, const std::vector<double>& values) {
  if (deltas.size() != values.size() || deltas.size() < 3)
    throw Error(ErrorKind::InvalidInput, "extrapolation needs at least three ladder points");
  std::vector<double> sorted = deltas;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
    throw Error(ErrorKind::InvalidInput, "ladder deltas must be distinct");
  std::size_t n = deltas.size();
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd y(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(deltas[i] > 0.0 && deltas[i] < 1.0)) throw Error(ErrorKind::InvalidInput, "delta outside (0, 1)");
    A(i, 0) = 1.0;
    A(i, 1) = 1.0 / std::log(1.0 / deltas[i]);
    y(i) = values[i];
  }
  Eigen::Vector2d c = A.colPivHouseholderQr().solve(y);
  IzeroFit f;
  f.izero = c(0);
  f.slope = c(1);
  double scale = std::max(std::abs(f.izero), std::numeric_limits<double>::min());
  f.residual = std::sqrt((A * c - y).squaredNorm() / n) / scale;

  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return deltas[a] > deltas[b]; });
  int up = 0, down = 0;
  for (std::size_t i = 1; i < n; ++i) {
    double d = values[idx[i]] - values[idx[i - 1]];
    if (d > 0) ++up;
    if (d < 0) ++down;
  }
  f.monotone = up == 0 || down == 0;
  return f;
}

IzeroFit extrapolate_izero(const std::vector<CellResult>& results) {
  std::vector<double> d, v;
  for (const auto& r : results) {
    d.push_back(r.delta);
    v.push_back(r.value_delta);
  }
  return extrapolate_izero(d, v);
}

Mat2 fit_izero_form(const std::vector<Vec2>& vs, const std::vector<double>& values) {
  if (vs.size() != values.size() || vs.size() < 3)
    throw Error(ErrorKind::InvalidInput, "form fit needs at least three samples");
  Eigen::MatrixXd A(vs.size(), 3);
  Eigen::VectorXd y(vs.size());
  for (std::size_t i = 0; i < vs.size(); ++i) {
    A(i, 0) = vs[i].x() * vs[i].x();
    A(i, 1) = 2.0 * vs[i].x() * vs[i].y();
    A(i, 2) = vs[i].y() * vs[i].y();
    y(i) = values[i];
  }
  auto qr = A.colPivHouseholderQr();
  if (qr.rank() < 3) throw Error(ErrorKind::InvalidInput, "samples do not determine a quadratic form");
  Eigen::Vector3d c = qr.solve(y);
  Mat2 f;
  f << c(0), c(1), c(1), c(2);
  Eigen::SelfAdjointEigenSolver<Mat2> es(f);
  if (!(es.eigenvalues().minCoeff() > 0.0))
    throw Error(ErrorKind::Inconsistency, "fitted self-energy form is not positive definite");
  return f;
}

Body cell_body(const Vec2& v, double eps, double delta, double R, const CellResolution& res) {
  if (!(eps * v.norm() <= delta * R)) throw Error(ErrorKind::InvalidDomain, "core radius eps|v| exceeds delta R");
  return model_body(eps * v, Vec2::Zero(), delta * R, R, res.cells_per_decade, res.n_theta);
}

double nonlinear_cell_energy(const Body& body, const Vec2& v, double eps, double delta, double R,
                             const EnergyDensity& w, const Configuration& f) {
  if (!(eps * v.norm() <= delta * R)) throw Error(ErrorKind::InvalidDomain, "core radius eps|v| exceeds delta R");
  if (f.size() != body.mesh.num_vertices()) throw Error(ErrorKind::InvalidInput, "field does not match the body");
  return energy(body, f, w).total / (eps * eps * std::log(1.0 / delta));
}

Configuration singular_ansatz(const Body& body, const Vec2& v, double eps, double nu, const Vec2& center) {
  SingularStrain b(eps * v, nu);
  Configuration f(body.mesh.num_vertices());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec2& x = body.mesh.vertices[i];
    f[i] = x + b.regular_displacement(x - center);
  }
  return f;
}

namespace {

double quadratic_energy_over(const Body& body, const Configuration& f, const QuadraticForm& w, const Vec2& center,
                             double r_lo, double r_hi, const std::vector<int>& elems) {
  double s = 0.0;
  for (int t : elems) {
    double r = (body.mesh.centroid(t) - center).norm();
    if (r < r_lo || r >= r_hi) continue;
    Mat2 df = triangle_gradient(body.mesh, t, f);
    s += w(df * body.Qinv[t] - Mat2::Identity()) * body.volume[t];
  }
  return s;
}

std::vector<int> all_elements(const Body& body) {
  std::vector<int> e(body.size());
  for (std::size_t t = 0; t < e.size(); ++t) e[t] = static_cast<int>(t);
  return e;
}

}  // namespace

double quadratic_energy_in(const Body& body, const Configuration& f, const QuadraticForm& w, const Vec2& center,
                           double r_lo, double r_hi) {
  return quadratic_energy_over(body, f, w, center, r_lo, r_hi, all_elements(body));
}

NearCoreField near_core_optimal_field(const Body& body, const Vec2& v, double eps, double s, double R,
                                      const Configuration& outer_trace, const QuadraticForm& w, const Vec2& center,
                                      const std::vector<int>* elements) {
  if (!(s > 0.0 && s < 1.0)) throw Error(ErrorKind::InvalidInput, "s must lie in (0, 1)");
  if (outer_trace.size() != body.mesh.num_vertices())
    throw Error(ErrorKind::InvalidInput, "outer trace does not match the body");
  const std::vector<int> elems = elements ? *elements : all_elements(body);
  std::vector<int> verts;
  {
    std::vector<char> seen(body.mesh.num_vertices(), 0);
    for (int t : elems)
      for (int k = 0; k < 3; ++k) {
        int i = body.mesh.triangles[t][k];
        if (!seen[i]) {
          seen[i] = 1;
          verts.push_back(i);
        }
      }
    std::sort(verts.begin(), verts.end());
  }
  double r_in = std::numeric_limits<double>::max();
  for (int i : verts) r_in = std::min(r_in, (body.mesh.vertices[i] - center).norm());
  int kmax = -1;
  while (R / std::pow(2.0, kmax + 2) >= r_in * (1.0 - 1e-12)) ++kmax;
  if (kmax < 0) throw Error(ErrorKind::InvalidDomain, "no dyadic ring fits between the core and R");

  SingularStrain sing(eps * v, w.poisson_ratio());
  Configuration f0 = outer_trace;
  for (int i : verts) {
    const Vec2& x = body.mesh.vertices[i];
    f0[i] = x + sing.regular_displacement(x - center);
  }
  NearCoreField out;
  out.f = outer_trace;
  for (int k = 0; k <= kmax; ++k) {
    double hi = R / std::pow(2.0, k), lo = hi / 2.0;
    double ef = quadratic_energy_over(body, f0, w, center, lo, hi, elems);
    double ez = quadratic_energy_over(body, outer_trace, w, center, lo, hi, elems);
    if (ef < ez) {
      out.ring = k;
      Vec2 c = Vec2::Zero();
      int cnt = 0;
      for (int i : verts) {
        double r = (body.mesh.vertices[i] - center).norm();
        if (r >= lo && r <= hi) {
          c += outer_trace[i] - f0[i];
          ++cnt;
        }
      }
      if (cnt > 0) c /= cnt;
      for (int i : verts) {
        double r = (body.mesh.vertices[i] - center).norm();
        double t = std::clamp((r - lo) / (hi - lo), 0.0, 1.0);
        double phi = t * t * (3.0 - 2.0 * t);
        if (t >= 1.0) continue;
        Vec2 base = f0[i] + c;
        out.f[i] = base + phi * (outer_trace[i] - base);
      }
      break;
    }
  }
  double inf = std::numeric_limits<double>::infinity();
  out.energy_window = quadratic_energy_over(body, out.f, w, center, std::pow(eps, s), inf, elems) /
                      (eps * eps * std::log(1.0 / eps));
  out.added_energy = quadratic_energy_over(body, out.f, w, center, 0.0, inf, elems) -
                     quadratic_energy_over(body, f0, w, center, 0.0, inf, elems);
  return out;
}

}  // namespace dislo
