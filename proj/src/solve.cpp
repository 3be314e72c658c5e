#include "dislo/solve.hpp"

#include "dislo/fem.hpp"
#include "dislo/parallel.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <deque>
#include <random>

namespace dislo {

void Body::finalize() {
  std::size_t n = mesh.num_triangles();
  if (Q.size() != n) throw Error(ErrorKind::CorruptBody, "implant size does not match the mesh");
  if (region.empty()) region.assign(n, 0);
  Qinv.resize(n);
  volume.resize(n);
  grads.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    double d = Q[t].determinant();
    if (!(d > 0.0) || !std::isfinite(d)) {
      Vec2 c = mesh.centroid(t);
      throw Error(ErrorKind::CorruptBody, "det Q = " + std::to_string(d) + " at element " + std::to_string(t) +
                                              " (" + std::to_string(c.x()) + ", " + std::to_string(c.y()) + ")");
    }
    Qinv[t] = Q[t].inverse();
    volume[t] = d * mesh.area(t);
    grads[t] = mesh.basis_gradients(t);
  }
}

Vec2 model_edge_value(const Vec2& v, const Vec2& center, const Vec2& a, const Vec2& b) {
  Vec2 p = a - center, q = b - center;
  double dt = std::atan2(cross(p, q), p.dot(q));
  return (b - a) + v * (dt / kTwoPi);
}

Mat2 element_from_edges(const Mesh& m, std::size_t t, const Vec2& q01, const Vec2& q02) {
  Mat2 qe;
  qe.col(0) = q01;
  qe.col(1) = q02;
  return qe * m.edge_matrix(t).inverse();
}

Body model_body(const Vec2& v, const Vec2& center, double r_in, double r_out, int cells_per_decade, int n_theta,
                double angle0) {
  Body b;
  b.mesh = annulus_mesh(center, r_in, r_out, cells_per_decade, n_theta, angle0);
  std::size_t n = b.mesh.num_triangles();
  b.Q.resize(n);
  for (std::size_t t = 0; t < n; ++t) {
    const auto& tri = b.mesh.triangles[t];
    const auto& x = b.mesh.vertices;
    Vec2 d01 = model_edge_value(v, center, x[tri[0]], x[tri[1]]) - (x[tri[1]] - x[tri[0]]);
    Vec2 d02 = model_edge_value(v, center, x[tri[0]], x[tri[2]]) - (x[tri[2]] - x[tri[0]]);
    b.Q[t] = Mat2::Identity() + element_from_edges(b.mesh, t, d01, d02);
  }
  b.region.assign(n, 0);
  b.finalize();
  return b;
}

Configuration identity_configuration(const Body& body) { return body.mesh.vertices; }

namespace {

Mat2 element_differential(const Body& b, std::size_t t, const Configuration& f) {
  const auto& tri = b.mesh.triangles[t];
  const auto& g = b.grads[t];
  Mat2 df = Mat2::Zero();
  for (int a = 0; a < 3; ++a) df += f[tri[a]] * g.col(a).transpose();
  return df;
}

double element_energy(const EnergyDensity& w, const Mat2& a) {
  return density_value<double>(w.mu(), w.lambda(), a);
}

}  // namespace

EnergyBreakdown energy(const Body& body, const Configuration& f, const EnergyDensity& w, int workers) {
  std::size_t n = body.size();
  std::vector<double> e(n), d(n);
  parallel_for(n, workers, [&](std::size_t t) {
    Mat2 a = element_differential(body, t, f) * body.Qinv[t];
    e[t] = element_energy(w, a) * body.volume[t];
    double dist = dist_to_rotations(a);
    d[t] = dist * dist * body.volume[t];
  });
  EnergyBreakdown out;
  std::vector<double> per(body.region_names.size(), 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    out.total += e[t];
    out.distortion += d[t];
    per[body.region[t]] += e[t];
  }
  for (std::size_t r = 0; r < per.size(); ++r) out.per_region[body.region_names[r]] = per[r];
  return out;
}

double energy_and_gradient(const Body& body, const Configuration& f, const EnergyDensity& w, std::vector<Vec2>& grad,
                           int workers) {
  std::size_t n = body.size();
  std::vector<double> e(n);
  std::vector<Eigen::Matrix<double, 2, 3>> ge(n);
  parallel_for(n, workers, [&](std::size_t t) {
    Mat2 a = element_differential(body, t, f) * body.Qinv[t];
    e[t] = element_energy(w, a) * body.volume[t];
    Mat2 g = body.volume[t] * density_derivative<double>(w.mu(), w.lambda(), a) * body.Qinv[t].transpose();
    ge[t] = g * body.grads[t];
  });
  grad.assign(f.size(), Vec2::Zero());
  double total = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    total += e[t];
    const auto& tri = body.mesh.triangles[t];
    for (int a = 0; a < 3; ++a) grad[tri[a]] += ge[t].col(a);
  }
  return total;
}

namespace {

Eigen::VectorXd flatten(const std::vector<Vec2>& x) {
  Eigen::VectorXd v(2 * x.size());
  for (std::size_t i = 0; i < x.size(); ++i) v.segment<2>(2 * i) = x[i];
  return v;
}

std::vector<Vec2> unflatten(const Eigen::VectorXd& v) {
  std::vector<Vec2> x(v.size() / 2);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = v.segment<2>(2 * i);
  return x;
}

}  // namespace

MinimizeResult minimize(const Body& body, const EnergyDensity& w, const Configuration& initial,
                        const MinimizeOptions& opt) {
  for (const auto& p : initial)
    if (!p.allFinite()) throw Error(ErrorKind::InvalidInput, "initial configuration is not finite");
  const std::size_t nd = 2 * initial.size();
  auto fixed = gauge_dofs(body.mesh);
  std::vector<char> is_fixed(nd, 0);
  for (int d : fixed) is_fixed[d] = 1;

  // preconditioner: linear elasticity of the body, gauge rows replaced by identity
  std::vector<double> detq(body.size());
  for (std::size_t t = 0; t < body.size(); ++t) detq[t] = body.volume[t] / body.mesh.area(t);
  SpMat k0 = assemble_elasticity(body.mesh, hessian_at_identity(w), &body.Qinv, &detq);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(k0.nonZeros());
  for (int c = 0; c < k0.outerSize(); ++c)
    for (SpMat::InnerIterator it(k0, c); it; ++it)
      if (!is_fixed[it.row()] && !is_fixed[it.col()]) trip.emplace_back(it.row(), it.col(), it.value());
  for (int d : fixed) trip.emplace_back(d, d, 1.0);
  SpMat kr(nd, nd);
  kr.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<SpMat> ldlt(kr);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "preconditioner factorization failed");
  auto precond = [&](const Eigen::VectorXd& g) {
    Eigen::VectorXd z = ldlt.solve(g);
    for (int d : fixed) z(d) = 0.0;
    return z;
  };

  Eigen::VectorXd x = flatten(initial);
  std::vector<Vec2> gv;
  auto eval = [&](const Eigen::VectorXd& xx, Eigen::VectorXd& g) {
    double e = energy_and_gradient(body, unflatten(xx), w, gv, opt.workers);
    g = flatten(gv);
    for (int d : fixed) g(d) = 0.0;
    return e;
  };

  MinimizeResult res;
  Eigen::VectorXd g;
  double e = eval(x, g);
  if (!std::isfinite(e)) throw Error(ErrorKind::Divergence, "initial energy is not finite");
  res.history.push_back(e);
  const double g0 = std::max(g.lpNorm<Eigen::Infinity>(), 1e-300);

  std::deque<Eigen::VectorXd> S, Y;
  std::deque<double> rho;
  int it = 0;
  for (; it < opt.max_iter; ++it) {
    double gmax = g.lpNorm<Eigen::Infinity>();
    if (gmax <= opt.tol_g * g0 || e <= 1e-28) {
      res.converged = true;
      break;
    }
    int h = static_cast<int>(res.history.size());
    if (h > opt.window) {
      double old = res.history[h - 1 - opt.window];
      if (old - e <= opt.tol_e * std::abs(e)) {
        res.converged = true;
        break;
      }
    }
    // two-loop recursion with H0 = scale * K0^-1
    Eigen::VectorXd q = g;
    std::vector<double> alpha(S.size());
    for (int i = static_cast<int>(S.size()) - 1; i >= 0; --i) {
      alpha[i] = rho[i] * S[i].dot(q);
      q -= alpha[i] * Y[i];
    }
    Eigen::VectorXd r = precond(q);
    if (!S.empty()) {
      Eigen::VectorXd ky = precond(Y.back());
      double den = Y.back().dot(ky);
      if (den > 0) r *= S.back().dot(Y.back()) / den;
    }
    for (std::size_t i = 0; i < S.size(); ++i) {
      double beta = rho[i] * Y[i].dot(r);
      r += S[i] * (alpha[i] - beta);
    }
    Eigen::VectorXd d = -r;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      S.clear();
      Y.clear();
      rho.clear();
      d = -precond(g);
      slope = g.dot(d);
      if (!(slope < 0.0)) break;
    }
    double step = 1.0;
    Eigen::VectorXd xn, gn;
    double en = 0.0;
    bool accepted = false;
    for (int k = 0; k <= 40; ++k) {
      xn = x + step * d;
      en = eval(xn, gn);
      if (std::isfinite(en) && en <= e + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      if (S.empty()) {
        // no progress possible along the preconditioned gradient: at round-off level
        if (std::isfinite(en) && std::abs(en - e) <= 1e-12 * std::abs(e)) {
          res.converged = true;
          break;
        }
        throw Error(ErrorKind::Divergence, "line search failed at iteration " + std::to_string(it));
      }
      S.clear();
      Y.clear();
      rho.clear();
      continue;
    }
    Eigen::VectorXd s = xn - x, y = gn - g;
    double sy = s.dot(y);
    if (sy > 1e-300) {
      S.push_back(s);
      Y.push_back(y);
      rho.push_back(1.0 / sy);
      if (static_cast<int>(S.size()) > opt.memory) {
        S.pop_front();
        Y.pop_front();
        rho.pop_front();
      }
    }
    x = std::move(xn);
    g = std::move(gn);
    e = en;
    res.history.push_back(e);
  }
  res.iterations = it;
  res.f = unflatten(x);
  res.energy = energy(body, res.f, w, opt.workers);
  return res;
}

double rotation_residual(const Body& body, const Configuration& f, const Mat2& U, int workers) {
  std::vector<double> l(body.size());
  parallel_for(body.size(), workers, [&](std::size_t t) {
    Mat2 a = element_differential(body, t, f) * body.Qinv[t];
    l[t] = (a - U).squaredNorm() * body.volume[t];
  });
  double s = 0.0;
  for (double x : l) s += x;
  return s;
}

RigidityReport best_rotation(const Body& body, const Configuration& f, int workers) {
  std::size_t n = body.size();
  std::vector<Mat2> m(n);
  std::vector<double> d(n);
  parallel_for(n, workers, [&](std::size_t t) {
    Mat2 a = element_differential(body, t, f) * body.Qinv[t];
    m[t] = a * body.volume[t];
    double dist = dist_to_rotations(a);
    d[t] = dist * dist * body.volume[t];
  });
  Mat2 sum = Mat2::Zero();
  RigidityReport r;
  double vol = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    sum += m[t];
    r.rhs += d[t];
    vol += body.volume[t];
  }
  double p = std::hypot(sum(0, 0) + sum(1, 1), sum(1, 0) - sum(0, 1)) / 2.0;
  if (!(p > 1e-14 * std::max(sum.norm(), 1e-300))) {
    r.degenerate = true;
    r.U = Mat2::Identity();
  } else {
    r.U = polar_rotation(sum);
  }
  r.lhs = rotation_residual(body, f, r.U, workers);
  // both sides at roundoff for a rigid motion
  r.ratio = r.rhs > 1e-20 * vol ? r.lhs / r.rhs : 0.0;
  return r;
}

Configuration random_trial_field(const Body& body, std::uint64_t seed, double amplitude) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::normal_distribution<double> nrm(0.0, 1.0);
  Vec2 lo = body.mesh.vertices[0], hi = lo;
  for (const auto& p : body.mesh.vertices) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double L = (hi - lo).norm();
  struct Mode {
    Vec2 k, c;
    double phase;
  };
  std::vector<Mode> modes(4);
  for (auto& md : modes) {
    double kk = (2.0 + 6.0 * uni(rng)) * kPi / L;
    double ang = kTwoPi * uni(rng);
    md.k = kk * Vec2(std::cos(ang), std::sin(ang));
    md.c = Vec2(nrm(rng), nrm(rng)) * (amplitude / (2.0 * kk));
    md.phase = kTwoPi * uni(rng);
  }
  Mat2 U0 = rotation(kTwoPi * uni(rng));
  Configuration f(body.mesh.num_vertices());
  for (std::size_t i = 0; i < f.size(); ++i) {
    const Vec2& x = body.mesh.vertices[i];
    Vec2 y = x;
    for (const auto& md : modes) y += md.c * std::sin(md.k.dot(x) + md.phase);
    f[i] = U0 * y;
  }
  return f;
}

FjmProbe uniform_fjm_probe(const Body& body, int trials, std::uint64_t seed, double amplitude_scale, int workers) {
  FjmProbe out;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> amp(0.1, 3.0);
  for (int k = 0; k < trials; ++k) {
    double a = amp(rng) * amplitude_scale;
    Configuration f = random_trial_field(body, rng(), a);
    auto r = best_rotation(body, f, workers);
    out.ratios.push_back(r.ratio);
    out.worst_ratio = std::max(out.worst_ratio, r.ratio);
  }
  return out;
}

}  // namespace dislo
