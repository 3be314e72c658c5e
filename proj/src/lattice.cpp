#include "dislo/lattice.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace dislo {

void DislocationLattice::validate() const {
  if (!u1.allFinite() || !u2.allFinite() || std::abs(cross(u1, u2)) < 1e-14)
    throw Error(ErrorKind::InvalidInput, "lattice basis is degenerate");
  if (!(cutoff_K > 0.0) || !std::isfinite(cutoff_K)) throw Error(ErrorKind::InvalidInput, "cutoff must be positive");
}

std::vector<LatticeVector> enumerate_lattice(const DislocationLattice& l, std::size_t max_points) {
  l.validate();
  Mat2 binv = l.basis().inverse();
  double bound = binv.norm() * l.cutoff_K;  // Frobenius >= operator norm
  if (bound > 1e4) throw Error(ErrorKind::CutoffTooLarge, "cutoff too large for enumeration");
  int m = static_cast<int>(std::floor(bound)) + 1;
  std::vector<LatticeVector> out;
  for (int a = -m; a <= m; ++a)
    for (int b = -m; b <= m; ++b) {
      if (a == 0 && b == 0) continue;
      Vec2 v = a * l.u1 + b * l.u2;
      if (v.norm() < l.cutoff_K) {
        out.push_back({a, b, v});
        if (out.size() > max_points) throw Error(ErrorKind::CutoffTooLarge, "more than max_points candidates");
      }
    }
  return out;
}

double derive_cutoff(const DislocationLattice& l, const Mat2& iquad) {
  Mat2 s = 0.5 * (iquad + iquad.transpose());
  Eigen::SelfAdjointEigenSolver<Mat2> es(s);
  double c = es.eigenvalues()(0);
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidInput, "quadratic form is not positive definite");
  // c1: distance from the origin to the segment [xi1 u1, xi2 u2] over sign patterns
  double c1 = std::numeric_limits<double>::infinity();
  for (int s1 : {-1, 1})
    for (int s2 : {-1, 1}) {
      Vec2 a = s1 * l.u1, b = s2 * l.u2, d = b - a;
      double t = std::clamp(-a.dot(d) / d.squaredNorm(), 0.0, 1.0);
      c1 = std::min(c1, (a + t * d).norm());
    }
  return std::max(quad(s, l.u1), quad(s, l.u2)) / (c1 * c);
}

LinearProgramResult simplex(const Eigen::MatrixXd& A0, const Eigen::VectorXd& b0, const Eigen::VectorXd& c) {
  const int m = static_cast<int>(A0.rows()), n = static_cast<int>(A0.cols());
  Eigen::MatrixXd A = A0;
  Eigen::VectorXd b = b0;
  for (int i = 0; i < m; ++i)
    if (b(i) < 0) {
      A.row(i) *= -1;
      b(i) *= -1;
    }
  // tableau columns: n structural, m artificial, rhs
  const int W = n + m + 1;
  Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m + 1, W);
  T.block(0, 0, m, n) = A;
  T.block(0, n, m, m) = Eigen::MatrixXd::Identity(m, m);
  T.block(0, W - 1, m, 1) = b;
  std::vector<int> basis(m);
  for (int i = 0; i < m; ++i) basis[i] = n + i;
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  const double eps = 1e-11 * scale;

  auto pivot = [&](int r, int col) {
    T.row(r) /= T(r, col);
    for (int i = 0; i <= m; ++i)
      if (i != r && T(i, col) != 0.0) T.row(i) -= T(i, col) * T.row(r);
    basis[r] = col;
  };
  auto run = [&](int ncols) {
    for (int it = 0; it < 100000; ++it) {
      int enter = -1;
      for (int j = 0; j < ncols; ++j)
        if (T(m, j) < -eps) {
          enter = j;  // Bland: lowest index
          break;
        }
      if (enter < 0) return true;
      int leave = -1;
      double best = std::numeric_limits<double>::infinity();
      for (int i = 0; i < m; ++i)
        if (T(i, enter) > eps) {
          double ratio = T(i, W - 1) / T(i, enter);
          if (ratio < best - 1e-15 || (leave >= 0 && std::abs(ratio - best) <= 1e-15 && basis[i] < basis[leave])) {
            best = ratio;
            leave = i;
          }
        }
      if (leave < 0) return false;  // unbounded
      pivot(leave, enter);
    }
    throw Error(ErrorKind::Internal, "simplex iteration limit");
  };

  // phase I: minimize the sum of artificials
  T.block(m, n, 1, m).setOnes();
  for (int i = 0; i < m; ++i) T.row(m) -= T.row(i);
  run(n + m);
  LinearProgramResult res;
  if (-T(m, W - 1) > 1e-9 * std::max(1.0, b.cwiseAbs().maxCoeff())) return res;
  // drive artificial variables out of the basis where possible
  for (int i = 0; i < m; ++i)
    if (basis[i] >= n)
      for (int j = 0; j < n; ++j)
        if (std::abs(T(i, j)) > eps) {
          pivot(i, j);
          break;
        }
  // phase II
  T.row(m).setZero();
  T.block(m, 0, 1, n) = c.transpose();
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) T.row(m) -= c(basis[i]) * T.row(i);
  for (int j = n; j < n + m; ++j) T.col(j).setZero();
  if (!run(n)) throw Error(ErrorKind::Internal, "linear program unbounded");
  res.feasible = true;
  res.x = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < m; ++i)
    if (basis[i] < n) res.x(basis[i]) = T(i, W - 1);
  res.value = c.dot(res.x);
  res.basis = basis;
  return res;
}

SelfEnergyResult sigma(const DislocationLattice& l, const Mat2& iquad, const Vec2& v) {
  if (!v.allFinite()) throw Error(ErrorKind::InvalidInput, "query vector not finite");
  SelfEnergyResult out;
  if (v.squaredNorm() == 0.0) return out;
  auto cand = enumerate_lattice(l);
  if (cand.empty()) throw Error(ErrorKind::Internal, "no candidates below the cutoff");
  const int n = static_cast<int>(cand.size());
  Eigen::MatrixXd A(2, n);
  Eigen::VectorXd c(n);
  for (int j = 0; j < n; ++j) {
    A.col(j) = cand[j].v;
    c(j) = quad(iquad, cand[j].v);
  }
  auto lp = simplex(A, v, c);
  if (!lp.feasible) throw Error(ErrorKind::Internal, "self-energy program infeasible");
  const double tol = 1e-12 * std::max(1.0, std::abs(lp.value));

  // Canonical optimum: lexicographically smallest active set attaining the LP value.
  auto try_set = [&](int j, int k, double& lj, double& lk) -> bool {
    if (k < 0) {
      const Vec2& u = cand[j].v;
      double t = u.dot(v) / u.squaredNorm();
      if (t <= 0.0 || (t * u - v).norm() > 1e-12 * v.norm()) return false;
      lj = t;
      return t * c(j) <= lp.value + tol;
    }
    Mat2 m2;
    m2 << cand[j].v, cand[k].v;
    double det = m2.determinant();
    if (std::abs(det) < 1e-14) return false;
    Vec2 lam = m2.inverse() * v;
    if (lam(0) <= 0.0 || lam(1) <= 0.0) return false;
    lj = lam(0);
    lk = lam(1);
    return lj * c(j) + lk * c(k) <= lp.value + tol;
  };
  for (int j = 0; j < n; ++j) {
    double lj = 0, lk = 0;
    if (try_set(j, -1, lj, lk)) {
      out.value = lj * c(j);
      out.decomposition.push_back({cand[j], lj});
      return out;
    }
    for (int k = j + 1; k < n; ++k)
      if (try_set(j, k, lj, lk)) {
        out.value = lj * c(j) + lk * c(k);
        out.decomposition.push_back({cand[j], lj});
        out.decomposition.push_back({cand[k], lk});
        return out;
      }
  }
  // fall back to the simplex basis
  out.value = lp.value;
  for (int j = 0; j < n; ++j)
    if (lp.x(j) > 0.0) out.decomposition.push_back({cand[j], lp.x(j)});
  return out;
}

SigmaPropertyReport verify_sigma_properties(const DislocationLattice& l, const Mat2& iquad, int samples,
                                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> box(-3.0, 3.0), unit(0.0, 1.0), scale(0.05, 5.0);
  std::uniform_int_distribution<int> coef(-4, 4);
  SigmaPropertyReport rep;
  rep.samples = samples;
  for (int s = 0; s < samples; ++s) {
    Vec2 u(box(rng), box(rng)), v(box(rng), box(rng));
    double t = unit(rng), alpha = scale(rng);
    double su = sigma(l, iquad, u).value, sv = sigma(l, iquad, v).value;
    double sav = sigma(l, iquad, alpha * v).value;
    double herr = std::abs(sav - alpha * sv) / std::max(1e-300, alpha * sv);
    rep.max_homogeneity_error = std::max(rep.max_homogeneity_error, herr);
    if (herr > 1e-7) ++rep.homogeneity_violations;
    double smix = sigma(l, iquad, t * u + (1 - t) * v).value;
    double excess = smix - (t * su + (1 - t) * sv);
    rep.max_convexity_excess = std::max(rep.max_convexity_excess, excess);
    if (excess > 1e-9) ++rep.convexity_violations;
    int a = coef(rng), b = coef(rng);
    if (a == 0 && b == 0) a = 1;
    Vec2 w = a * l.u1 + b * l.u2;
    double ub = sigma(l, iquad, w).value - quad(iquad, w);
    rep.max_upper_bound_excess = std::max(rep.max_upper_bound_excess, ub);
    if (ub > 1e-9 * std::max(1.0, quad(iquad, w))) ++rep.upper_bound_violations;
  }
  return rep;
}

double cutoff_doubling_gap(const DislocationLattice& l, const Mat2& iquad, const std::vector<Vec2>& probes) {
  DislocationLattice l2 = l;
  l2.cutoff_K *= 2.0;
  double worst = 0.0;
  for (const auto& v : probes) {
    double a = sigma(l, iquad, v).value, b = sigma(l2, iquad, v).value;
    if (a > 0) worst = std::max(worst, std::abs(a - b) / a);
  }
  return worst;
}

}  // namespace dislo
