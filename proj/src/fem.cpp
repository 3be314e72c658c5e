#include "dislo/fem.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>

namespace dislo {

Eigen::Matrix<double, 4, 6> strain_operator(const Eigen::Matrix<double, 2, 3>& g, const Mat2& b) {
  Eigen::Matrix<double, 3, 2> c = g.transpose() * b;
  Eigen::Matrix<double, 4, 6> l = Eigen::Matrix<double, 4, 6>::Zero();
  for (int a = 0; a < 3; ++a)
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) l(i * 2 + j, a * 2 + i) = c(a, j);
  return l;
}

SpMat assemble_laplacian(const Mesh& m) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.num_triangles() * 9);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    auto g = m.basis_gradients(t);
    double a = m.area(t);
    Eigen::Matrix3d ke = a * g.transpose() * g;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) trip.emplace_back(m.triangles[t][i], m.triangles[t][j], ke(i, j));
  }
  SpMat k(m.num_vertices(), m.num_vertices());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

std::vector<char> boundary_vertex_mask(const Mesh& m, const Edges& e) {
  std::vector<char> mask(m.num_vertices(), 0);
  for (std::size_t i = 0; i < e.vertices.size(); ++i)
    if (e.is_boundary(static_cast<int>(i))) mask[e.vertices[i][0]] = mask[e.vertices[i][1]] = 1;
  return mask;
}

Eigen::VectorXd solve_dirichlet(const SpMat& K, const Eigen::VectorXd& load, const std::vector<char>& fixed,
                                double tol, CgStats* stats) {
  const int n = static_cast<int>(K.rows());
  std::vector<int> map(n, -1);
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (!fixed[i]) map[i] = nf++;
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < K.outerSize(); ++c)
    for (SpMat::InnerIterator it(K, c); it; ++it)
      if (map[it.row()] >= 0 && map[it.col()] >= 0) trip.emplace_back(map[it.row()], map[it.col()], it.value());
  SpMat kr(nf, nf);
  kr.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd br(nf);
  for (int i = 0; i < n; ++i)
    if (map[i] >= 0) br(map[i]) = load(i);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (nf == 0 || br.norm() == 0.0) return out;
  Eigen::ConjugateGradient<SpMat, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg;
  cg.setTolerance(tol);
  cg.setMaxIterations(std::max(1000, 20 * static_cast<int>(std::sqrt(static_cast<double>(nf))) * 10));
  cg.compute(kr);
  Eigen::VectorXd x = cg.solve(br);
  if (cg.info() != Eigen::Success || !x.allFinite())
    throw Error(ErrorKind::SolverFailure, "Poisson conjugate gradient did not converge");
  if (stats) {
    stats->iterations = static_cast<int>(cg.iterations());
    stats->residual = cg.error();
  }
  for (int i = 0; i < n; ++i)
    if (map[i] >= 0) out(i) = x(map[i]);
  return out;
}

SpMat assemble_elasticity(const Mesh& m, const QuadraticForm& w, const std::vector<Mat2>* right,
                          const std::vector<double>* weight) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(m.num_triangles() * 36);
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    Mat2 b = right ? (*right)[t] : Mat2::Identity();
    double wt = m.area(t) * (weight ? (*weight)[t] : 1.0);
    auto l = strain_operator(m.basis_gradients(t), b);
    Eigen::Matrix<double, 6, 6> ke = 2.0 * wt * l.transpose() * w.coefficients * l;
    const auto& tr = m.triangles[t];
    for (int p = 0; p < 6; ++p)
      for (int q = 0; q < 6; ++q) trip.emplace_back(tr[p / 2] * 2 + p % 2, tr[q / 2] * 2 + q % 2, ke(p, q));
  }
  SpMat k(2 * m.num_vertices(), 2 * m.num_vertices());
  k.setFromTriplets(trip.begin(), trip.end());
  return k;
}

Eigen::VectorXd eigenstrain_load(const Mesh& m, const QuadraticForm& w, const std::vector<Mat2>& p,
                                 const std::vector<Mat2>* right, const std::vector<double>* weight) {
  Eigen::VectorXd f = Eigen::VectorXd::Zero(2 * m.num_vertices());
  for (std::size_t t = 0; t < m.num_triangles(); ++t) {
    auto l = strain_operator(m.basis_gradients(t), right ? (*right)[t] : Mat2::Identity());
    double wt = m.area(t) * (weight ? (*weight)[t] : 1.0);
    Eigen::Matrix<double, 6, 1> fe = -2.0 * wt * l.transpose() * (w.coefficients * vec(p[t]));
    const auto& tr = m.triangles[t];
    for (int q = 0; q < 6; ++q) f(tr[q / 2] * 2 + q % 2) += fe(q);
  }
  return f;
}

std::array<int, 3> gauge_dofs(const Mesh& m) {
  std::size_t lo = 0, hi = 0;
  for (std::size_t v = 1; v < m.num_vertices(); ++v) {
    const Vec2& x = m.vertices[v];
    if (x.x() < m.vertices[lo].x() || (x.x() == m.vertices[lo].x() && x.y() < m.vertices[lo].y())) lo = v;
    if (x.x() > m.vertices[hi].x() || (x.x() == m.vertices[hi].x() && x.y() > m.vertices[hi].y())) hi = v;
  }
  return {static_cast<int>(2 * lo), static_cast<int>(2 * lo + 1), static_cast<int>(2 * hi + 1)};
}

Eigen::VectorXd solve_with_fixed(const SpMat& K, const Eigen::VectorXd& f, const std::vector<int>& fixed,
                                 double* residual) {
  const int n = static_cast<int>(K.rows());
  std::vector<int> map(n, 0);
  for (int d : fixed) map[d] = -1;
  int nf = 0;
  for (int i = 0; i < n; ++i)
    if (map[i] == 0) map[i] = nf++;
    else map[i] = -1;
  std::vector<Eigen::Triplet<double>> trip;
  for (int c = 0; c < K.outerSize(); ++c)
    for (SpMat::InnerIterator it(K, c); it; ++it)
      if (map[it.row()] >= 0 && map[it.col()] >= 0) trip.emplace_back(map[it.row()], map[it.col()], it.value());
  SpMat kr(nf, nf);
  kr.setFromTriplets(trip.begin(), trip.end());
  Eigen::VectorXd fr(nf);
  for (int i = 0; i < n; ++i)
    if (map[i] >= 0) fr(map[i]) = f(i);
  Eigen::SimplicialLDLT<SpMat> ldlt(kr);
  if (ldlt.info() != Eigen::Success) throw Error(ErrorKind::SolverFailure, "stiffness factorization failed");
  Eigen::VectorXd x = ldlt.solve(fr);
  if (!x.allFinite()) throw Error(ErrorKind::SolverFailure, "non-finite solution");
  if (residual) *residual = fr.norm() > 0 ? (kr * x - fr).norm() / fr.norm() : 0.0;
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i)
    if (map[i] >= 0) out(i) = x(map[i]);
  return out;
}

Mat2 triangle_gradient(const Mesh& m, std::size_t t, const std::vector<Vec2>& f) {
  const auto& tr = m.triangles[t];
  Mat2 df;
  df << f[tr[1]] - f[tr[0]], f[tr[2]] - f[tr[0]];
  return df * m.edge_matrix(t).inverse();
}

}  // namespace dislo
