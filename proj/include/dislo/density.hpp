#pragma once

#include "dislo/types.hpp"

#include <Eigen/Core>

#include <cmath>
#include <utility>

namespace dislo {

enum class DensityKind { DistSquaredSO2, Isotropic };

/**
 * @brief Frame-indifferent elastic energy density on 2x2 matrices.
 *
 * Both kinds are written through the conformal/anticonformal split
 * A = p + q with |p| +- |q| the signed singular values:
 *   W(A) = 2(mu + lambda)(|p| - 1)^2 + 2 mu |q|^2,
 * and dist^2(A, SO(2)) is the case mu = 1, lambda = 0.
 */
struct EnergyDensity {
  DensityKind kind = DensityKind::Isotropic;
  double lame_mu = 1.0;
  double lame_lambda = 1.0;

  static EnergyDensity dist_squared() { return {DensityKind::DistSquaredSO2, 1.0, 0.0}; }
  static EnergyDensity isotropic(double mu, double lambda);

  /// Effective Lame pair of the density (dist^2 uses (1, 0)).
  double mu() const { return kind == DensityKind::DistSquaredSO2 ? 1.0 : lame_mu; }
  double lambda() const { return kind == DensityKind::DistSquaredSO2 ? 0.0 : lame_lambda; }
  double poisson_ratio() const { return lambda() / (2.0 * (lambda() + mu())); }

  /// Constants c1, c2 with c1 dist^2 <= W <= c2 dist^2.
  std::pair<double, double> rotation_bounds() const;
};

/**
 * @brief Quadratic form on 2x2 matrices, W(A) = vec(A)^T M vec(A) with vec row-major.
 */
struct QuadraticForm {
  Eigen::Matrix4d coefficients = Eigen::Matrix4d::Zero();
  bool isotropic = false;
  double mu = 0.0, lambda = 0.0;

  static QuadraticForm from_lame(double mu, double lambda);

  double operator()(const Mat2& a) const;
  double bilinear(const Mat2& a, const Mat2& b) const;
  /// Derivative of A -> W(A), i.e. 2 M vec(A) reshaped.
  Mat2 gradient(const Mat2& a) const;
  double poisson_ratio() const { return lambda / (2.0 * (lambda + mu)); }
};

inline Eigen::Vector4d vec(const Mat2& a) { return {a(0, 0), a(0, 1), a(1, 0), a(1, 1)}; }
inline Mat2 unvec(const Eigen::Vector4d& v) {
  Mat2 a;
  a << v(0), v(1), v(2), v(3);
  return a;
}

namespace detail {

template <class S>
struct ConformalSplit {
  S p1, p2, q1, q2;
};

template <class S>
ConformalSplit<S> split(const Eigen::Matrix<S, 2, 2>& a) {
  return {(a(0, 0) + a(1, 1)) / S(2), (a(1, 0) - a(0, 1)) / S(2), (a(0, 0) - a(1, 1)) / S(2),
          (a(1, 0) + a(0, 1)) / S(2)};
}

// |p| - 1 without cancellation near |p| = 1.
template <class S>
S norm_minus_one(S p1, S p2) {
  using std::sqrt;
  S n = sqrt(p1 * p1 + p2 * p2);
  return ((p1 - S(1)) * (p1 + S(1)) + p2 * p2) / (n + S(1));
}

}  // namespace detail

template <class S>
S density_value(double mu, double lambda, const Eigen::Matrix<S, 2, 2>& a) {
  auto c = detail::split(a);
  S m = detail::norm_minus_one(c.p1, c.p2);
  return S(2.0 * (mu + lambda)) * m * m + S(2.0 * mu) * (c.q1 * c.q1 + c.q2 * c.q2);
}

template <class S>
Eigen::Matrix<S, 2, 2> density_derivative(double mu, double lambda, const Eigen::Matrix<S, 2, 2>& a) {
  using std::sqrt;
  auto c = detail::split(a);
  S n = sqrt(c.p1 * c.p1 + c.p2 * c.p2);
  S m = detail::norm_minus_one(c.p1, c.p2);
  // d|p|/dA: p1 = (a+d)/2, p2 = (c-b)/2
  S u1 = n > S(0) ? c.p1 / n : S(0), u2 = n > S(0) ? c.p2 / n : S(0);
  S k = S(4.0 * (mu + lambda)) * m;  // d/d|p| of 2(mu+l)(|p|-1)^2
  S k2 = S(4.0 * mu);                // d/dq of 2 mu |q|^2
  Eigen::Matrix<S, 2, 2> g;
  g(0, 0) = k * u1 / S(2) + k2 * c.q1 / S(2);
  g(1, 1) = k * u1 / S(2) - k2 * c.q1 / S(2);
  g(1, 0) = k * u2 / S(2) + k2 * c.q2 / S(2);
  g(0, 1) = -k * u2 / S(2) + k2 * c.q2 / S(2);
  return g;
}

double eval_density(const EnergyDensity& w, const Mat2& a);
Mat2 density_gradient(const EnergyDensity& w, const Mat2& a);
QuadraticForm hessian_at_identity(const EnergyDensity& w);
double dist_to_rotations(const Mat2& a);
/// Rotation maximizing tr(U^T A); identity if A has no conformal part.
Mat2 polar_rotation(const Mat2& a);

}  // namespace dislo
