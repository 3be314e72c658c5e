#include "dislo/density.hpp"

#include <algorithm>
#include <cmath>

namespace dislo {

const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::OutsideManifold: return "outside-manifold";
    case ErrorKind::RegularityViolation: return "regularity-violation";
    case ErrorKind::CutoffTooLarge: return "cutoff-too-large";
    case ErrorKind::Internal: return "internal-error";
    case ErrorKind::SolverFailure: return "solver-failure";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::InvalidDomain: return "invalid-domain";
    case ErrorKind::ConstructionFailure: return "construction-failure";
    case ErrorKind::CorruptBody: return "corrupt-body";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::Inconsistency: return "inconsistency";
    case ErrorKind::Resolution: return "resolution-error";
    case ErrorKind::HypothesisViolation: return "hypothesis-violation";
    case ErrorKind::DegenerateField: return "degenerate-field";
  }
  return "unknown";
}

EnergyDensity EnergyDensity::isotropic(double mu, double lambda) {
  if (!(mu > 0.0) || !(lambda > -mu) || !std::isfinite(lambda))
    throw Error(ErrorKind::InvalidInput, "Lame parameters need mu > 0 and lambda > -mu");
  // nu = 1/2 only in the limit lambda -> infinity; guard the near-incompressible end.
  double nu = lambda / (2.0 * (lambda + mu));
  if (std::abs(nu - 0.5) < 1e-12) throw Error(ErrorKind::InvalidInput, "Poisson ratio 1/2 is not supported");
  return {DensityKind::Isotropic, mu, lambda};
}

std::pair<double, double> EnergyDensity::rotation_bounds() const {
  double a = mu() + lambda(), b = mu();
  return {std::min(a, b), std::max(a, b)};
}

QuadraticForm QuadraticForm::from_lame(double mu, double lambda) {
  QuadraticForm f;
  f.isotropic = true;
  f.mu = mu;
  f.lambda = lambda;
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  // mu |sym A|^2 = mu (a^2 + d^2 + (b + c)^2 / 2)
  m(0, 0) += mu;
  m(3, 3) += mu;
  m(1, 1) += mu / 2;
  m(2, 2) += mu / 2;
  m(1, 2) += mu / 2;
  m(2, 1) += mu / 2;
  // lambda/2 (a + d)^2
  m(0, 0) += lambda / 2;
  m(3, 3) += lambda / 2;
  m(0, 3) += lambda / 2;
  m(3, 0) += lambda / 2;
  f.coefficients = m;
  return f;
}

double QuadraticForm::operator()(const Mat2& a) const {
  Eigen::Vector4d x = vec(a);
  return x.dot(coefficients * x);
}

double QuadraticForm::bilinear(const Mat2& a, const Mat2& b) const { return vec(a).dot(coefficients * vec(b)); }

Mat2 QuadraticForm::gradient(const Mat2& a) const { return unvec(2.0 * coefficients * vec(a)); }

static void check_finite(const Mat2& a) {
  if (!a.allFinite()) throw Error(ErrorKind::InvalidInput, "matrix has non-finite entries");
}

double eval_density(const EnergyDensity& w, const Mat2& a) {
  check_finite(a);
  return density_value<double>(w.mu(), w.lambda(), a);
}

Mat2 density_gradient(const EnergyDensity& w, const Mat2& a) {
  return density_derivative<double>(w.mu(), w.lambda(), a);
}

QuadraticForm hessian_at_identity(const EnergyDensity& w) { return QuadraticForm::from_lame(w.mu(), w.lambda()); }

double dist_to_rotations(const Mat2& a) {
  check_finite(a);
  // signed singular values |p| + |q|, |p| - |q|
  auto c = detail::split<double>(a);
  double np = std::hypot(c.p1, c.p2), nq = std::hypot(c.q1, c.q2);
  double s1 = np + nq, s2 = np - nq;
  return std::sqrt((s1 - 1.0) * (s1 - 1.0) + (s2 - 1.0) * (s2 - 1.0));
}

Mat2 polar_rotation(const Mat2& a) {
  auto c = detail::split<double>(a);
  double n = std::hypot(c.p1, c.p2);
  if (!(n > 0.0)) return Mat2::Identity();
  Mat2 u;
  u << c.p1 / n, -c.p2 / n, c.p2 / n, c.p1 / n;
  return u;
}

}  // namespace dislo
