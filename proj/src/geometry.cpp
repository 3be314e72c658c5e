#include "dislo/geometry.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>

namespace dislo {

namespace {

void require_inside(const ModelManifold& m, double r) {
  if (!(r >= m.r_inner * (1.0 - 1e-14)) || !std::isfinite(r))
    throw Error(ErrorKind::OutsideManifold, "r below the core radius");
}

// 8-point Gauss-Legendre on [0, 1]
constexpr std::array<double, 8> kGLx = {0.0198550717512319, 0.1016667612931866, 0.2372337950418355,
                                        0.4082826787521751, 0.5917173212478249, 0.7627662049581645,
                                        0.8983332387068134, 0.9801449282487681};
constexpr std::array<double, 8> kGLw = {0.0506142681451881, 0.1111905172266872, 0.1568533229389436,
                                        0.1813418916891810, 0.1813418916891810, 0.1568533229389436,
                                        0.1111905172266872, 0.0506142681451881};

double wrap_angle(double t) { return std::remainder(t, kTwoPi); }

}  // namespace

ModelManifold ModelManifold::make(const Vec2& v, double r_outer) {
  if (!v.allFinite()) throw Error(ErrorKind::InvalidInput, "Burgers vector not finite");
  double ri = v.norm();
  if (!(r_outer > ri)) throw Error(ErrorKind::InvalidInput, "outer radius must exceed |v|");
  return {v, ri, r_outer};
}

Mat2 chart_differential(double r, double phi) {
  Mat2 d;
  d << std::cos(phi), -r * std::sin(phi), std::sin(phi), r * std::cos(phi);
  return d;
}

Mat2 frame_at(const ModelManifold& m, double r, double phi) {
  require_inside(m, r);
  Mat2 q = chart_differential(r, phi);
  q.col(1) += m.burgers / kTwoPi;
  return q;
}

Mat2 metric_at(const ModelManifold& m, double r, double phi) {
  require_inside(m, r);
  const double v1 = m.burgers.x(), v2 = m.burgers.y();
  const double c = std::cos(phi), s = std::sin(phi);
  Mat2 g;
  g(0, 0) = 1.0;
  g(0, 1) = g(1, 0) = (v1 * c + v2 * s) / kTwoPi;
  g(1, 1) = r * r + (r / kPi) * (-v1 * s + v2 * c) + m.burgers.squaredNorm() / (kTwoPi * kTwoPi);
  return g;
}

Vec2 chart_map(const ModelManifold& m, double r, double phi) {
  require_inside(m, r);
  return {r * std::cos(phi), r * std::sin(phi)};
}

double chart_deviation(const ModelManifold& m, double r, double phi) {
  Mat2 q = frame_at(m, r, phi);
  Mat2 d = (chart_differential(r, phi) - q) * q.inverse();
  return Eigen::JacobiSVD<Mat2>(d).singularValues()(0);
}

std::pair<double, double> chart_bilipschitz(const ModelManifold& m, double r, double phi) {
  Mat2 q = frame_at(m, r, phi);
  Mat2 dz = chart_differential(r, phi) * q.inverse();
  auto sv = Eigen::JacobiSVD<Mat2>(dz).singularValues();
  return {sv(0), 1.0 / sv(1)};
}

Mat2 parallel_coframe(const ModelManifold& m, double r, double phi) { return frame_at(m, r, phi); }

std::pair<double, double> core_distance_bounds(const ModelManifold& m, double r) {
  require_inside(m, r);
  double b = m.r_inner;
  return {(1.0 - 1.0 / kTwoPi) * r + b / kTwoPi, r};
}

Vec2 integrate_frame_segment(const ModelManifold& m, const Vec2& x0, const Vec2& x1, double* winding_angle) {
  // pieces short enough for the angle to vary slowly on each
  Vec2 d = x1 - x0;
  double len = d.norm();
  double t_near = len > 0.0 ? std::clamp(-x0.dot(d) / (len * len), 0.0, 1.0) : 0.0;
  double dmin = std::max((x0 + t_near * d).norm(), m.r_inner);
  if (!(dmin > 0.0)) throw Error(ErrorKind::OutsideManifold, "segment passes through the origin");
  int pieces = std::clamp(static_cast<int>(std::ceil(8.0 * len / dmin)), 1, 1 << 16);
  Vec2 total = Vec2::Zero();
  double dphi_total = 0.0;
  for (int k = 0; k < pieces; ++k) {
    for (std::size_t g = 0; g < kGLx.size(); ++g) {
      double t = (k + kGLx[g]) / pieces;
      Vec2 x = x0 + t * d;
      double r = x.norm(), phi = std::atan2(x.y(), x.x());
      // chain rule: dr/dt, dphi/dt along the segment
      Vec2 rt(x.dot(d) / r, cross(x, d) / (r * r));
      double w = kGLw[g] / pieces;
      total += w * frame_at(m, r, phi) * rt;
      dphi_total += w * rt.y();
    }
  }
  if (winding_angle) *winding_angle += dphi_total;
  return total;
}

Development develop(const ModelManifold& m, double cut_angle, const std::vector<double>& radii, int n_phi) {
  if (radii.empty() || n_phi < 2) throw Error(ErrorKind::InvalidInput, "develop needs radii and n_phi >= 2");
  for (double r : radii) require_inside(m, r);
  Development out;
  out.cut_angle = cut_angle;
  const double r0 = radii.front();
  auto radial = [&](double r) {
    // integral of the d/dr column from r0 to r along phi = cut_angle
    Vec2 s = Vec2::Zero();
    for (std::size_t g = 0; g < kGLx.size(); ++g) {
      double rr = r0 + kGLx[g] * (r - r0);
      s += kGLw[g] * (r - r0) * frame_at(m, rr, cut_angle).col(0);
    }
    return s;
  };
  auto angular = [&](double r, double a, double b) {
    // integral of the d/dphi column over [a, b], composite rule
    int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(b - a) / (kPi / 16))));
    Vec2 s = Vec2::Zero();
    for (int k = 0; k < pieces; ++k)
      for (std::size_t g = 0; g < kGLx.size(); ++g) {
        double t = a + (k + kGLx[g]) * (b - a) / pieces;
        s += kGLw[g] * (b - a) / pieces * frame_at(m, r, t).col(1);
      }
    return s;
  };
  Vec2 jsum = Vec2::Zero();
  for (double r : radii) {
    Vec2 base = radial(r);
    Vec2 prev = base;
    double prev_phi = cut_angle;
    for (int j = 0; j < n_phi; ++j) {
      double phi = cut_angle + kTwoPi * j / n_phi;  // phi = cut is taken from the ccw side
      Vec2 f = prev + angular(r, prev_phi, phi);
      out.samples.push_back({r, wrap_angle(phi), f});
      prev = f;
      prev_phi = phi;
    }
    Vec2 end = prev + angular(r, prev_phi, cut_angle + kTwoPi);
    out.cut_jump.push_back(end - base);
    jsum += end - base;
  }
  out.mean_jump = jsum / static_cast<double>(radii.size());
  return out;
}

RegularBoundaryReport check_regular_boundary(const ModelManifold& m, int samples) {
  const double b = m.r_inner;
  RegularBoundaryReport rep;
  if (b == 0.0) {
    rep.distance_inclusion = rep.isometric_inclusion = rep.metric_equivalence = true;
    rep.equivalence_constant = 1.0;
    return rep;
  }
  if (m.r_outer < 4.0 * b) throw Error(ErrorKind::InvalidInput, "regularity check needs R >= 4|v|");
  // {frak r < 2|v|} is inside A = {r <= 3|v|}: use the lower bound of the bracket.
  double lo_coef = 1.0 - 1.0 / kTwoPi;
  rep.inclusion_radius = (2.0 * b - b / kTwoPi) / lo_coef;
  bool sub = rep.inclusion_radius <= 3.0 * b;
  // and A lies within frak r <= 3|v| + |v| through the upper bound.
  bool sup = core_distance_bounds(m, 3.0 * b).second <= 4.0 * b;
  rep.distance_inclusion = sub && sup;
  rep.isometric_inclusion = m.r_outer >= 4.0 * b;
  // Lipschitz comparison with the flat annulus B_{2|v|} \ B_{|v|} via rho = (r + |v|) / 2.
  double worst = 1.0;
  for (int i = 0; i <= samples; ++i) {
    double r = b + 2.0 * b * i / samples;
    for (int j = 0; j < samples; ++j) {
      double phi = kTwoPi * j / samples;
      Mat2 g = metric_at(m, r, phi);
      double rho = 0.5 * (r + b);
      Mat2 ge;  // pulled-back flat metric in (r, phi)
      ge << 0.25, 0.0, 0.0, rho * rho;
      Eigen::GeneralizedSelfAdjointEigenSolver<Mat2> es(g, ge);
      double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(1);
      worst = std::max({worst, std::sqrt(lmax), 1.0 / std::sqrt(lmin)});
    }
  }
  rep.equivalence_constant = worst;
  rep.metric_equivalence = worst <= 10.0;
  if (!rep.ok()) {
    throw Error(ErrorKind::RegularityViolation,
                "regular boundary check failed (equivalence constant " + std::to_string(worst) + ")");
  }
  return rep;
}

}  // namespace dislo
