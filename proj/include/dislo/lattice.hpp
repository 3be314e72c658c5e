#pragma once

#include "dislo/types.hpp"

#include <cstdint>
#include <vector>

namespace dislo {

/// Dislocation structure span_Z{u1, u2} \ {0} with a candidate cutoff.
struct DislocationLattice {
  Vec2 u1 = Vec2::UnitX();
  Vec2 u2 = Vec2::UnitY();
  double cutoff_K = 0.0;

  Mat2 basis() const {
    Mat2 b;
    b << u1, u2;
    return b;
  }
  void validate() const;
};

struct LatticeVector {
  int a = 0, b = 0;  // integer coefficients
  Vec2 v = Vec2::Zero();
};

struct SelfEnergyResult {
  double value = 0.0;
  std::vector<std::pair<LatticeVector, double>> decomposition;
};

/// Quadratic form v -> v^T A v on Burgers vectors.
inline double quad(const Mat2& a, const Vec2& v) { return v.dot(a * v); }

/// Nonzero lattice vectors with |v| < K in lexicographic order of (a, b).
std::vector<LatticeVector> enumerate_lattice(const DislocationLattice& l, std::size_t max_points = 1000000);

/// Certified cutoff K = max(I(u1), I(u2)) / (c1 c).
double derive_cutoff(const DislocationLattice& l, const Mat2& iquad);

/// Result of min c^T x, A x = b, x >= 0.
struct LinearProgramResult {
  bool feasible = false;
  double value = 0.0;
  Eigen::VectorXd x;
  std::vector<int> basis;
};

/// Dense two-phase simplex with Bland's rule.
LinearProgramResult simplex(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

SelfEnergyResult sigma(const DislocationLattice& l, const Mat2& iquad, const Vec2& v);

struct SigmaPropertyReport {
  int samples = 0;
  int homogeneity_violations = 0;
  int convexity_violations = 0;
  int upper_bound_violations = 0;
  double max_homogeneity_error = 0.0;
  double max_convexity_excess = 0.0;
  double max_upper_bound_excess = 0.0;
  bool ok() const { return homogeneity_violations + convexity_violations + upper_bound_violations == 0; }
};

SigmaPropertyReport verify_sigma_properties(const DislocationLattice& l, const Mat2& iquad, int samples,
                                            std::uint64_t seed);

/// Relative change of sigma(v) when the cutoff is doubled.
double cutoff_doubling_gap(const DislocationLattice& l, const Mat2& iquad, const std::vector<Vec2>& probes);

}  // namespace dislo
