#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dislo {

using Vec2 = Eigen::Vector2d;
using Mat2 = Eigen::Matrix2d;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

enum class ErrorKind {
  InvalidInput,
  OutsideManifold,
  RegularityViolation,
  CutoffTooLarge,
  Internal,
  SolverFailure,
  Unsupported,
  InvalidDomain,
  ConstructionFailure,
  CorruptBody,
  Divergence,
  Inconsistency,
  Resolution,
  HypothesisViolation,
  DegenerateField,
};

const char* to_string(ErrorKind k);

/// Library error carrying a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

/// Counter-clockwise rotation by angle t.
inline Mat2 rotation(double t) {
  Mat2 r;
  r << std::cos(t), -std::sin(t), std::sin(t), std::cos(t);
  return r;
}

inline double cross(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

}  // namespace dislo
