#pragma once

#include "dislo/types.hpp"

#include <utility>
#include <vector>

namespace dislo {

/**
 * @brief Single-dislocation model body in polar coordinates (r, phi), r in [|v|, R].
 *
 * The frame is Q = dx (x) e1 + dy (x) e2 + (dphi / 2pi) (x) v, written here as the
 * 2x2 matrix whose columns are the images of d/dr and d/dphi.
 */
struct ModelManifold {
  Vec2 burgers = Vec2::Zero();
  double r_inner = 0.0;
  double r_outer = 1.0;

  static ModelManifold make(const Vec2& v, double r_outer);
};

Mat2 frame_at(const ModelManifold& m, double r, double phi);
Mat2 metric_at(const ModelManifold& m, double r, double phi);
Vec2 chart_map(const ModelManifold& m, double r, double phi);
/// Differential of the chart map in the (r, phi) basis.
Mat2 chart_differential(double r, double phi);

/// Operator norm of dZ - Q from the body metric to the Euclidean plane.
double chart_deviation(const ModelManifold& m, double r, double phi);
/// Operator norms of dZ and its inverse with respect to the body metric.
std::pair<double, double> chart_bilipschitz(const ModelManifold& m, double r, double phi);

/// Parallel orthonormal coframe nu^1, nu^2 as rows (components along dr, dphi).
Mat2 parallel_coframe(const ModelManifold& m, double r, double phi);

/// Bracket (lower, upper) for distance-to-core plus |v|.
std::pair<double, double> core_distance_bounds(const ModelManifold& m, double r);

/// Integral of the frame along the Cartesian segment x0 -> x1 (both outside the core).
/// The angle change along the segment is added to `winding_angle` when non-null.
Vec2 integrate_frame_segment(const ModelManifold& m, const Vec2& x0, const Vec2& x1,
                             double* winding_angle = nullptr);

struct DevelopedSample {
  double r, phi;
  Vec2 f;
};

struct Development {
  double cut_angle = 0.0;
  std::vector<DevelopedSample> samples;  // r-major, phi increasing from the cut
  std::vector<Vec2> cut_jump;            // per radius: f(phi -> cut + 2pi) - f(cut)
  Vec2 mean_jump = Vec2::Zero();
};

/// Planar immersion f = integral of the frame along radial-then-angular paths
/// starting at (radii.front(), cut_angle); samples avoid the cut from the ccw side.
Development develop(const ModelManifold& m, double cut_angle, const std::vector<double>& radii, int n_phi);

struct RegularBoundaryReport {
  bool distance_inclusion = false;
  bool isometric_inclusion = false;
  bool metric_equivalence = false;
  double inclusion_radius = 0.0;     // largest r with lower bound <= 2|v|
  double equivalence_constant = 0.0;
  bool ok() const { return distance_inclusion && isometric_inclusion && metric_equivalence; }
};

/// Checks the annulus {|v| <= r <= 3|v|} against the regular inner-boundary conditions.
/// Throws regularity-violation when a condition fails.
RegularBoundaryReport check_regular_boundary(const ModelManifold& m, int samples = 64);

}  // namespace dislo
