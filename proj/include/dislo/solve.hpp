#pragma once

#include "dislo/density.hpp"
#include "dislo/mesh.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace dislo {

using Configuration = std::vector<Vec2>;

/**
 * @brief Triangulated body with a per-element implant Q in Cartesian chart coordinates.
 * Region labels index into region_names and drive the energy breakdown.
 */
struct Body {
  Mesh mesh;
  std::vector<Mat2> Q;
  std::vector<int> region;
  std::vector<std::string> region_names{"body"};

  // caches filled by finalize()
  std::vector<Mat2> Qinv;
  std::vector<double> volume;  // det Q |T|
  std::vector<Eigen::Matrix<double, 2, 3>> grads;

  /// Computes caches; throws corrupt-body when det Q <= 0 somewhere.
  void finalize();
  std::size_t size() const { return mesh.num_triangles(); }
};

/// Single dislocation with Burgers vector v centred at `center` on r_in < r < r_out.
Body model_body(const Vec2& v, const Vec2& center, double r_in, double r_out, int cells_per_decade, int n_theta,
                double angle0 = 0.0);

/// Edge cochain of the single-dislocation implant: e + v dtheta_e / 2pi.
Vec2 model_edge_value(const Vec2& v, const Vec2& center, const Vec2& a, const Vec2& b);

/// Implant of an element reproducing three edge values.
Mat2 element_from_edges(const Mesh& m, std::size_t t, const Vec2& q01, const Vec2& q02);

struct EnergyBreakdown {
  double total = 0.0;
  std::map<std::string, double> per_region;
  double distortion = 0.0;
};

EnergyBreakdown energy(const Body& body, const Configuration& f, const EnergyDensity& w, int workers = 1);

/// Total energy and its gradient with respect to vertex positions.
double energy_and_gradient(const Body& body, const Configuration& f, const EnergyDensity& w,
                           std::vector<Vec2>& grad, int workers = 1);

struct MinimizeOptions {
  double tol_g = 1e-8;   // relative to the energy scale
  double tol_e = 1e-12;
  int window = 10;
  int max_iter = 3000;
  int memory = 12;
  int workers = 1;
};

struct MinimizeResult {
  Configuration f;
  EnergyBreakdown energy;
  int iterations = 0;
  bool converged = false;
  std::vector<double> history;
};

MinimizeResult minimize(const Body& body, const EnergyDensity& w, const Configuration& initial,
                        const MinimizeOptions& opt = {});

/// Vertex positions of the identity chart.
Configuration identity_configuration(const Body& body);

struct RigidityReport {
  Mat2 U = Mat2::Identity();
  double lhs = 0.0;
  double rhs = 0.0;
  double ratio = 0.0;
  double slack = 0.0;
  bool degenerate = false;
};

RigidityReport best_rotation(const Body& body, const Configuration& f, int workers = 1);

/// lhs of a report evaluated at an arbitrary rotation.
double rotation_residual(const Body& body, const Configuration& f, const Mat2& U, int workers = 1);

struct FjmProbe {
  double worst_ratio = 0.0;
  std::vector<double> ratios;
};

/**
 * @brief Random smooth trial fields f = U0 (x + amp * sum of Fourier modes) on the body, with
 * ratio ||df Q^-1 - U||^2 / int dist^2 for each.
 */
FjmProbe uniform_fjm_probe(const Body& body, int trials, std::uint64_t seed, double amplitude_scale = 1.0,
                           int workers = 1);

Configuration random_trial_field(const Body& body, std::uint64_t seed, double amplitude);

}  // namespace dislo
