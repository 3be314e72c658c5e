#pragma once

#include "dislo/density.hpp"
#include "dislo/mesh.hpp"
#include "dislo/solve.hpp"

#include <vector>

namespace dislo {

/**
 * @brief Closed-form strain of an isolated edge dislocation in an isotropic medium:
 * curl-free away from 0, circulation -v, divergence-free stress, homogeneous of degree -1.
 */
class SingularStrain {
 public:
  SingularStrain(const Vec2& v, double nu);

  Mat2 operator()(const Vec2& x) const;
  /// Single-valued displacement w with grad w = beta + v (x) grad(theta)/2pi.
  Vec2 regular_displacement(const Vec2& x) const;
  /// int_0^{2pi} W(beta(cos t, sin t)) dt, the prelogarithmic factor of the energy.
  double prelog_factor(const QuadraticForm& w, int samples = 4096) const;
  const Vec2& burgers() const { return v_; }
  double nu() const { return nu_; }

 private:
  Vec2 v_;
  double nu_;
  double b_;
  Mat2 rot_;
};

SingularStrain singular_strain(const Vec2& v, const QuadraticForm& w);

/// Prelogarithmic factor mu |v|^2 / (4 pi (1 - nu)).
double isotropic_prelog(const QuadraticForm& w, const Vec2& v);

/// (1/log(1/delta)) int_{B_1 \ B_delta} W(beta) by midpoint-in-r, trapezoid-in-angle quadrature.
double closed_form_cell_energy(const SingularStrain& beta, const QuadraticForm& w, double delta, int n_r = 400,
                               int n_theta = 256);

struct CellResolution {
  int cells_per_decade = 16;
  int n_theta = 64;
};

struct CellResult {
  Vec2 v = Vec2::Zero();
  double delta = 0.0;
  double scale = 1.0;
  double value_delta = 0.0;
  double value_zero_extrapolated = 0.0;
  std::size_t elements = 0;
  double galerkin_residual = 0.0;
  double max_curl = 0.0;
  double circulation_error = 0.0;
  Mesh mesh;
  std::vector<Mat2> beta;        // per element
  std::vector<Vec2> corrector;   // per vertex
};

/**
 * @brief Minimizes (1/log(1/delta)) int W(beta) over beta = -(1/2pi) v (x) dtheta + grad(u) on the
 * annulus scale * (B_1 \ B_delta), the mesh rotated by `angle`.
 */
CellResult solve_cell(const Vec2& v, double delta, const QuadraticForm& w, const CellResolution& res = {},
                      double scale = 1.0, double angle = 0.0);

struct IzeroFit {
  double izero = 0.0;
  double slope = 0.0;
  double residual = 0.0;
  bool monotone = true;
};

/// Least squares I_delta = I_0 + c / log(1/delta).
IzeroFit extrapolate_izero(const std::vector<double>& deltas, const std::vector<double>& values);
IzeroFit extrapolate_izero(const std::vector<CellResult>& results);

/// Symmetric form A with v^T A v fitted to the samples.
Mat2 fit_izero_form(const std::vector<Vec2>& vs, const std::vector<double>& values);

/// Model body of eps v on the annulus delta R < r < R.
Body cell_body(const Vec2& v, double eps, double delta, double R, const CellResolution& res = {});

/// (1 / eps^2 log(1/delta)) E(f) on a cell body.
double nonlinear_cell_energy(const Body& body, const Vec2& v, double eps, double delta, double R,
                             const EnergyDensity& w, const Configuration& f);

/// x + eps w_v(x - c): its differential is the implant plus eps beta_v.
Configuration singular_ansatz(const Body& body, const Vec2& v, double eps, double nu, const Vec2& center);

/// int W(df Q^-1 - I) over the elements whose centroid radius lies in [r_lo, r_hi).
double quadratic_energy_in(const Body& body, const Configuration& f, const QuadraticForm& w, const Vec2& center,
                           double r_lo, double r_hi);

struct NearCoreField {
  Configuration f;
  int ring = -1;               // chosen dyadic ring, -1 when the trace is kept
  double energy_window = 0.0;  // (1/eps^2 log(1/eps)) int over r > eps^s of W(df Q^-1 - I)
  double added_energy = 0.0;   // blended minus ansatz quadratic energy
};

/**
 * @brief Singular ansatz blended into `outer_trace` across the first dyadic ring where it beats
 * the trace. With `elements` set only those triangles and their vertices are touched.
 */
NearCoreField near_core_optimal_field(const Body& body, const Vec2& v, double eps, double s, double R,
                                      const Configuration& outer_trace, const QuadraticForm& w,
                                      const Vec2& center = Vec2::Zero(),
                                      const std::vector<int>* elements = nullptr);

}  // namespace dislo
