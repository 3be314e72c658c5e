#pragma once

#include "dislo/lattice.hpp"
#include "dislo/mesh.hpp"
#include "dislo/solve.hpp"

#include <functional>
#include <vector>

namespace dislo {

struct Rect {
  Vec2 lo = Vec2::Zero();
  Vec2 hi = Vec2::Ones();
  double width() const { return hi.x() - lo.x(); }
  double height() const { return hi.y() - lo.y(); }
  double distance_to_boundary(const Vec2& p) const {
    return std::min({p.x() - lo.x(), hi.x() - p.x(), p.y() - lo.y(), hi.y() - p.y()});
  }
};

/// One dislocation: position and unscaled lattice Burgers vector (the body carries eps * burgers).
struct Atom {
  Vec2 position = Vec2::Zero();
  Vec2 burgers = Vec2::Zero();
};

/// Target dislocation density dmu/dx, or an explicit atomic measure.
struct TargetMeasure {
  std::function<Vec2(const Vec2&)> density;
  double sup_norm = 0.0;
  std::vector<Atom> atoms;

  bool atomic() const { return !atoms.empty(); }
  static TargetMeasure zero();
  static TargetMeasure uniform(const Vec2& m);
};

struct DislocationMeasure {
  Rect domain;
  double eps = 0.0;
  double n_eps = 0.0;
  std::vector<Atom> atoms;
  double smear_radius = 0.0;    // a
  double square_size = 0.0;     // a_eps
  double min_separation = 0.0;
  double total_burgers = 0.0;   // sum |v_i|
  // meshing grid: one atom at the centre of a cell or an empty cell
  Vec2 origin = Vec2::Zero();
  double cell = 1.0;
  int nx = 1, ny = 1;
  std::vector<int> cell_atom;

  /// max_i eps |v_i|
  double b() const;
  double h_squared() const;
};

DislocationMeasure approximate_measure(const TargetMeasure& mu, const Rect& omega, double n_eps, double eps,
                                       const DislocationLattice& lattice, const Mat2& iquad);

struct AssemblyResolution {
  int per_side = 16;
  int cells_per_decade = 8;
  int core_rings = 3;
  double core_factor = 1.5;
  bool mollify = true;
  double poisson_tol = 1e-10;
  int workers = 1;
};

struct AssembledBody {
  DislocationMeasure measure;
  AssemblyResolution resolution;
  Body body;  // domain minus the core discs, with the implant
  std::vector<Mat2> alpha, beta, gamma;  // per body element
  std::vector<int> body_to_full;         // body element -> full mesh element

  Mesh full_mesh;  // including the filled cores
  std::vector<Vec2> potential;  // Poisson solution per full-mesh vertex, one component per Burgers axis
  std::vector<Vec2> source;     // smeared measure per full-mesh element (integral over the element)
  double poisson_energy = 0.0;  // ||mu~||^2 in H^-1
  std::vector<std::vector<Vec2>> core_loop_values;  // directed edge values along each core loop

  double min_det = 0.0;
  Vec2 min_det_at = Vec2::Zero();
  double max_closedness = 0.0;
  double max_circulation_error = 0.0;
  double max_gamma_loop_error = 0.0;
  double alpha_sup = 0.0, beta_sup = 0.0, gamma_sup = 0.0;
  int poisson_iterations = 0;
  int correction_iterations = 0;
};

AssembledBody build_implant(const DislocationMeasure& m, const AssemblyResolution& res = {});

struct DeviationReport {
  double near_max = 0.0, far_max = 0.0;
  double near_ratio = 0.0;  // max |Q^-1 - I| / (eps|v_i|/r_i + b/a^2)
  double far_ratio = 0.0;   // max |Q^-1 - I| / (b/a^2)
  double integral = 0.0;    // int |dZ - Q|^2 dVol
  double integral_bound = 0.0;
  double h2 = 0.0;
  double integral_over_h2 = 0.0;
  double lip_dZ = 1.0, lip_dZinv = 1.0;
};

DeviationReport deviation_report(const AssembledBody& b);

using VectorField = std::function<Vec2(const Vec2&)>;

/// Sum over core loops of int <Q(tangent), psi>.
double torsion_functional(const AssembledBody& b, const VectorField& psi);

/// int <psi, dmu~> from the smeared sources.
double smeared_pairing(const AssembledBody& b, const VectorField& psi);

/// int_Omega <psi, dmu/dx> by tensor Gauss-Legendre.
double target_pairing(const TargetMeasure& mu, const Rect& omega, const VectorField& psi, int cells = 16);

struct BurgersConvergence {
  std::vector<double> eps;
  std::vector<std::vector<double>> gaps;          // [field][body]
  std::vector<std::vector<double>> smeared_gaps;  // [field][body]
  std::vector<double> targets;
  std::vector<bool> monotone;
  double final_max_gap = 0.0;
};

BurgersConvergence burgers_convergence_check(const std::vector<const AssembledBody*>& bodies,
                                             const TargetMeasure& mu, const std::vector<VectorField>& fields);

/// Test fields vanishing on the boundary of the unit square.
std::vector<VectorField> standard_test_fields(const Rect& omega);

}  // namespace dislo
