#pragma once

#include "dislo/assembly.hpp"
#include "dislo/cell.hpp"
#include "dislo/density.hpp"
#include "dislo/lattice.hpp"
#include "dislo/solve.hpp"

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace dislo {

enum class NRule { Constant, Log, LogPower, Table };

struct RegimeParams {
  std::vector<double> eps;
  NRule rule = NRule::Log;
  double constant = 1.0;  // multiplier for every rule
  double power = 1.0;     // exponent for LogPower
  std::vector<double> table;

  double n_eps(std::size_t i) const;
  double h2(std::size_t i) const;
  /// subcritical / critical / supercritical from n_eps / log(1/eps)
  std::string label(std::size_t i) const;
  /// Throws invalid-input for malformed ladders.
  void validate() const;
  /// n eps and log n / log(1/eps) both decrease along the ladder.
  bool asymptotics_consistent() const;
};

/// Tabulated (parameter, values) rows plus fitted constants and flags, in insertion order.
struct ScalingReport {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, double>> fit;
  std::vector<std::pair<std::string, bool>> flags;

  double get(const std::string& key) const;
  bool flag(const std::string& key) const;
};

struct SweepOptions {
  CellResolution resolution{16, 64};
  MinimizeOptions minimize;
  int workers = 1;
};

ScalingReport single_scaling_sweep(const Vec2& direction, const std::vector<double>& magnitudes, double R,
                                   const EnergyDensity& w, const SweepOptions& opt = {});

ScalingReport cell_convergence_sweep(const Vec2& v, double delta, double R, const std::vector<double>& eps_ladder,
                                     const EnergyDensity& w, const SweepOptions& opt = {});

/// Rigidity probe on the cut annulus delta R < r < R for a sweep of |v|.
ScalingReport rigidity_sweep(const Vec2& direction, const std::vector<double>& magnitudes, double R, double delta,
                             const EnergyDensity& w, int trials, std::uint64_t seed, const SweepOptions& opt = {});

/// Linearization gap |E(f) - int W(beta)| / E(f) for single-dislocation minimizers.
ScalingReport linearization_sweep(const Vec2& v, const std::vector<double>& eps_ladder, double R,
                                  const EnergyDensity& w, const SweepOptions& opt = {});

using MatrixField = std::function<Mat2(const Vec2&)>;

/// Curl-constrained strain on a rectangle: J0 = -star grad(Phi), Laplace(Phi) = dmu/dx, Phi = 0 on the boundary.
struct LimitStrain {
  Mesh mesh;
  std::vector<Mat2> J;  // per element
  double energy = 0.0;  // int W(J0)
  int nx = 0, ny = 0;
  Rect domain;

  /// Element containing x (clamped to the rectangle).
  std::size_t locate(const Vec2& x) const;
  Mat2 at(const Vec2& x) const { return J[locate(x)]; }
  /// P1 interpolation of a nodal field.
  Vec2 interpolate(const std::vector<Vec2>& nodal, const Vec2& x) const;
};

LimitStrain limit_strain(const TargetMeasure& mu, const Rect& omega, const QuadraticForm& w, int n = 96);

struct RecoveryOptions {
  AssemblyResolution assembly;
  MinimizeOptions minimize;
  CellResolution cell{24, 128};  // per-ball lower bounds
  int limit_grid = 96;            // structured mesh per unit of the longer side for J0
  double s = 0.75;
  bool run_minimizer = true;
  int workers = 1;
};

struct GammaLimitRow {
  double eps = 0.0, n_eps = 0.0, h2 = 0.0;
  std::string regime;
  std::size_t atoms = 0;
  std::size_t elements = 0;
  double r_eps = 0.0, smear_radius = 0.0;
  double E_self = 0.0, E_elastic = 0.0, E_total = 0.0;           // recovery field, rescaled
  double M_self = 0.0, M_elastic = 0.0, M_total = 0.0;           // minimized, rescaled
  double lower = 0.0, lower_self = 0.0, lower_far = 0.0;         // rescaled
  double lower_half_r = 0.0;                                      // lower bound with r_eps halved
  double gap = 0.0;                                               // |E_total - E0| / E0
  double minimized_gap = 0.0;                                     // |M_total - E0| / E0
  double self_gap = 0.0;                                          // |E_self - target self| / target self
  int iterations = 0;
  bool converged = true;
  bool psi_clipped = false;
};

struct GammaLimitReport {
  std::vector<GammaLimitRow> rows;
  double target_elastic = 0.0;  // int W(J)
  double target_self = 0.0;     // int Sigma(dmu/d|mu|) d|mu|
  double target_total = 0.0;
  bool gap_decreasing = false;           // on the minimized energies
  bool recovery_gap_decreasing = false;  // on the recovery energies
  bool sandwich = false;
  double final_gap = 0.0;           // minimized
  double final_recovery_gap = 0.0;
};

struct RecoveryState {
  AssembledBody body;
  Configuration recovery;
  Configuration minimized;
  double r_eps = 0.0;
};

/**
 * @brief Recovery bodies and fields along the ladder with the self/elastic split, the minimized
 * energies and the lower-bound diagnostic. `J` null means J = J0; a zero lattice cutoff is derived.
 */
GammaLimitReport recovery_sequence(const Rect& omega, const TargetMeasure& mu, const RegimeParams& regime,
                                   const MatrixField& J, const Mat2& U, const DislocationLattice& lattice,
                                   const EnergyDensity& w, const RecoveryOptions& opt = {},
                                   std::vector<RecoveryState>* states = nullptr);

/// Region labels near_core (r < eps^s), ball (r < r_eps), far for an assembled body.
void label_regions(AssembledBody& b, double r_eps, double s);

/// r_eps = min(smear radius, n_eps^(-2/3)).
double ball_radius(const DislocationMeasure& m);

struct LowerBound {
  double self = 0.0;
  double far = 0.0;
  double total() const { return self + far; }
};

/// Per-ball cell minima plus the far-field quadratic minimum, not rescaled.
LowerBound liminf_lower_bound(const AssembledBody& b, double r_eps, const EnergyDensity& w, bool supercritical,
                              const CellResolution& cell_res = {24, 128});

struct LiminfReport {
  std::vector<double> eps, measured, lower;
  bool ok = true;
};

LiminfReport liminf_diagnostic(const std::vector<const AssembledBody*>& bodies,
                               const std::vector<const Configuration*>& configurations, const RegimeParams& regime,
                               const EnergyDensity& w, double tolerance = 0.0);

struct LimitDisplacement {
  int n = 32;
  Rect domain;
  std::vector<Mat2> J;  // coarse grid cells, row-major in y
  Mat2 U = Mat2::Identity();
  bool curl_target_zero = false;
  std::vector<double> weak_curl_residuals;
  double strain_bound = 0.0;  // discrete L2 norm of the rescaled strain
  double burgers_square_sum = 0.0;  // sum |v_i|^2 / n_eps
};

LimitDisplacement compactness_diagnostic(const AssembledBody& b, const Configuration& f, const RegimeParams& regime,
                                         std::size_t index, const TargetMeasure& mu, const EnergyDensity& w,
                                         int grid = 32);

/// Relative L2 distance between a coarse-grid strain and the cell averages of a reference field.
double coarse_l2_gap(const LimitDisplacement& d, const MatrixField& ref);

}  // namespace dislo
