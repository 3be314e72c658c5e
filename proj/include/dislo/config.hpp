#pragma once

#include "dislo/assembly.hpp"
#include "dislo/cell.hpp"
#include "dislo/experiments.hpp"
#include "dislo/io.hpp"

#include <optional>
#include <string>

namespace dislo {

/// Invalid configuration value with its source line (1-based, 0 if unknown) and dotted field path.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& source, int line, const std::string& field, const std::string& what);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

struct Tolerances {
  double tol_g = 1e-8;
  double tol_e = 1e-12;
  int max_iter = 3000;
  double poisson_tol = 1e-10;
  double gap_target = 0.2;
  CellResolution cell{16, 64};
};

struct Config {
  EnergyDensity density = EnergyDensity::isotropic(1.0, 1.0);
  DislocationLattice lattice;
  std::optional<Mat2> lattice_iquad;  // overrides the isotropic self-energy form
  Rect domain;
  AssemblyResolution assembly;
  std::string measure_kind = "uniform";
  Vec2 measure_density = Vec2::UnitX();
  std::vector<Atom> atoms;
  double eps = 1e-3;
  double n_eps = 100.0;
  RegimeParams regime{{1e-2, 3e-3, 1e-3}, NRule::Log, 1.0, 1.0, {}};
  Tolerances tolerances;

  TargetMeasure target() const;
  QuadraticForm quadratic() const { return hessian_at_identity(density); }
  /// Self-energy form: the configured one, else from the isotropic density.
  Mat2 iquad() const;
  /// Lattice with the cutoff derived when the configured one is zero.
  DislocationLattice resolved_lattice() const;
  MinimizeOptions minimize_options(int workers) const;
  Json to_json() const;
};

/// Parses and validates; `source` names the input in error messages.
Config parse_config(const std::string& text, const std::string& source = "<config>");
Config load_config(const std::string& path);
/// Fully populated default configuration as JSON text.
std::string default_config_text();

}  // namespace dislo
