#pragma once

#include "dislo/assembly.hpp"
#include "dislo/cell.hpp"
#include "dislo/experiments.hpp"
#include "dislo/lattice.hpp"
#include "dislo/solve.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace dislo {

using Json = nlohmann::ordered_json;

void write_text(const std::string& path, const std::string& text);
std::string read_text(const std::string& path);

/// Two-space indented JSON with a trailing newline.
void write_json(const std::string& path, const Json& j);

/// CSV with a header row; numbers printed with 17 significant digits.
void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

/// Indexed text mesh: "v x y 0" and "f a b c" lines, 1-based.
void write_mesh(const std::string& path, const Mesh& m);
Mesh read_mesh(const std::string& path);

/// Row-major 2x2 per element as little-endian float64.
void write_matrices(const std::string& path, const std::vector<Mat2>& q);
std::vector<Mat2> read_matrices(const std::string& path);

void write_configuration(const std::string& path, const Configuration& f);

Json to_json(const Vec2& v);
Json to_json(const Mat2& a);
Json to_json(const CellResult& r);
Json to_json(const IzeroFit& f);
Json to_json(const SelfEnergyResult& s);
Json to_json(const SigmaPropertyReport& r);
Json to_json(const EnergyBreakdown& e);
Json to_json(const RigidityReport& r);
Json to_json(const DeviationReport& r);
Json to_json(const BurgersConvergence& b);
Json to_json(const ScalingReport& r);
Json to_json(const GammaLimitReport& r);
Json to_json(const LiminfReport& r);
Json to_json(const LimitDisplacement& d, bool with_field = false);
/// Measure and construction diagnostics of an assembled body.
Json summary_json(const AssembledBody& b);

}  // namespace dislo
