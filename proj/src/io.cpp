#include "dislo/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace dislo {

namespace {

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
  std::ofstream out(path, mode);
  if (!out) throw Error(ErrorKind::InvalidInput, "cannot write " + path);
  return out;
}

std::string num(double x) {
  std::ostringstream s;
  s << std::setprecision(17) << x;
  return s.str();
}

std::uint64_t to_le(std::uint64_t x) {
  if constexpr (std::endian::native == std::endian::little) return x;
  std::uint64_t y = 0;
  for (int i = 0; i < 8; ++i) y |= ((x >> (8 * i)) & 0xffu) << (8 * (7 - i));
  return y;
}

Json columns_json(const std::vector<std::string>& cols, const std::vector<std::vector<double>>& rows) {
  Json arr = Json::array();
  for (const auto& r : rows) {
    Json o = Json::object();
    for (std::size_t c = 0; c < cols.size() && c < r.size(); ++c) o[cols[c]] = r[c];
    arr.push_back(o);
  }
  return arr;
}

}  // namespace

void write_text(const std::string& path, const std::string& text) {
  auto out = open_out(path);
  out << text;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const std::string& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  auto out = open_out(path);
  for (std::size_t c = 0; c < columns.size(); ++c) out << (c ? "," : "") << columns[c];
  out << "\n";
  for (const auto& r : rows) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << num(r[c]);
    out << "\n";
  }
}

void write_mesh(const std::string& path, const Mesh& m) {
  auto out = open_out(path);
  for (const auto& v : m.vertices) out << "v " << num(v.x()) << " " << num(v.y()) << " 0\n";
  for (const auto& t : m.triangles) out << "f " << t[0] + 1 << " " << t[1] + 1 << " " << t[2] + 1 << "\n";
}

Mesh read_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read " + path);
  Mesh m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream s(line);
    std::string tag;
    if (!(s >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x, y, z;
      if (!(s >> x >> y >> z)) throw Error(ErrorKind::InvalidInput, path + ":" + std::to_string(lineno) + ": bad vertex");
      m.vertices.emplace_back(x, y);
    } else if (tag == "f") {
      int a, b, c;
      if (!(s >> a >> b >> c)) throw Error(ErrorKind::InvalidInput, path + ":" + std::to_string(lineno) + ": bad face");
      m.triangles.push_back({a - 1, b - 1, c - 1});
    } else {
      throw Error(ErrorKind::InvalidInput, path + ":" + std::to_string(lineno) + ": unknown record " + tag);
    }
  }
  const int nv = static_cast<int>(m.vertices.size());
  for (const auto& t : m.triangles)
    for (int k : t)
      if (k < 0 || k >= nv) throw Error(ErrorKind::InvalidInput, path + ": face index out of range");
  m.core.assign(m.triangles.size(), 0);
  m.site.assign(m.triangles.size(), -1);
  return m;
}

void write_matrices(const std::string& path, const std::vector<Mat2>& q) {
  auto out = open_out(path, std::ios::out | std::ios::binary);
  for (const auto& a : q) {
    const double v[4] = {a(0, 0), a(0, 1), a(1, 0), a(1, 1)};
    for (double x : v) {
      std::uint64_t u = to_le(std::bit_cast<std::uint64_t>(x));
      out.write(reinterpret_cast<const char*>(&u), 8);
    }
  }
}

std::vector<Mat2> read_matrices(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::InvalidInput, "cannot read " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (buf.size() % 32 != 0) throw Error(ErrorKind::InvalidInput, path + ": size is not a multiple of 32 bytes");
  std::vector<Mat2> q(buf.size() / 32);
  for (std::size_t i = 0; i < q.size(); ++i) {
    double v[4];
    for (int k = 0; k < 4; ++k) {
      std::uint64_t u;
      std::memcpy(&u, buf.data() + 32 * i + 8 * k, 8);
      v[k] = std::bit_cast<double>(to_le(u));
    }
    q[i] << v[0], v[1], v[2], v[3];
  }
  return q;
}

void write_configuration(const std::string& path, const Configuration& f) {
  std::vector<std::vector<double>> rows;
  rows.reserve(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) rows.push_back({static_cast<double>(i + 1), f[i].x(), f[i].y()});
  write_csv(path, {"vertex", "x", "y"}, rows);
}

Json to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }

Json to_json(const Mat2& a) { return Json::array({Json::array({a(0, 0), a(0, 1)}), Json::array({a(1, 0), a(1, 1)})}); }

Json to_json(const CellResult& r) {
  Json j;
  j["v"] = to_json(r.v);
  j["delta"] = r.delta;
  j["scale"] = r.scale;
  j["value_delta"] = r.value_delta;
  j["value_zero_extrapolated"] = r.value_zero_extrapolated;
  j["elements"] = r.elements;
  j["galerkin_residual"] = r.galerkin_residual;
  j["max_curl"] = r.max_curl;
  j["circulation_error"] = r.circulation_error;
  return j;
}

Json to_json(const IzeroFit& f) {
  Json j;
  j["izero"] = f.izero;
  j["slope"] = f.slope;
  j["residual"] = f.residual;
  j["monotone"] = f.monotone;
  return j;
}

Json to_json(const SelfEnergyResult& s) {
  Json j;
  j["value"] = s.value;
  Json d = Json::array();
  for (const auto& [lv, w] : s.decomposition) {
    Json e;
    e["coefficients"] = Json::array({lv.a, lv.b});
    e["vector"] = to_json(lv.v);
    e["weight"] = w;
    d.push_back(e);
  }
  j["decomposition"] = d;
  return j;
}

Json to_json(const SigmaPropertyReport& r) {
  Json j;
  j["samples"] = r.samples;
  j["homogeneity_violations"] = r.homogeneity_violations;
  j["convexity_violations"] = r.convexity_violations;
  j["upper_bound_violations"] = r.upper_bound_violations;
  j["max_homogeneity_error"] = r.max_homogeneity_error;
  j["max_convexity_excess"] = r.max_convexity_excess;
  j["max_upper_bound_excess"] = r.max_upper_bound_excess;
  j["ok"] = r.ok();
  return j;
}

Json to_json(const EnergyBreakdown& e) {
  Json j;
  j["total"] = e.total;
  Json p = Json::object();
  for (const auto& [k, v] : e.per_region) p[k] = v;
  j["per_region"] = p;
  j["distortion"] = e.distortion;
  return j;
}

Json to_json(const RigidityReport& r) {
  Json j;
  j["U"] = to_json(r.U);
  j["lhs"] = r.lhs;
  j["rhs"] = r.rhs;
  j["ratio"] = r.ratio;
  j["slack"] = r.slack;
  j["degenerate"] = r.degenerate;
  return j;
}

Json to_json(const DeviationReport& r) {
  Json j;
  j["near_max"] = r.near_max;
  j["far_max"] = r.far_max;
  j["near_ratio"] = r.near_ratio;
  j["far_ratio"] = r.far_ratio;
  j["integral"] = r.integral;
  j["integral_bound"] = r.integral_bound;
  j["h2"] = r.h2;
  j["integral_over_h2"] = r.integral_over_h2;
  j["lip_dZ"] = r.lip_dZ;
  j["lip_dZinv"] = r.lip_dZinv;
  return j;
}

Json to_json(const BurgersConvergence& b) {
  Json j;
  j["eps"] = b.eps;
  j["targets"] = b.targets;
  j["gaps"] = b.gaps;
  j["smeared_gaps"] = b.smeared_gaps;
  Json m = Json::array();
  for (bool x : b.monotone) m.push_back(x);
  j["monotone"] = m;
  j["final_max_gap"] = b.final_max_gap;
  return j;
}

Json to_json(const ScalingReport& r) {
  Json j;
  j["name"] = r.name;
  j["columns"] = r.columns;
  j["rows"] = columns_json(r.columns, r.rows);
  Json f = Json::object();
  for (const auto& [k, v] : r.fit) f[k] = v;
  j["fit"] = f;
  Json g = Json::object();
  for (const auto& [k, v] : r.flags) g[k] = v;
  j["flags"] = g;
  return j;
}

Json to_json(const GammaLimitReport& r) {
  Json j;
  Json t;
  t["elastic"] = r.target_elastic;
  t["self"] = r.target_self;
  t["total"] = r.target_total;
  j["targets"] = t;
  Json rows = Json::array();
  for (const auto& x : r.rows) {
    Json o;
    o["eps"] = x.eps;
    o["n_eps"] = x.n_eps;
    o["h2"] = x.h2;
    o["regime"] = x.regime;
    o["atoms"] = x.atoms;
    o["elements"] = x.elements;
    o["smear_radius"] = x.smear_radius;
    o["r_eps"] = x.r_eps;
    o["recovery"] = {{"self", x.E_self}, {"elastic", x.E_elastic}, {"total", x.E_total}};
    o["minimized"] = {{"self", x.M_self}, {"elastic", x.M_elastic}, {"total", x.M_total}};
    o["lower_bound"] = {{"self", x.lower_self}, {"far", x.lower_far}, {"total", x.lower}, {"half_radius", x.lower_half_r}};
    o["gap"] = x.gap;
    o["minimized_gap"] = x.minimized_gap;
    o["self_gap"] = x.self_gap;
    o["iterations"] = x.iterations;
    o["converged"] = x.converged;
    o["psi_clipped"] = x.psi_clipped;
    rows.push_back(o);
  }
  j["rows"] = rows;
  j["gap_decreasing"] = r.gap_decreasing;
  j["recovery_gap_decreasing"] = r.recovery_gap_decreasing;
  j["sandwich"] = r.sandwich;
  j["final_gap"] = r.final_gap;
  j["final_recovery_gap"] = r.final_recovery_gap;
  return j;
}

Json to_json(const LiminfReport& r) {
  Json j;
  j["eps"] = r.eps;
  j["measured"] = r.measured;
  j["lower"] = r.lower;
  j["ok"] = r.ok;
  return j;
}

Json to_json(const LimitDisplacement& d, bool with_field) {
  Json j;
  j["grid"] = d.n;
  j["U"] = to_json(d.U);
  j["curl_target"] = d.curl_target_zero ? "zero" : "-mu";
  j["weak_curl_residuals"] = d.weak_curl_residuals;
  j["strain_bound"] = d.strain_bound;
  j["burgers_square_sum"] = d.burgers_square_sum;
  if (with_field) {
    Json f = Json::array();
    for (const auto& a : d.J) f.push_back(Json::array({a(0, 0), a(0, 1), a(1, 0), a(1, 1)}));
    j["J"] = f;
  }
  return j;
}

Json summary_json(const AssembledBody& b) {
  const auto& m = b.measure;
  Json j;
  Json meas;
  meas["eps"] = m.eps;
  meas["n_eps"] = m.n_eps;
  meas["atoms"] = m.atoms.size();
  meas["smear_radius"] = m.smear_radius;
  meas["square_size"] = m.square_size;
  meas["min_separation"] = m.atoms.size() > 1 ? Json(m.min_separation) : Json(nullptr);
  meas["total_burgers"] = m.total_burgers;
  meas["max_core_burgers"] = m.b();
  meas["h2"] = m.h_squared();
  j["measure"] = meas;
  Json mesh;
  mesh["vertices"] = b.body.mesh.num_vertices();
  mesh["elements"] = b.body.size();
  mesh["cores"] = b.body.mesh.hole_loops.size();
  j["mesh"] = mesh;
  Json c;
  c["min_det"] = b.min_det;
  c["min_det_at"] = to_json(b.min_det_at);
  c["max_closedness"] = b.max_closedness;
  c["max_circulation_error"] = b.max_circulation_error;
  c["max_gamma_loop_error"] = b.max_gamma_loop_error;
  c["alpha_sup"] = b.alpha_sup;
  c["beta_sup"] = b.beta_sup;
  c["gamma_sup"] = b.gamma_sup;
  c["poisson_energy"] = b.poisson_energy;
  c["poisson_iterations"] = b.poisson_iterations;
  c["correction_iterations"] = b.correction_iterations;
  j["checks"] = c;
  return j;
}

}  // namespace dislo
