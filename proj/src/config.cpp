#include "dislo/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace dislo {

ConfigError::ConfigError(const std::string& source, int line, const std::string& field, const std::string& what)
    : Error(ErrorKind::InvalidInput,
            source + (line > 0 ? ":" + std::to_string(line) : std::string()) +
                (field.empty() ? std::string() : ": field '" + field + "'") + ": " + what),
      line_(line),
      field_(field) {}

namespace {

int line_at(const std::string& text, std::size_t pos) {
  pos = std::min(pos, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(pos), '\n'));
}

// Walks the dotted path through the raw text, one quoted key at a time.
int line_of(const std::string& text, const std::string& path) {
  std::size_t pos = 0;
  bool found = false;
  std::size_t start = 0;
  while (start <= path.size()) {
    std::size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    auto br = key.find('[');
    if (br != std::string::npos) key = key.substr(0, br);
    std::size_t p = text.find("\"" + key + "\"", pos);
    if (p == std::string::npos) break;
    pos = p;
    found = true;
    if (dot == std::string::npos) break;
    start = dot + 1;
  }
  return found ? line_at(text, pos) : 0;
}

class Reader {
 public:
  Reader(const std::string& text, const std::string& source) : text_(text), source_(source) {}

  [[noreturn]] void fail(const std::string& field, const std::string& what) const {
    throw ConfigError(source_, line_of(text_, field), field, what);
  }

  void only(const Json& obj, const std::string& path, std::initializer_list<const char*> keys) const {
    if (!obj.is_object()) fail(path, "must be an object");
    std::set<std::string> ok(keys.begin(), keys.end());
    for (auto it = obj.begin(); it != obj.end(); ++it)
      if (!ok.count(it.key())) fail(path + "." + it.key(), "unknown key");
  }

  double number(const Json& obj, const std::string& path, const char* key, double fallback) const {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_number()) fail(path + "." + key, "must be a number");
    double x = v.get<double>();
    if (!std::isfinite(x)) fail(path + "." + key, "must be finite");
    return x;
  }

  int integer(const Json& obj, const std::string& path, const char* key, int fallback) const {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_number_integer()) fail(path + "." + key, "must be an integer");
    return v.get<int>();
  }

  bool boolean(const Json& obj, const std::string& path, const char* key, bool fallback) const {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_boolean()) fail(path + "." + key, "must be true or false");
    return obj.at(key).get<bool>();
  }

  std::string string(const Json& obj, const std::string& path, const char* key, const std::string& fallback) const {
    if (!obj.contains(key)) return fallback;
    if (!obj.at(key).is_string()) fail(path + "." + key, "must be a string");
    return obj.at(key).get<std::string>();
  }

  Vec2 vec(const Json& v, const std::string& field) const {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      fail(field, "must be an array of two numbers");
    return {v[0].get<double>(), v[1].get<double>()};
  }

  Vec2 vec(const Json& obj, const std::string& path, const char* key, const Vec2& fallback) const {
    if (!obj.contains(key)) return fallback;
    return vec(obj.at(key), path + "." + key);
  }

  std::vector<double> numbers(const Json& obj, const std::string& path, const char* key,
                              const std::vector<double>& fallback) const {
    if (!obj.contains(key)) return fallback;
    const Json& v = obj.at(key);
    if (!v.is_array()) fail(path + "." + key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
      if (!x.is_number()) fail(path + "." + key, "must be an array of numbers");
      out.push_back(x.get<double>());
    }
    return out;
  }

 private:
  const std::string& text_;
  std::string source_;
};

}  // namespace

TargetMeasure Config::target() const {
  if (measure_kind == "zero") return TargetMeasure::zero();
  if (measure_kind == "atoms") {
    TargetMeasure t;
    t.atoms = atoms;
    t.density = [](const Vec2&) { return Vec2(Vec2::Zero()); };
    return t;
  }
  return TargetMeasure::uniform(measure_density);
}

Mat2 Config::iquad() const {
  if (lattice_iquad) return *lattice_iquad;
  return isotropic_prelog(quadratic(), Vec2::UnitX()) * Mat2::Identity();
}

DislocationLattice Config::resolved_lattice() const {
  DislocationLattice l = lattice;
  if (!(l.cutoff_K > 0.0)) l.cutoff_K = derive_cutoff(l, iquad());
  return l;
}

MinimizeOptions Config::minimize_options(int workers) const {
  MinimizeOptions m;
  m.tol_g = tolerances.tol_g;
  m.tol_e = tolerances.tol_e;
  m.max_iter = tolerances.max_iter;
  m.workers = workers;
  return m;
}

Json Config::to_json() const {
  Json j;
  Json d;
  d["kind"] = density.kind == DensityKind::Isotropic ? "isotropic" : "dist_squared";
  d["lame_mu"] = density.mu();
  d["lame_lambda"] = density.lambda();
  j["density"] = d;
  Json l;
  l["u1"] = dislo::to_json(lattice.u1);
  l["u2"] = dislo::to_json(lattice.u2);
  l["cutoff"] = lattice.cutoff_K;
  if (lattice_iquad) l["iquad"] = dislo::to_json(*lattice_iquad);
  j["lattice"] = l;
  Json dom;
  dom["lo"] = dislo::to_json(domain.lo);
  dom["hi"] = dislo::to_json(domain.hi);
  dom["mesh"] = {{"per_side", assembly.per_side},
                 {"cells_per_decade", assembly.cells_per_decade},
                 {"core_rings", assembly.core_rings},
                 {"core_factor", assembly.core_factor},
                 {"mollify", assembly.mollify}};
  j["domain"] = dom;
  Json m;
  m["kind"] = measure_kind;
  m["density"] = dislo::to_json(measure_density);
  Json a = Json::array();
  for (const auto& at : atoms) a.push_back({{"position", dislo::to_json(at.position)}, {"burgers", dislo::to_json(at.burgers)}});
  m["atoms"] = a;
  m["eps"] = eps;
  m["n_eps"] = n_eps;
  j["measure"] = m;
  Json r;
  r["eps"] = regime.eps;
  const char* rules[] = {"constant", "log", "log_power", "table"};
  r["rule"] = rules[static_cast<int>(regime.rule)];
  r["constant"] = regime.constant;
  r["power"] = regime.power;
  r["table"] = regime.table;
  j["regime"] = r;
  Json t;
  t["tol_g"] = tolerances.tol_g;
  t["tol_e"] = tolerances.tol_e;
  t["max_iter"] = tolerances.max_iter;
  t["poisson_tol"] = tolerances.poisson_tol;
  t["gap_target"] = tolerances.gap_target;
  t["cell"] = {{"cells_per_decade", tolerances.cell.cells_per_decade}, {"n_theta", tolerances.cell.n_theta}};
  j["tolerances"] = t;
  return j;
}

Config parse_config(const std::string& text, const std::string& source) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(source, line_at(text, e.byte > 0 ? e.byte - 1 : 0), "", "malformed JSON");
  }
  Reader rd(text, source);
  Config c;
  rd.only(root, "", {"density", "lattice", "domain", "measure", "regime", "tolerances"});
  static const Json empty = Json::object();
  auto section = [&](const char* name) -> const Json& { return root.contains(name) ? root.at(name) : empty; };

  {
    const Json& d = section("density");
    rd.only(d, "density", {"kind", "lame_mu", "lame_lambda", "nu"});
    std::string kind = rd.string(d, "density", "kind", "isotropic");
    if (kind == "dist_squared") {
      c.density = EnergyDensity::dist_squared();
    } else if (kind == "isotropic") {
      double mu = rd.number(d, "density", "lame_mu", 1.0);
      if (!(mu > 0.0)) rd.fail("density.lame_mu", "must be positive");
      if (d.contains("nu") && d.contains("lame_lambda")) rd.fail("density.nu", "give either nu or lame_lambda");
      double lambda = rd.number(d, "density", "lame_lambda", 1.0);
      if (d.contains("nu")) {
        double nu = rd.number(d, "density", "nu", 0.25);
        if (!(nu > -1.0 && nu < 0.5)) rd.fail("density.nu", "must lie in (-1, 1/2)");
        lambda = 2.0 * mu * nu / (1.0 - 2.0 * nu);
      }
      if (!(mu + lambda > 0.0)) rd.fail("density.lame_lambda", "lame_mu + lame_lambda must be positive");
      c.density = EnergyDensity::isotropic(mu, lambda);
    } else {
      rd.fail("density.kind", "must be \"isotropic\" or \"dist_squared\"");
    }
  }
  {
    const Json& l = section("lattice");
    rd.only(l, "lattice", {"u1", "u2", "cutoff", "iquad"});
    c.lattice.u1 = rd.vec(l, "lattice", "u1", Vec2::UnitX());
    c.lattice.u2 = rd.vec(l, "lattice", "u2", Vec2::UnitY());
    c.lattice.cutoff_K = rd.number(l, "lattice", "cutoff", 0.0);
    if (c.lattice.cutoff_K < 0.0) rd.fail("lattice.cutoff", "must be non-negative (0 derives it)");
    if (!(std::abs(cross(c.lattice.u1, c.lattice.u2)) > 1e-12)) rd.fail("lattice.u2", "basis vectors are collinear");
    if (l.contains("iquad")) {
      const Json& q = l.at("iquad");
      if (!q.is_array() || q.size() != 2) rd.fail("lattice.iquad", "must be a 2x2 array");
      Mat2 a;
      a.row(0) = rd.vec(q[0], "lattice.iquad").transpose();
      a.row(1) = rd.vec(q[1], "lattice.iquad").transpose();
      if (std::abs(a(0, 1) - a(1, 0)) > 1e-12 * a.norm()) rd.fail("lattice.iquad", "must be symmetric");
      if (!(a(0, 0) > 0.0 && a.determinant() > 0.0)) rd.fail("lattice.iquad", "must be positive definite");
      c.lattice_iquad = a;
    }
  }
  {
    const Json& d = section("domain");
    rd.only(d, "domain", {"lo", "hi", "mesh"});
    c.domain.lo = rd.vec(d, "domain", "lo", Vec2::Zero());
    c.domain.hi = rd.vec(d, "domain", "hi", Vec2::Ones());
    if (!(c.domain.width() > 0.0 && c.domain.height() > 0.0)) rd.fail("domain.hi", "must exceed domain.lo");
    const Json& m = d.contains("mesh") ? d.at("mesh") : empty;
    rd.only(m, "domain.mesh", {"per_side", "cells_per_decade", "core_rings", "core_factor", "mollify"});
    c.assembly.per_side = rd.integer(m, "domain.mesh", "per_side", c.assembly.per_side);
    c.assembly.cells_per_decade = rd.integer(m, "domain.mesh", "cells_per_decade", c.assembly.cells_per_decade);
    c.assembly.core_rings = rd.integer(m, "domain.mesh", "core_rings", c.assembly.core_rings);
    c.assembly.core_factor = rd.number(m, "domain.mesh", "core_factor", c.assembly.core_factor);
    c.assembly.mollify = rd.boolean(m, "domain.mesh", "mollify", c.assembly.mollify);
    if (c.assembly.per_side < 4) rd.fail("domain.mesh.per_side", "must be at least 4");
    if (c.assembly.cells_per_decade < 4) rd.fail("domain.mesh.cells_per_decade", "must be at least 4");
    if (c.assembly.core_rings < 1) rd.fail("domain.mesh.core_rings", "must be at least 1");
    if (!(c.assembly.core_factor >= 1.0)) rd.fail("domain.mesh.core_factor", "must be at least 1");
  }
  {
    const Json& m = section("measure");
    rd.only(m, "measure", {"kind", "density", "atoms", "eps", "n_eps"});
    c.measure_kind = rd.string(m, "measure", "kind", "uniform");
    if (c.measure_kind != "uniform" && c.measure_kind != "zero" && c.measure_kind != "atoms")
      rd.fail("measure.kind", "must be \"uniform\", \"zero\" or \"atoms\"");
    c.measure_density = rd.vec(m, "measure", "density", Vec2::UnitX());
    if (m.contains("atoms")) {
      const Json& a = m.at("atoms");
      if (!a.is_array()) rd.fail("measure.atoms", "must be an array");
      for (std::size_t i = 0; i < a.size(); ++i) {
        std::string p = "measure.atoms[" + std::to_string(i) + "]";
        rd.only(a[i], p, {"position", "burgers"});
        if (!a[i].contains("position") || !a[i].contains("burgers")) rd.fail(p, "needs position and burgers");
        Atom at;
        at.position = rd.vec(a[i].at("position"), p + ".position");
        at.burgers = rd.vec(a[i].at("burgers"), p + ".burgers");
        if (!(c.domain.distance_to_boundary(at.position) > 0.0)) rd.fail(p + ".position", "lies outside the domain");
        c.atoms.push_back(at);
      }
    }
    if (c.measure_kind == "atoms" && c.atoms.empty()) rd.fail("measure.atoms", "kind \"atoms\" needs at least one atom");
    c.eps = rd.number(m, "measure", "eps", c.eps);
    c.n_eps = rd.number(m, "measure", "n_eps", c.n_eps);
    if (!(c.eps > 0.0 && c.eps < 1.0)) rd.fail("measure.eps", "must lie in (0, 1)");
    if (!(c.n_eps > 0.0)) rd.fail("measure.n_eps", "must be positive");
  }
  {
    const Json& r = section("regime");
    rd.only(r, "regime", {"eps", "rule", "constant", "power", "table"});
    c.regime.eps = rd.numbers(r, "regime", "eps", c.regime.eps);
    std::string rule = rd.string(r, "regime", "rule", "log");
    if (rule == "constant") c.regime.rule = NRule::Constant;
    else if (rule == "log") c.regime.rule = NRule::Log;
    else if (rule == "log_power") c.regime.rule = NRule::LogPower;
    else if (rule == "table") c.regime.rule = NRule::Table;
    else rd.fail("regime.rule", "must be \"constant\", \"log\", \"log_power\" or \"table\"");
    c.regime.constant = rd.number(r, "regime", "constant", 1.0);
    c.regime.power = rd.number(r, "regime", "power", 1.0);
    c.regime.table = rd.numbers(r, "regime", "table", {});
    try {
      c.regime.validate();
    } catch (const Error& e) {
      std::string msg = e.what();
      std::string field = "regime.eps";
      if (msg.find("table") != std::string::npos) field = "regime.table";
      else if (msg.find("power") != std::string::npos) field = "regime.power";
      else if (msg.find("multiplier") != std::string::npos || msg.find("n_eps") != std::string::npos)
        field = "regime.constant";
      rd.fail(field, msg.substr(msg.find(": ") + 2));
    }
  }
  {
    const Json& t = section("tolerances");
    rd.only(t, "tolerances", {"tol_g", "tol_e", "max_iter", "poisson_tol", "gap_target", "cell"});
    auto& tol = c.tolerances;
    tol.tol_g = rd.number(t, "tolerances", "tol_g", tol.tol_g);
    tol.tol_e = rd.number(t, "tolerances", "tol_e", tol.tol_e);
    tol.max_iter = rd.integer(t, "tolerances", "max_iter", tol.max_iter);
    tol.poisson_tol = rd.number(t, "tolerances", "poisson_tol", tol.poisson_tol);
    tol.gap_target = rd.number(t, "tolerances", "gap_target", tol.gap_target);
    if (!(tol.tol_g > 0.0)) rd.fail("tolerances.tol_g", "must be positive");
    if (!(tol.tol_e > 0.0)) rd.fail("tolerances.tol_e", "must be positive");
    if (tol.max_iter < 1) rd.fail("tolerances.max_iter", "must be positive");
    if (!(tol.poisson_tol > 0.0 && tol.poisson_tol < 1.0)) rd.fail("tolerances.poisson_tol", "must lie in (0, 1)");
    if (!(tol.gap_target > 0.0)) rd.fail("tolerances.gap_target", "must be positive");
    const Json& cr = t.contains("cell") ? t.at("cell") : empty;
    rd.only(cr, "tolerances.cell", {"cells_per_decade", "n_theta"});
    tol.cell.cells_per_decade = rd.integer(cr, "tolerances.cell", "cells_per_decade", tol.cell.cells_per_decade);
    tol.cell.n_theta = rd.integer(cr, "tolerances.cell", "n_theta", tol.cell.n_theta);
    if (tol.cell.cells_per_decade < 8) rd.fail("tolerances.cell.cells_per_decade", "must be at least 8");
    if (tol.cell.n_theta < 16) rd.fail("tolerances.cell.n_theta", "must be at least 16");
    c.assembly.poisson_tol = tol.poisson_tol;
  }
  return c;
}

Config load_config(const std::string& path) {
  std::string text;
  try {
    text = read_text(path);
  } catch (const Error&) {
    throw ConfigError(path, 0, "", "cannot read the file");
  }
  return parse_config(text, path);
}

std::string default_config_text() { return Config{}.to_json().dump(2) + "\n"; }

}  // namespace dislo
