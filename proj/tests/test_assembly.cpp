#include "dislo/assembly.hpp"
#include "dislo/fem.hpp"

#include <doctest.h>

#include <cmath>

using namespace dislo;

namespace {

Mat2 iso_iquad() { return Mat2::Identity() / (3.0 * kPi); }  // mu = 1, nu = 1/4

DislocationLattice square_lattice() {
  DislocationLattice l;
  l.cutoff_K = derive_cutoff(l, iso_iquad());
  return l;
}

// midpoint rule on a fine grid, independent of the library quadrature
double midpoint_pairing(const Vec2& m, const Rect& om, const VectorField& psi, int n = 400) {
  double hx = om.width() / n, hy = om.height() / n, s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) s += psi(om.lo + Vec2((i + 0.5) * hx, (j + 0.5) * hy)).dot(m);
  return s * hx * hy;
}

double atom_pairing(const DislocationMeasure& m, const VectorField& psi) {
  double s = 0.0;
  for (const auto& a : m.atoms) s += psi(a.position).dot(a.burgers);
  return s / m.n_eps;
}

}  // namespace

TEST_CASE("zero measure gives no atoms and the identity implant") {
  Rect om;
  DislocationMeasure m = approximate_measure(TargetMeasure::zero(), om, 100.0, 1e-3, square_lattice(), iso_iquad());
  CHECK(m.atoms.empty());
  CHECK(m.b() == 0.0);
  AssemblyResolution res;
  res.per_side = 8;
  AssembledBody b = build_implant(m, res);
  double dev = 0.0;
  for (const auto& q : b.body.Q) dev = std::max(dev, (q - Mat2::Identity()).norm());
  CHECK(dev <= 1e-14);
  DeviationReport r = deviation_report(b);
  CHECK(r.integral <= 1e-24);
  CHECK(r.far_max <= 1e-12);
  CHECK(r.near_max <= 1e-12);
}

TEST_CASE("h squared") {
  DislocationMeasure m;
  m.eps = 1e-3;
  m.n_eps = 100.0;
  CHECK(m.h_squared() == doctest::Approx(std::max(1e-2, 1e2 * 1e-6 * std::log(1e3))).epsilon(1e-14));
  m.n_eps = 2.0;
  CHECK(m.h_squared() == doctest::Approx(2.0 * 1e-6 * std::log(1e3)).epsilon(1e-14));
}

TEST_CASE("uniform measure: atom count and weak convergence of the atoms") {
  Rect om;
  Vec2 dens(1.0, 0.0);
  DislocationMeasure m =
      approximate_measure(TargetMeasure::uniform(dens), om, 100.0, 1e-3, square_lattice(), iso_iquad());
  CHECK(static_cast<double>(m.atoms.size()) == doctest::Approx(100.0).epsilon(0.05));
  for (const auto& a : m.atoms) {
    CHECK(om.distance_to_boundary(a.position) > 0.0);
    CHECK(a.burgers.norm() > 0.5);
  }
  for (const auto& psi : standard_test_fields(om)) {
    double target = midpoint_pairing(dens, om, psi);
    double got = atom_pairing(m, psi);
    double scale = std::max(std::abs(target), 1e-2);
    CHECK(std::abs(got - target) / scale <= 0.05);
  }
}

TEST_CASE("averaged self-energy of the atoms approaches the integrated Sigma") {
  Rect om;
  Vec2 dens(1.0, 0.5);
  DislocationLattice l = square_lattice();
  double target = sigma(l, iso_iquad(), dens).value * 1.0;
  for (double n : {100.0, 400.0, 1600.0}) {
    DislocationMeasure m = approximate_measure(TargetMeasure::uniform(dens), om, n, 1e-4, l, iso_iquad());
    double avg = 0.0;
    for (const auto& a : m.atoms) avg += a.burgers.dot(iso_iquad() * a.burgers);
    avg /= n;
    CAPTURE(n);
    CHECK(std::abs(avg - target) / target <= 0.05);
  }
}

TEST_CASE("single atom: circulation and agreement with the model frame") {
  Rect om{Vec2(-1, -1), Vec2(1, 1)};
  TargetMeasure mu;
  mu.atoms = {Atom{Vec2::Zero(), Vec2::UnitX()}};
  const double eps = 1e-3;
  DislocationMeasure m = approximate_measure(mu, om, 1.0, eps, square_lattice(), iso_iquad());
  REQUIRE(m.atoms.size() == 1u);
  AssembledBody b = build_implant(m);
  CHECK(b.min_det > 0.0);
  CHECK(b.max_circulation_error <= 1e-7 * eps);
  Vec2 sum = Vec2::Zero();
  for (const auto& e : b.core_loop_values[0]) sum += e;
  CHECK((sum - eps * Vec2::UnitX()).norm() <= 1e-10 * eps);

  // away from the core and the smearing band the implant is the single-dislocation frame on the same mesh
  const Vec2 c = m.atoms[0].position, v = eps * m.atoms[0].burgers;
  double worst = 0.0;
  int tested = 0;
  for (std::size_t t = 0; t < b.body.size(); ++t) {
    double r = (b.body.mesh.centroid(t) - c).norm();
    if (r <= 2.0 * v.norm() || r >= m.smear_radius / 2.0) continue;
    const auto& tri = b.body.mesh.triangles[t];
    const auto& V = b.body.mesh.vertices;
    Mat2 model = element_from_edges(b.body.mesh, t, model_edge_value(v, c, V[tri[0]], V[tri[1]]),
                                    model_edge_value(v, c, V[tri[0]], V[tri[2]]));
    worst = std::max(worst, (b.body.Q[t] - model).norm());
    ++tested;
  }
  CHECK(tested > 100);
  CHECK(worst <= 1e-3);
}

TEST_CASE("torsion functional of constant and vanishing fields") {
  Rect om;
  TargetMeasure mu;
  mu.atoms = {Atom{Vec2(0.25, 0.25), Vec2(0.0, 1.0)}};
  const double eps = 1e-3;
  DislocationMeasure m = approximate_measure(mu, om, 1.0, eps, square_lattice(), iso_iquad());
  AssemblyResolution res;
  res.per_side = 12;
  AssembledBody b = build_implant(m, res);
  Vec2 u(0.3, -1.7);
  CHECK(torsion_functional(b, [&](const Vec2&) { return u; }) ==
        doctest::Approx(eps * m.atoms[0].burgers.dot(u)).epsilon(1e-9));
  CHECK(torsion_functional(b, [](const Vec2&) { return Vec2(Vec2::Zero()); }) == 0.0);
  // supported away from the atom
  auto bump = [](const Vec2& x) {
    double r2 = (x - Vec2(0.75, 0.75)).squaredNorm();
    return r2 < 0.01 ? Vec2(std::pow(0.01 - r2, 2), 0.0) : Vec2(Vec2::Zero());
  };
  CHECK(torsion_functional(b, bump) == 0.0);
  CHECK(std::abs(smeared_pairing(b, bump)) <= 1e-12);
}

TEST_CASE("uniform measure n = 100: implant diagnostics") {
  Rect om;
  DislocationMeasure m =
      approximate_measure(TargetMeasure::uniform(Vec2::UnitX()), om, 100.0, 1e-3, square_lattice(), iso_iquad());
  AssembledBody b = build_implant(m);
  CHECK(b.min_det > 0.0);
  CHECK(b.max_circulation_error <= 1e-7 * m.b());
  DeviationReport r = deviation_report(b);
  CHECK(r.integral <= r.h2);
  CHECK(r.far_ratio <= 10.0);

  std::vector<VectorField> fields = standard_test_fields(om);
  for (const auto& psi : fields) {
    double target = midpoint_pairing(Vec2::UnitX(), om, psi);
    double got = torsion_functional(b, psi) / (m.eps * m.n_eps);
    CHECK(std::abs(got - target) <= 0.05 * std::max(std::abs(target), 1e-2));
  }
}

TEST_CASE("Burgers convergence along a supercritical ladder") {
  Rect om;
  TargetMeasure mu = TargetMeasure::uniform(Vec2::UnitX());
  DislocationLattice l = square_lattice();
  AssemblyResolution res;
  res.per_side = 8;
  res.cells_per_decade = 4;
  std::vector<AssembledBody> bodies;
  for (double eps : {1e-3, 1e-4, 1e-5})
    bodies.push_back(build_implant(approximate_measure(mu, om, 1.0 / std::sqrt(eps), eps, l, iso_iquad()), res));
  std::vector<const AssembledBody*> ptr;
  for (const auto& b : bodies) ptr.push_back(&b);
  BurgersConvergence c = burgers_convergence_check(ptr, mu, standard_test_fields(om));
  for (bool mono : c.monotone) CHECK(mono);
  CHECK(c.final_max_gap <= 0.05);
}
