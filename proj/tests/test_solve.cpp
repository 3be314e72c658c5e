#include "dislo/solve.hpp"

#include <doctest.h>

#include <cmath>

using namespace dislo;

namespace {

EnergyDensity iso() { return EnergyDensity::isotropic(1.0, 1.0); }

Configuration apply(const Mat2& u, const Vec2& shift, const Configuration& x) {
  Configuration f(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) f[i] = u * x[i] + shift;
  return f;
}

}  // namespace

TEST_CASE("defect-free annulus relaxes to a rigid motion") {
  Body b = model_body(Vec2::Zero(), Vec2::Zero(), 0.1, 1.0, 8, 48);
  Configuration f0 = random_trial_field(b, 11, 0.05);
  double e0 = energy(b, f0, iso()).total;
  REQUIRE(e0 > 1e-4);
  MinimizeOptions opt;
  opt.tol_g = 1e-10;
  MinimizeResult r = minimize(b, iso(), f0, opt);
  CHECK(r.converged);
  CHECK(r.energy.total <= 1e-10);
  for (std::size_t k = 1; k < r.history.size(); ++k) CHECK(r.history[k] <= r.history[k - 1] * (1.0 + 1e-12));
}

TEST_CASE("energy gradient against finite differences") {
  Body b = model_body(Vec2(0.02, 0.01), Vec2::Zero(), 0.05, 1.0, 4, 24);
  Configuration f = random_trial_field(b, 3, 0.05);
  std::vector<Vec2> g;
  energy_and_gradient(b, f, iso(), g);
  const double h = 1e-6;
  for (std::size_t i : {0ul, 7ul, b.mesh.num_vertices() / 2, b.mesh.num_vertices() - 1})
    for (int c = 0; c < 2; ++c) {
      Configuration p = f, m = f;
      p[i][c] += h;
      m[i][c] -= h;
      double fd = (energy(b, p, iso()).total - energy(b, m, iso()).total) / (2 * h);
      CHECK(g[i][c] == doctest::Approx(fd).epsilon(1e-5).scale(1e-8));
    }
}

TEST_CASE("best rotation recovers a rigid motion") {
  Body b = model_body(Vec2::Zero(), Vec2::Zero(), 0.2, 1.0, 6, 32);
  Mat2 u0 = rotation(0.7);
  Configuration f = apply(u0, Vec2(0.3, -2.0), identity_configuration(b));
  RigidityReport r = best_rotation(b, f);
  CHECK((r.U - u0).norm() <= 1e-10);
  CHECK(r.lhs <= 1e-12);
  CHECK(r.ratio == 0.0);
  CHECK(rotation_residual(b, f, u0) <= 1e-12);
  CHECK(rotation_residual(b, f, Mat2::Identity()) > 0.1);
}

TEST_CASE("rigidity ratio of a perturbed rotation is bounded") {
  Body b = model_body(Vec2::Zero(), Vec2::Zero(), 0.2, 1.0, 6, 32);
  FjmProbe p = uniform_fjm_probe(b, 5, 17);
  CHECK(p.ratios.size() == 5u);
  CHECK(p.worst_ratio > 0.0);
  CHECK(p.worst_ratio < 100.0);
}

TEST_CASE("region energies add up to the total") {
  Body b = model_body(Vec2(0.05, 0.0), Vec2::Zero(), 0.05, 1.0, 6, 32);
  for (std::size_t t = 0; t < b.size(); ++t) b.region[t] = b.mesh.centroid(t).norm() < 0.3 ? 1 : 0;
  b.region_names = {"outer", "inner"};
  Configuration f = random_trial_field(b, 5, 0.02);
  EnergyBreakdown e = energy(b, f, iso());
  double sum = 0.0;
  for (const auto& [name, val] : e.per_region) sum += val;
  CHECK(e.per_region.size() == 2u);
  CHECK(std::abs(sum - e.total) <= 1e-12 * std::max(1.0, e.total));
  std::vector<Vec2> g;
  CHECK(energy_and_gradient(b, f, iso(), g) == doctest::Approx(e.total).epsilon(1e-12));
}

TEST_CASE("non-positive implant determinant is rejected") {
  Body b = model_body(Vec2::Zero(), Vec2::Zero(), 0.2, 1.0, 4, 16);
  b.Q[3] << 1, 0, 0, -1;
  try {
    b.finalize();
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::CorruptBody);
  }
}

TEST_CASE("single-dislocation energy scales like |v|^2 log(R/|v|)") {
  const double R = 1.0;
  for (double s : {1e-2, 1e-3}) {
    Vec2 v(s, 0.0);
    Body b = model_body(v, Vec2::Zero(), s, R, 8, 64);
    double chart = energy(b, identity_configuration(b), iso()).total;
    MinimizeResult r = minimize(b, iso(), identity_configuration(b));
    double scale = v.squaredNorm() * std::log(R / s);
    CAPTURE(s);
    CHECK(r.converged);
    CHECK(r.energy.total <= chart);
    CHECK(chart <= 1.0 * scale);
    CHECK(r.energy.total >= 0.05 * scale);
  }
}
