#include "dislo/lattice.hpp"

#include <doctest.h>

#include <cmath>

using namespace dislo;

namespace {

Mat2 scalar_form(double c) { return c * Mat2::Identity(); }

// smallest cost of writing v as a nonnegative combination of at most two lattice vectors in a box
double brute_sigma(const Mat2& iq, const Vec2& v, int box) {
  std::vector<Vec2> pts;
  for (int a = -box; a <= box; ++a)
    for (int b = -box; b <= box; ++b)
      if (a || b) pts.emplace_back(a, b);
  double best = 1e300;
  for (const auto& p : pts) {
    // single generator: v = t p, t >= 0
    if (std::abs(cross(p, v)) < 1e-14 && p.dot(v) > 0) best = std::min(best, v.norm() / p.norm() * quad(iq, p));
    for (const auto& q : pts) {
      double det = cross(p, q);
      if (std::abs(det) < 1e-14) continue;
      double s = cross(v, q) / det, t = cross(p, v) / det;
      if (s >= 0 && t >= 0) best = std::min(best, s * quad(iq, p) + t * quad(iq, q));
    }
  }
  return best;
}

}  // namespace

TEST_CASE("enumeration with a strict cutoff") {
  DislocationLattice l;
  l.cutoff_K = 1.5;
  auto pts = enumerate_lattice(l);
  CHECK(pts.size() == 8);
  for (const auto& p : pts) CHECK(p.v.norm() < 1.5);
  l.cutoff_K = 1.0;
  CHECK(enumerate_lattice(l).empty());
}

TEST_CASE("enumeration count against a double loop") {
  DislocationLattice l;
  l.cutoff_K = 10.0;
  int count = 0;
  for (int a = -10; a <= 10; ++a)
    for (int b = -10; b <= 10; ++b)
      if ((a || b) && a * a + b * b < 100) ++count;
  CHECK(enumerate_lattice(l).size() == static_cast<std::size_t>(count));
  l.cutoff_K = 1e5;
  CHECK_THROWS_AS(enumerate_lattice(l, 1000000), Error);
}

TEST_CASE("derived cutoff") {
  DislocationLattice l;
  CHECK(derive_cutoff(l, scalar_form(1.0)) == doctest::Approx(std::sqrt(2.0)));
  CHECK(derive_cutoff(l, scalar_form(2.0)) == doctest::Approx(std::sqrt(2.0)));
  Mat2 bad;
  bad << 1, 0, 0, -1;
  CHECK_THROWS_AS(derive_cutoff(l, bad), Error);

  DislocationLattice hex;
  hex.u2 = Vec2(0.5, std::sqrt(3.0) / 2);
  hex.cutoff_K = derive_cutoff(hex, scalar_form(1.0));
  CHECK(hex.cutoff_K > 1.0);
  CHECK(cutoff_doubling_gap(hex, scalar_form(1.0), {Vec2(1, 0), Vec2(0.3, 0.9), Vec2(-2, 1)}) <= 1e-9);
}

TEST_CASE("sigma values") {
  DislocationLattice l;
  const double c = 0.37;
  l.cutoff_K = derive_cutoff(l, scalar_form(c));
  SelfEnergyResult z = sigma(l, scalar_form(c), Vec2::Zero());
  CHECK(z.value == 0.0);
  CHECK(z.decomposition.empty());

  SelfEnergyResult e = sigma(l, scalar_form(c), Vec2::UnitX());
  CHECK(e.value == doctest::Approx(c).epsilon(1e-12));
  REQUIRE(e.decomposition.size() == 1);
  CHECK(e.decomposition[0].first.v.isApprox(Vec2::UnitX()));
  CHECK(e.decomposition[0].second == doctest::Approx(1.0));

  CHECK(sigma(l, scalar_form(c), 2.5 * Vec2::UnitX()).value == doctest::Approx(2.5 * c).epsilon(1e-12));

  Mat2 iq;
  iq << 1.0, 0.2, 0.2, 0.6;
  l.cutoff_K = derive_cutoff(l, iq);
  for (Vec2 v : {Vec2(1, 1), Vec2(2, -1), Vec2(0.3, 0.7), Vec2(-1.5, 2.5)}) {
    SelfEnergyResult s = sigma(l, iq, v);
    CHECK(s.value == doctest::Approx(brute_sigma(iq, v, 4)).epsilon(1e-9));
    Vec2 sum = Vec2::Zero();
    for (const auto& [p, w] : s.decomposition) {
      CHECK(w >= 0.0);
      sum += w * p.v;
    }
    CHECK((sum - v).norm() <= 1e-9);
  }
}

TEST_CASE("property suite and strict relaxation beyond the cutoff") {
  DislocationLattice l;
  Mat2 iq = scalar_form(1.0 / (3.0 * kPi));
  l.cutoff_K = derive_cutoff(l, iq);
  SigmaPropertyReport r = verify_sigma_properties(l, iq, 1000, 42);
  CHECK(r.samples == 1000);
  CHECK(r.ok());
  CHECK(r.max_homogeneity_error <= 1e-7);
  // lattice vectors longer than the cutoff split into cheaper pieces
  for (Vec2 v : {Vec2(2, 0), Vec2(1, 2), Vec2(3, -1)}) {
    REQUIRE(v.norm() > l.cutoff_K);
    CHECK(sigma(l, iq, v).value < quad(iq, v));
  }
  // and unit generators keep their own cost
  CHECK(sigma(l, iq, Vec2(0, 1)).value == doctest::Approx(quad(iq, Vec2(0, 1))).epsilon(1e-12));
}

TEST_CASE("simplex on a small program") {
  // min x + 2y + 3z  s.t. x + y + z = 1, x - y = 0.2
  Eigen::MatrixXd A(2, 3);
  A << 1, 1, 1, 1, -1, 0;
  Eigen::VectorXd b(2), c(3);
  b << 1, 0.2;
  c << 1, 2, 3;
  LinearProgramResult r = simplex(A, b, c);
  REQUIRE(r.feasible);
  CHECK(r.value == doctest::Approx(1.4));
  CHECK(r.x(0) == doctest::Approx(0.6));
  CHECK(r.x(1) == doctest::Approx(0.4));
  Eigen::VectorXd bad(2);
  bad << -1, 0;
  CHECK_FALSE(simplex(A, bad, c).feasible);
}
