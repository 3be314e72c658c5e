#include "dislo/density.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace dislo;

namespace {

// min over rotations of |A - R|^2: angle grid, then golden-section refinement
double brute_dist2(const Mat2& a) {
  auto f = [&](double t) { return (a - rotation(t)).squaredNorm(); };
  const int n = 3600;
  int best = 0;
  for (int i = 1; i < n; ++i)
    if (f(kTwoPi * i / n) < f(kTwoPi * best / n)) best = i;
  double lo = kTwoPi * (best - 1) / n, hi = kTwoPi * (best + 1) / n;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int it = 0; it < 200; ++it) {
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    if (f(x1) < f(x2)) hi = x2;
    else lo = x1;
  }
  return f(0.5 * (lo + hi));
}

// second difference of W along A at the identity, halved
double fd_quadratic(const EnergyDensity& w, const Mat2& a, double h = 1e-4) {
  Mat2 I = Mat2::Identity();
  return (eval_density(w, I + h * a) - 2.0 * eval_density(w, I) + eval_density(w, I - h * a)) / (2.0 * h * h);
}

Mat2 random_matrix(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  Mat2 a;
  a << n(rng), n(rng), n(rng), n(rng);
  return a;
}

}  // namespace

TEST_CASE("identity and rotations cost nothing") {
  for (auto w : {EnergyDensity::dist_squared(), EnergyDensity::isotropic(1.0, 1.0), EnergyDensity::isotropic(2.0, 0.5)}) {
    CHECK(eval_density(w, Mat2::Identity()) == doctest::Approx(0.0));
    CHECK(eval_density(w, rotation(kPi / 3)) == doctest::Approx(0.0).epsilon(1e-14));
  }
}

TEST_CASE("dist squared of 2I") {
  Mat2 a = 2.0 * Mat2::Identity();
  CHECK(eval_density(EnergyDensity::dist_squared(), a) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(brute_dist2(a) == doctest::Approx(2.0).epsilon(1e-10));
}

TEST_CASE("dist_to_rotations against brute force") {
  CHECK(dist_to_rotations(Mat2::Identity()) == doctest::Approx(0.0));
  Mat2 r;
  r << 1, 0, 0, -1;
  // singular values (1, 1) with det < 0
  CHECK(dist_to_rotations(r) * dist_to_rotations(r) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(brute_dist2(r) == doctest::Approx(4.0).epsilon(1e-9));
  Mat2 d;
  d << 3, 0, 0, 1;
  CHECK(dist_to_rotations(d) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(std::sqrt(brute_dist2(d)) == doctest::Approx(2.0).epsilon(1e-9));
  std::mt19937_64 rng(7);
  for (int k = 0; k < 50; ++k) {
    Mat2 a = random_matrix(rng);
    double d2 = dist_to_rotations(a);
    CHECK(d2 * d2 == doctest::Approx(brute_dist2(a)).epsilon(1e-8));
    CHECK(eval_density(EnergyDensity::dist_squared(), a) == doctest::Approx(d2 * d2).epsilon(1e-12));
  }
}

TEST_CASE("non-finite input is rejected") {
  Mat2 a = Mat2::Identity();
  a(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eval_density(EnergyDensity::isotropic(1, 1), a), Error);
  CHECK_THROWS_AS(EnergyDensity::isotropic(-1.0, 1.0), Error);
}

TEST_CASE("frame indifference and two-sided rotation bounds") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> ang(0.0, kTwoPi);
  for (auto w : {EnergyDensity::dist_squared(), EnergyDensity::isotropic(1.0, 1.0), EnergyDensity::isotropic(0.7, 3.0)}) {
    auto [c1, c2] = w.rotation_bounds();
    for (int k = 0; k < 200; ++k) {
      Mat2 a = Mat2::Identity() + random_matrix(rng, 0.5);
      double W = eval_density(w, a);
      CHECK(eval_density(w, rotation(ang(rng)) * a) == doctest::Approx(W).epsilon(1e-10));
      double d2 = std::pow(dist_to_rotations(a), 2);
      CHECK(W >= c1 * d2 - 1e-12);
      CHECK(W <= c2 * d2 + 1e-12);
    }
  }
}

TEST_CASE("quadratic form at the identity") {
  Mat2 skew;
  skew << 0, 1, -1, 0;
  QuadraticForm q = hessian_at_identity(EnergyDensity::dist_squared());
  CHECK(q(skew) == doctest::Approx(0.0));
  CHECK(q(Mat2::Identity()) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(fd_quadratic(EnergyDensity::dist_squared(), Mat2::Identity()) == doctest::Approx(2.0).epsilon(1e-6));

  EnergyDensity iso = EnergyDensity::isotropic(1.0, 1.0);
  QuadraticForm qi = hessian_at_identity(iso);
  CHECK(qi(Mat2::Identity()) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(fd_quadratic(iso, Mat2::Identity()) == doctest::Approx(4.0).epsilon(1e-6));

  std::mt19937_64 rng(3);
  for (int k = 0; k < 30; ++k) {
    Mat2 a = random_matrix(rng);
    CHECK(qi(a) == doctest::Approx(fd_quadratic(iso, a)).epsilon(1e-5));
    Mat2 b = random_matrix(rng);
    CHECK(qi.bilinear(a, b) == doctest::Approx(0.25 * (qi(a + b) - qi(a - b))).epsilon(1e-12));
  }
}

TEST_CASE("density gradient matches finite differences") {
  std::mt19937_64 rng(5);
  EnergyDensity w = EnergyDensity::isotropic(1.3, 0.4);
  for (int k = 0; k < 20; ++k) {
    Mat2 a = Mat2::Identity() + random_matrix(rng, 0.4);
    Mat2 g = density_gradient(w, a), fd;
    const double h = 1e-6;
    for (int i = 0; i < 2; ++i)
      for (int j = 0; j < 2; ++j) {
        Mat2 e = Mat2::Zero();
        e(i, j) = h;
        fd(i, j) = (eval_density(w, a + e) - eval_density(w, a - e)) / (2 * h);
      }
    CHECK((g - fd).norm() <= 1e-6 * (1.0 + g.norm()));
  }
}

TEST_CASE("polar rotation maximizes the trace pairing") {
  std::mt19937_64 rng(9);
  for (int k = 0; k < 20; ++k) {
    Mat2 a = random_matrix(rng);
    Mat2 u = polar_rotation(a);
    CHECK((u.transpose() * u - Mat2::Identity()).norm() <= 1e-12);
    CHECK(u.determinant() == doctest::Approx(1.0));
    double best = (u.transpose() * a).trace();
    for (int i = 0; i < 360; ++i) CHECK((rotation(kTwoPi * i / 360).transpose() * a).trace() <= best + 1e-12);
  }
}
