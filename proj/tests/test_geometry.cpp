#include "dislo/geometry.hpp"

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

using namespace dislo;

TEST_CASE("flat frame is the polar Jacobian") {
  ModelManifold m = ModelManifold::make(Vec2::Zero(), 1.0);
  for (double r : {0.1, 0.5, 1.0})
    for (double phi : {0.0, 1.0, 4.0}) {
      CHECK((frame_at(m, r, phi) - chart_differential(r, phi)).norm() == doctest::Approx(0.0));
      Mat2 g = metric_at(m, r, phi);
      CHECK(g(0, 0) == doctest::Approx(1.0));
      CHECK(g(0, 1) == doctest::Approx(0.0));
      CHECK(g(1, 1) == doctest::Approx(r * r));
    }
}

TEST_CASE("frame columns at (1, 0)") {
  Vec2 v(0.3, -0.2);
  ModelManifold m = ModelManifold::make(v, 2.0);
  Mat2 q = frame_at(m, 1.0, 0.0);
  CHECK(q(0, 0) == doctest::Approx(1.0));
  CHECK(q(1, 0) == doctest::Approx(0.0));
  CHECK(q(0, 1) == doctest::Approx(v.x() / kTwoPi));
  CHECK(q(1, 1) == doctest::Approx(1.0 + v.y() / kTwoPi));
  CHECK(chart_map(m, 1.0, 0.0).isApprox(Vec2(1.0, 0.0)));
}

TEST_CASE("angular circulation returns the Burgers vector") {
  Vec2 v(0.05, 0.02);
  ModelManifold m = ModelManifold::make(v, 1.0);
  for (double r : {0.06, 0.5}) {
    const int n = 10000;
    Vec2 s = Vec2::Zero();
    for (int i = 0; i < n; ++i) s += frame_at(m, r, kTwoPi * i / n).col(1) * (kTwoPi / n);
    CHECK((s - v).norm() <= 1e-10);
  }
}

TEST_CASE("metric is the Gram matrix of the frame") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    Vec2 v(u(rng) - 0.5, u(rng) - 0.5);
    ModelManifold m = ModelManifold::make(v, 2.0);
    double r = v.norm() + (2.0 - v.norm()) * u(rng), phi = kTwoPi * u(rng);
    Mat2 q = frame_at(m, r, phi);
    CHECK((q.transpose() * q - metric_at(m, r, phi)).norm() <= 1e-12);
  }
  ModelManifold m = ModelManifold::make(Vec2(1.0, 0.0), 3.0);
  Mat2 g = metric_at(m, 2.0, kPi / 2);
  CHECK(std::abs(g(0, 1)) <= 1e-15);
  CHECK(g(1, 1) == doctest::Approx(std::pow(2.0 - 1.0 / kTwoPi, 2)).epsilon(1e-14));
}

TEST_CASE("points inside the core are rejected") {
  ModelManifold m = ModelManifold::make(Vec2(0.1, 0.0), 1.0);
  CHECK_THROWS_AS(frame_at(m, 0.05, 0.0), Error);
  CHECK_THROWS_AS(metric_at(m, 0.05, 0.0), Error);
  CHECK_THROWS_AS(ModelManifold::make(Vec2(2.0, 0.0), 1.0), Error);
}

TEST_CASE("core distance bounds") {
  ModelManifold m = ModelManifold::make(Vec2(0.0, 0.2), 1.0);
  auto [lo, hi] = core_distance_bounds(m, 0.2);
  CHECK(lo == doctest::Approx(0.2));
  CHECK(hi == doctest::Approx(0.2));
  ModelManifold flat = ModelManifold::make(Vec2::Zero(), 1.0);
  auto [l0, h0] = core_distance_bounds(flat, 0.5);
  CHECK(l0 == doctest::Approx(0.5 * (1.0 - 1.0 / kTwoPi)));
  CHECK(h0 == doctest::Approx(0.5));
}

TEST_CASE("flat development is the chart up to a rigid motion") {
  ModelManifold m = ModelManifold::make(Vec2::Zero(), 1.0);
  Development d = develop(m, 0.7, {0.2, 0.5, 0.9}, 64);
  // Kabsch fit of developed samples to chart points
  Eigen::Matrix2Xd P(2, d.samples.size()), Q(2, d.samples.size());
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    P.col(i) = d.samples[i].f;
    Q.col(i) = chart_map(m, d.samples[i].r, d.samples[i].phi);
  }
  Vec2 pc = P.rowwise().mean(), qc = Q.rowwise().mean();
  Eigen::Matrix2Xd Pc = P.colwise() - pc, Qc = Q.colwise() - qc;
  Eigen::JacobiSVD<Mat2> svd(Qc * Pc.transpose(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat2 R = svd.matrixU() * svd.matrixV().transpose();
  double dev = ((R * Pc) - Qc).colwise().norm().maxCoeff();
  CHECK(dev <= 1e-9);
  CHECK(d.mean_jump.norm() <= 1e-9);
}

TEST_CASE("development jump across the cut equals v") {
  Vec2 v(0.02, 0.01);
  ModelManifold m = ModelManifold::make(v, 1.0);
  Development d = develop(m, 0.3, {0.05, 0.3, 0.8}, 128);
  for (const auto& j : d.cut_jump) CHECK((j - v).norm() <= 1e-9);
}

TEST_CASE("regular inner boundary") {
  for (Vec2 v : {Vec2(1e-2, 0.0), Vec2(0.03, -0.04), Vec2(0.1, 0.1)}) {
    RegularBoundaryReport r = check_regular_boundary(ModelManifold::make(v, 1.0));
    CHECK(r.ok());
    CHECK(r.equivalence_constant <= 6.0);
  }
  CHECK(check_regular_boundary(ModelManifold::make(Vec2::Zero(), 1.0)).ok());
}

TEST_CASE("deviation from the flat annulus decays like |v|/r") {
  for (double b : {1e-3, 1e-2, 1e-1}) {
    ModelManifold m = ModelManifold::make(Vec2(b, 0.0), 1.0);
    for (double r : {2 * b, 10 * b, 1.0}) {
      double s = 0.0;
      for (int j = 0; j < 64; ++j) s = std::max(s, r * chart_deviation(m, r, kTwoPi * j / 64) / b);
      CHECK(s <= 0.25);
      auto [lip, lipinv] = chart_bilipschitz(m, r, 0.3);
      CHECK(lip <= 1.0 + b / r);
      CHECK(lipinv <= 1.0 + b / r);
    }
  }
}
