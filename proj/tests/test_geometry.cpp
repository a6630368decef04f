#include <cmath>
#include <random>

#include "doctest.h"
#include "trade/geometry.hpp"

using namespace trade;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

Vec random_vec(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = nd(rng);
  return v;
}

}  // namespace

TEST_CASE("angle_between on axis-aligned pairs") {
  CHECK(angle_between(v2(1, 0), v2(0, 1)) == doctest::Approx(kHalfPi).epsilon(1e-15));
  CHECK(angle_between(v2(1, 0), v2(1, 0)) == 0.0);
  CHECK(angle_between(v2(1, 1), v2(1, 0)) == doctest::Approx(kPi / 4).epsilon(1e-15));
  CHECK(angle_between(v2(1, 0), v2(-1, 0)) == doctest::Approx(kPi));
  CHECK_THROWS_AS(angle_between(v2(0, 0), v2(1, 0)), DomainError);
}

TEST_CASE("angle_between stays finite on nearly parallel vectors") {
  const Vec a = v3(1, 1e-9, 0);
  const Vec b = v3(1, 0, 0);
  const double ang = angle_between(a * 1e8, b);
  CHECK(std::isfinite(ang));
  CHECK(ang == doctest::Approx(1e-9).epsilon(1e-3));
}

TEST_CASE("angle_between is symmetric and scale invariant") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    const Vec a = random_vec(rng, n), b = random_vec(rng, n);
    const double ab = angle_between(a, b);
    CHECK(std::abs(ab - angle_between(b, a)) <= 1e-12);
    CHECK(std::abs(ab - angle_between(scale(rng) * a, scale(rng) * b)) <= 1e-9);
  }
}

TEST_CASE("cone_contains") {
  const GradientCone c(v2(1, 0), kPi / 4);
  CHECK(cone_contains(c, v2(1, 0.5)));
  CHECK_FALSE(cone_contains(c, v2(0, 1)));
  const GradientCone half(v2(1, 1).normalized(), kHalfPi);
  CHECK_FALSE(cone_contains(half, v2(-1, -1)));
  CHECK(cone_contains(half, v2(1, -1)));  // boundary is inside
  CHECK_THROWS_AS(cone_contains(c, v2(0, 0)), DomainError);
}

TEST_CASE("GradientCone validates its inputs") {
  CHECK_THROWS_AS(GradientCone(v2(2, 0), 0.5), DomainError);
  CHECK_THROWS_AS(GradientCone(v2(1, 0), -0.1), DomainError);
  CHECK_THROWS_AS(GradientCone(v2(1, 0), kHalfPi + 0.1), DomainError);
  CHECK_NOTHROW(GradientCone(v2(1, 0), kHalfPi));
}

TEST_CASE("orthonormal_extension examples") {
  SUBCASE("axis complement") {
    const auto ext = orthonormal_extension({v3(1, 0, 0)}, 3);
    REQUIRE(ext.size() == 2);
    for (const auto& e : ext) {
      CHECK(std::abs(e[0]) <= 1e-12);
      CHECK(std::abs(e.norm() - 1) <= 1e-12);
    }
    CHECK(std::abs(ext[0].dot(ext[1])) <= 1e-12);
  }
  SUBCASE("empty fixed set") {
    const auto ext = orthonormal_extension({}, 2);
    REQUIRE(ext.size() == 2);
    CHECK(std::abs(ext[0].dot(ext[1])) <= 1e-12);
  }
  SUBCASE("single remaining direction") {
    const auto ext = orthonormal_extension({v3(1, 1, 0) / std::sqrt(2.0), v3(0, 0, 1)}, 3);
    REQUIRE(ext.size() == 1);
    const Vec expect = v3(1, -1, 0) / std::sqrt(2.0);
    CHECK(std::abs(std::abs(ext[0].dot(expect)) - 1.0) <= 1e-12);
  }
  SUBCASE("dependent input") {
    CHECK_THROWS_AS(orthonormal_extension({v3(1, 0, 0), v3(2, 0, 0)}, 3), DegeneracyError);
  }
}

TEST_CASE("orthonormal_extension property: orthonormal completion") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 7;
    const int k = trial % n;
    std::vector<Vec> fixed;
    for (int i = 0; i < k; ++i) fixed.push_back(random_vec(rng, n));
    const auto ext = orthonormal_extension(fixed, n);
    REQUIRE(static_cast<int>(ext.size()) == n - k);
    for (std::size_t i = 0; i < ext.size(); ++i) {
      CHECK(std::abs(ext[i].norm() - 1.0) <= 1e-9);
      for (std::size_t j = i + 1; j < ext.size(); ++j) CHECK(std::abs(ext[i].dot(ext[j])) <= 1e-9);
      for (const auto& f : fixed) CHECK(std::abs(ext[i].dot(f)) <= 1e-9 * f.norm());
    }
  }
}

TEST_CASE("rotate_towards examples and properties") {
  CHECK((rotate_towards(v2(1, 0), v2(0, 1), kHalfPi) - v2(0, 1)).norm() <= 1e-15);
  CHECK((rotate_towards(v2(1, 0), v2(0, 1), 0.0) - v2(1, 0)).norm() == 0.0);
  const double h = std::sqrt(2.0) / 2;
  CHECK((rotate_towards(v3(1, 0, 0), v3(0, 1, 0), kPi / 4) - v3(h, h, 0)).norm() <= 1e-15);
  CHECK_THROWS_AS(rotate_towards(v2(1, 0), v2(1, 1).normalized(), 0.3), DomainError);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> phi(0.0, kHalfPi);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    const Vec u = random_vec(rng, n).normalized();
    const Vec w = orthonormal_extension({u}, n).front();
    const double p = phi(rng);
    const Vec r = rotate_towards(u, w, p);
    CHECK(std::abs(r.norm() - 1.0) <= 1e-9);
    CHECK(std::abs(angle_between(r, u) - p) <= 1e-7);  // acos loses digits near zero
  }
}

TEST_CASE("spectral_radius_symmetric matches a dense eigensolver") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + trial % 5;
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = unit(rng);
    const Mat q = -(m * m.transpose());
    const Eigen::SelfAdjointEigenSolver<Mat> es(q);
    const double oracle = es.eigenvalues().cwiseAbs().maxCoeff();
    CHECK(std::abs(spectral_radius_symmetric(q) - oracle) <= 1e-6 * oracle);
  }
  CHECK(spectral_radius_symmetric(Mat::Zero(3, 3)) == 0.0);
}
