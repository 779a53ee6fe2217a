#include <cmath>

#include "doctest.h"
#include "loca/quadrature.hpp"

using namespace loca;

TEST_SUITE_BEGIN("quadrature");

TEST_CASE("reference nodes for tiny orders") {
  QuadratureRule r1 = gauss_legendre({-1.0}, {1.0}, {1});
  CHECK(r1.nodes.v[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r1.weights.v[0] == doctest::Approx(2.0).epsilon(1e-15));

  QuadratureRule r2 = gauss_legendre({-1.0}, {1.0}, {2});
  double c = 1.0 / std::sqrt(3.0);
  CHECK(std::abs(std::abs(r2.nodes.v[0]) - c) < 1e-15);
  CHECK(std::abs(std::abs(r2.nodes.v[1]) - c) < 1e-15);
  CHECK(r2.weights.v[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r2.weights.v[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("polynomial exactness through degree 2Q-1 on [0,1]") {
  for (std::size_t q = 1; q <= 10; ++q) {
    QuadratureRule r = gauss_legendre({0.0}, {1.0}, {q});
    for (std::size_t deg = 0; deg <= 2 * q - 1; ++deg) {
      std::vector<double> f(r.count());
      for (std::size_t i = 0; i < r.count(); ++i) f[i] = std::pow(r.nodes.v[i], double(deg));
      double got = apply_rule(r, f);
      double want = 1.0 / (deg + 1.0);
      CHECK(std::abs(got - want) / want < 1e-13);
    }
  }
}

TEST_CASE("x^9 with five nodes on [0,1]") {
  QuadratureRule r = gauss_legendre({0.0}, {1.0}, {5});
  std::vector<double> f(5);
  for (std::size_t i = 0; i < 5; ++i) f[i] = std::pow(r.nodes.v[i], 9.0);
  CHECK(std::abs(apply_rule(r, f) - 0.1) < 1e-14);
}

TEST_CASE("weights are positive and sum to the box volume") {
  QuadratureRule r = gauss_legendre({0.0, -1.0}, {2.0, 3.0}, {7, 5});
  CHECK(r.count() == 35);
  double s = 0.0;
  for (double w : r.weights.v) {
    CHECK(w > 0.0);
    s += w;
  }
  CHECK(s == doctest::Approx(8.0).epsilon(1e-13));
  // 2d polynomial: integral of x^3 y^2 over [0,2]x[-1,3]
  std::vector<double> f(r.count());
  for (std::size_t i = 0; i < r.count(); ++i) {
    double x = r.nodes.v[i * 2], y = r.nodes.v[i * 2 + 1];
    f[i] = x * x * x * y * y;
  }
  double want = (16.0 / 4.0) * (27.0 + 1.0) / 3.0;
  CHECK(std::abs(apply_rule(r, f) - want) / want < 1e-13);
}

TEST_CASE("nodes stay inside the box") {
  QuadratureRule r = gauss_legendre({0.25}, {0.75}, {20});
  for (std::size_t i = 0; i < r.count(); ++i) {
    CHECK(r.nodes.v[i] > 0.25);
    CHECK(r.nodes.v[i] < 0.75);
  }
}

TEST_CASE("monte carlo: equal weights, seeded reproducibility, box containment") {
  Rng a(77), b(77);
  QuadratureRule ra = monte_carlo({0.0, 0.0}, {1.0, 2.0}, 64, a);
  QuadratureRule rb = monte_carlo({0.0, 0.0}, {1.0, 2.0}, 64, b);
  CHECK(ra.nodes.v == rb.nodes.v);
  for (double w : ra.weights.v) CHECK(w == doctest::Approx(2.0 / 64.0).epsilon(1e-15));
  for (std::size_t i = 0; i < 64; ++i) {
    CHECK(ra.nodes.v[i * 2] >= 0.0);
    CHECK(ra.nodes.v[i * 2] < 1.0);
    CHECK(ra.nodes.v[i * 2 + 1] >= 0.0);
    CHECK(ra.nodes.v[i * 2 + 1] < 2.0);
  }
}

TEST_CASE("monte carlo rule can alias an existing point set") {
  Tensor pts({3, 1}, {0.1, 0.5, 0.9});
  QuadratureRule r = monte_carlo_from_points(pts, {0.0}, {1.0});
  CHECK(r.nodes.v == pts.v);
  for (double w : r.weights.v) CHECK(w == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("degenerate requests are config errors") {
  Rng rng(1);
  CHECK_THROWS_AS(gauss_legendre({0.0}, {1.0}, {0}), ConfigError);
  CHECK_THROWS_AS(gauss_legendre({1.0}, {1.0}, {3}), ConfigError);
  CHECK_THROWS_AS(monte_carlo({0.0}, {1.0}, 0, rng), ConfigError);
}

TEST_SUITE_END();
