#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "hippo/model.hpp"
#include "oracles.hpp"

using namespace hippo;

TEST_CASE("soft threshold hand values") {
  Vec x(3);
  x << 3.0, -0.5, 1.0;
  Vec expect(3);
  expect << 2.0, 0.0, 0.0;
  CHECK(soft_threshold(x, 1.0) == expect);
  CHECK(Regularizer::l1(2.0).prox(x, 2.0) == expect);
  Vec y(1);
  y << -4.0;
  CHECK(soft_threshold(y, 1.5)(0) == -2.5);
}

TEST_CASE("l1 prox against grid search") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> v(-5.0, 5.0), w(0.1, 3.0), mu(0.5, 4.0);
  const double step = 1e-4;
  for (int trial = 0; trial < 100; ++trial) {
    const double weight = w(rng), m = mu(rng);
    Vec x(1);
    x << v(rng);
    const double got = Regularizer::l1(weight).prox(x, m)(0);
    CHECK(std::abs(got - oracle::grid_prox_l1(x(0), weight, m, -6.0, 6.0, step)) <= step);
  }
}

TEST_CASE("box prox and zero prox") {
  Vec x(4);
  x << -3.0, -0.2, 0.7, 5.0;
  const auto p = Regularizer::box(-1.0, 1.0).prox(x, 3.0);
  Vec expect(4);
  expect << -1.0, -0.2, 0.7, 1.0;
  CHECK(p == expect);
  CHECK(Regularizer::zero().prox(x, 0.3) == x);
  CHECK_THROWS_AS(Regularizer::zero().prox(x, 0.0), ModelError);
  CHECK(std::isinf(Regularizer::box(-1.0, 1.0).value(x)));
  CHECK(Regularizer::box(-1.0, 1.0).value(expect) == 0.0);
}

TEST_CASE("subdifferential gap") {
  const auto g = Regularizer::l1(1.0);
  Vec theta(3), lambda(3);
  theta << 2.0, -1.0, 0.0;
  lambda << 1.0, -1.0, 0.4;
  CHECK(g.subdifferential_gap(theta, lambda) == 0.0);
  lambda(2) = 1.5;  // |lambda| exceeds the weight at a zero coordinate
  CHECK(g.subdifferential_gap(theta, lambda) == doctest::Approx(0.5));
  Vec t1(1), l1(1);
  t1 << 1.0;
  l1 << 2.0;
  CHECK(Regularizer::box(-1.0, 1.0).subdifferential_gap(t1, l1) == 0.0);
  l1 << -2.0;
  CHECK(Regularizer::box(-1.0, 1.0).subdifferential_gap(t1, l1) == doctest::Approx(2.0));
}

TEST_CASE("local objective value, gradient and Hessian") {
  Mat a(2, 2);
  a << 1.0, 2.0, 3.0, 4.0;
  Vec b(2);
  b << 1.0, -1.0;
  LocalObjective f(a, b, 0.5);
  Vec x(2);
  x << 1.0, 1.0;
  // residual (2, 8): 0.5*(4+64) + 0.25*2
  CHECK(f.value(x) == doctest::Approx(34.5));
  // A^T r + 0.5 x = (2+24, 4+32) + 0.5
  Vec g(2);
  g << 26.5, 36.5;
  CHECK((f.gradient(x) - g).norm() < 1e-12);
  Mat h(2, 2);
  h << 10.5, 14.0, 14.0, 20.5;
  CHECK((f.hessian(x) - h).norm() < 1e-12);

  // finite differences
  std::mt19937_64 rng(3);
  const Vec y = oracle::gaussian(2, rng);
  for (int k = 0; k < 2; ++k) {
    Vec e = Vec::Zero(2);
    e(k) = 1e-6;
    const double fd = (f.value(y + e) - f.value(y - e)) / 2e-6;
    CHECK(fd == doctest::Approx(f.gradient(y)(k)).epsilon(1e-7));
  }
  CHECK((f.gradient_difference(x, y) - (f.gradient(x) - f.gradient(y))).norm() < 1e-10);
  CHECK_THROWS_AS(LocalObjective(a, Vec::Zero(3)), ModelError);
}

TEST_CASE("convexity constants against a dense eigensolver") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<LocalObjective> objs;
    double lo = 1e300, hi = 0.0;
    for (int i = 0; i < 4; ++i) {
      const Mat a = oracle::gaussian(8, 3, rng);
      objs.emplace_back(a, oracle::gaussian(8, rng), 0.1 * i);
      const auto [mn, mx] = oracle::extreme_eigenvalues(a.transpose() * a + 0.1 * i * Mat::Identity(3, 3));
      lo = std::min(lo, mn);
      hi = std::max(hi, mx);
    }
    const auto c = estimate_constants(objs);
    CHECK(c.m_f == doctest::Approx(lo).epsilon(1e-9));
    CHECK(c.M_f == doctest::Approx(hi).epsilon(1e-9));
    CHECK(c.L_f == 0.0);
  }
}

TEST_CASE("rank-deficient data is rejected, ridge repairs it") {
  Mat a(1, 2);
  a << 1.0, 1.0;
  std::vector<LocalObjective> objs{LocalObjective(a, Vec::Ones(1))};
  CHECK_THROWS_AS(estimate_constants(objs), ModelError);
  std::vector<LocalObjective> fixed{LocalObjective(a, Vec::Ones(1), 0.01)};
  CHECK(estimate_constants(fixed).m_f == doctest::Approx(0.01));
}

TEST_CASE("default l1 weight") {
  Mat a = Mat::Identity(2, 2);
  Vec b1(2), b2(2);
  b1 << 1.0, -3.0;
  b2 << 2.0, -4.0;
  std::vector<LocalObjective> objs{LocalObjective(a, b1), LocalObjective(a, b2)};
  CHECK(default_l1_weight(objs) == doctest::Approx(0.7));
}
