#include "ridg/basis.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <doctest.h>
#include <random>

#include "ridg/errors.hpp"
#include "ridg/law.hpp"

using namespace ridg;

namespace {

// Analytic integral of x^m over [-1,1].
double monomial_integral(int m) { return m % 2 ? 0.0 : 2.0 / (m + 1); }

Eigen::MatrixXd gram_matrix(int dim, int mdeg) {
  const BasisSet basis(dim, mdeg);
  const QuadratureRule rule = gauss_rule(mdeg + 1, dim);
  const std::vector<double> tab = tabulate(basis, rule);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      b(tab.data(), rule.size(), basis.size());
  Eigen::VectorXd w(rule.size());
  const double norm = 1.0 / std::pow(2.0, dim);
  for (int q = 0; q < rule.size(); ++q) w[q] = norm * rule.weights[q];
  return b.transpose() * w.asDiagonal() * b;
}

}  // namespace

TEST_CASE("one point rule is the midpoint") {
  const QuadratureRule r = gauss_rule(1, 1);
  REQUIRE(r.size() == 1);
  CHECK(r.points[0] == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(r.weights[0] == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("two point rule hits the P2 roots") {
  const QuadratureRule r = gauss_rule(2, 1);
  REQUIRE(r.size() == 2);
  const double root = 1.0 / std::sqrt(3.0);
  CHECK(r.points[0] == doctest::Approx(-root).epsilon(1e-15));
  CHECK(r.points[1] == doctest::Approx(root).epsilon(1e-15));
  CHECK(r.weights[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(r.weights[1] == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("three point rule integrates x^4 to 2/5") {
  const QuadratureRule r = gauss_rule(3, 1);
  double acc = 0.0;
  for (int q = 0; q < r.size(); ++q)
    acc += r.weights[q] * std::pow(r.points[q], 4);
  CHECK(acc == doctest::Approx(0.4).epsilon(1e-14));
}

TEST_CASE("rules are exact up to degree 2n-1 and not beyond") {
  for (int n = 1; n <= 12; ++n) {
    const QuadratureRule r = gauss_rule(n, 1);
    for (int m = 0; m <= 2 * n - 1; ++m) {
      double acc = 0.0;
      for (int q = 0; q < r.size(); ++q)
        acc += r.weights[q] * std::pow(r.points[q], m);
      CHECK(std::abs(acc - monomial_integral(m)) < 1e-13);
    }
    // the analytic defect at m = 2n shrinks fast with n (1.8e-7 at n = 12)
    // but stays far above roundoff
    double acc = 0.0;
    for (int q = 0; q < r.size(); ++q)
      acc += r.weights[q] * std::pow(r.points[q], 2 * n);
    CHECK(std::abs(acc - monomial_integral(2 * n)) > 1e-8);
  }
}

TEST_CASE("weights positive, interior points, tensor weight sum") {
  for (int n = 2; n <= 10; ++n) {
    const QuadratureRule r = gauss_rule(n, 1);
    for (int q = 0; q < r.size(); ++q) {
      CHECK(r.weights[q] > 0.0);
      CHECK(std::abs(r.points[q]) < 1.0);
    }
  }
  for (int d = 1; d <= 3; ++d) {
    const QuadratureRule r = gauss_rule(3, d);
    double sum = 0.0;
    for (int q = 0; q < r.size(); ++q) sum += r.weights[q];
    CHECK(sum == doctest::Approx(std::pow(2.0, d)).epsilon(1e-13));
  }
}

TEST_CASE("invalid rule arguments are rejected") {
  CHECK_THROWS_AS(gauss_rule(0, 1), ValidationError);
  CHECK_THROWS_AS(gauss_rule(3, 0), ValidationError);
}

TEST_CASE("constant mode is one, linear mode hits sqrt(3) at the endpoint") {
  const BasisSet b1(1, 3);
  const double xi_mid = 0.217, xi_end = 1.0;
  CHECK(b1.value(0, &xi_mid) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(b1.value(1, &xi_end) == doctest::Approx(std::sqrt(3.0)).epsilon(1e-15));
  const BasisSet b3(3, 2);
  const double xi3[3] = {0.3, -0.8, 0.5};
  CHECK(b3.value(0, xi3) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK_THROWS_AS(b1.value(4, &xi_mid), ValidationError);
}

TEST_CASE("orthonormality up to the supported degrees") {
  struct Case {
    int dim, mdeg;
  };
  for (const Case c : {Case{1, 11}, Case{2, 7}, Case{3, 5}, Case{4, 5}}) {
    const Eigen::MatrixXd g = gram_matrix(c.dim, c.mdeg);
    const Eigen::MatrixXd eye =
        Eigen::MatrixXd::Identity(g.rows(), g.cols());
    CHECK((g - eye).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("projection of a constant and of a linear mode") {
  const BasisSet b(1, 3);
  const QuadratureRule rule = gauss_rule(4, 1);
  const auto c5 = project([](const double*) { return 5.0; }, b, rule);
  CHECK(c5[0] == doctest::Approx(5.0).epsilon(1e-14));
  for (int k = 1; k < b.size(); ++k) CHECK(std::abs(c5[k]) < 1e-14);

  const auto clin = project([](const double* x) { return x[0]; }, b, rule);
  CHECK(clin[1] == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-14));
  CHECK(std::abs(clin[0]) < 1e-15);
  CHECK(std::abs(clin[2]) < 1e-15);
  CHECK(std::abs(clin[3]) < 1e-15);
}

TEST_CASE("bump projection matches a 20-point reference") {
  // One mesh element of width 0.04 centered at 0.4, mapped to [-1,1].
  const double center = 0.4, half = 0.02, c0 = 0.5, omega = 1.0 / 3.0;
  auto f = [&](const double* xi) {
    const double x = center + half * xi[0];
    return bump_ic(&x, &c0, omega, 1);
  };
  const BasisSet b(1, 3);
  const auto coarse = project(f, b, gauss_rule(8, 1));
  const auto fine = project(f, b, gauss_rule(20, 1));
  for (int k = 0; k < b.size(); ++k)
    CHECK(std::abs(coarse[k] - fine[k]) < 1e-10);
}

TEST_CASE("projection reproduces coefficients of polynomials") {
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int dim = 1; dim <= 3; ++dim) {
    const BasisSet b(dim, 3);
    std::vector<double> c(b.size());
    for (double& v : c) v = uni(rng);
    auto f = [&](const double* xi) { return reconstruct(c, b, xi); };
    const auto back = project(f, b, gauss_rule(4, dim));
    for (int k = 0; k < b.size(); ++k)
      CHECK(std::abs(back[k] - c[k]) < 1e-13);
  }
}

TEST_CASE("index maps round trip with axis one fastest") {
  const BasisSet b(3, 2);
  for (int k = 0; k < b.size(); ++k)
    CHECK(b.flat_index(b.multi_index(k)) == k);
  // axis 1 fastest: flat 1 must be the (1,0,0) mode
  const std::array<int, 4> first{1, 0, 0, 0};
  CHECK(b.flat_index(first) == 1);
}

TEST_CASE("derivatives match finite differences") {
  const BasisSet b(2, 4);
  const double xi[2] = {0.37, -0.54};
  const double eps = 1e-6;
  for (int k = 0; k < b.size(); ++k)
    for (int a = 0; a < 2; ++a) {
      double xp[2] = {xi[0], xi[1]};
      double xm[2] = {xi[0], xi[1]};
      xp[a] += eps;
      xm[a] -= eps;
      const double fd = (b.value(k, xp) - b.value(k, xm)) / (2 * eps);
      CHECK(b.derivative(k, a, xi) == doctest::Approx(fd).epsilon(1e-7));
    }
}
