#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "sfgp/kernel.hpp"

using namespace sfgp;

namespace {
KernelParams params(double v, double s) {
  return {std::log(v), std::log(s)};
}
}  // namespace

TEST_CASE("se_kernel anchors") {
  Eigen::VectorXd x(2), y(2);
  x << 1.0, -2.0;
  y = x;
  CHECK(se_kernel(x, y, params(2.5, 1.0)) == doctest::Approx(2.5).epsilon(1e-15));

  y << 1.0, -1.0;  // distance 1
  CHECK(se_kernel(x, y, params(1.0, 1.0)) == doctest::Approx(std::exp(-0.5)).epsilon(1e-15));

  Eigen::VectorXd a(2), b(2);
  a << 0.0, 0.0;
  b << 3.0, 4.0;  // distance 5
  CHECK(se_kernel(a, b, params(1.0, 2.0)) == doctest::Approx(std::exp(-25.0 / 8.0)).epsilon(1e-12));
  CHECK(se_kernel(a, b, params(1.0, 2.0)) == doctest::Approx(0.0439369).epsilon(1e-5));

  Eigen::VectorXd c(3);
  CHECK_THROWS_AS(se_kernel(a, c, params(1, 1)), std::invalid_argument);
}

TEST_CASE("se_kernel symmetry, translation invariance, monotone decay") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  const KernelParams p = params(1.7, 0.8);
  for (int trial = 0; trial < 50; ++trial) {
    Eigen::VectorXd x(3), y(3), shift(3);
    for (int i = 0; i < 3; ++i) {
      x[i] = normal(rng);
      y[i] = normal(rng);
      shift[i] = normal(rng);
    }
    CHECK(se_kernel(x, y, p) == doctest::Approx(se_kernel(y, x, p)).epsilon(1e-15));
    CHECK(se_kernel(x + shift, y + shift, p) == doctest::Approx(se_kernel(x, y, p)).epsilon(1e-12));
  }
  // decay along a ray
  Eigen::VectorXd origin = Eigen::VectorXd::Zero(2);
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 0.0; r < 6.0; r += 0.1) {
    Eigen::VectorXd pt(2);
    pt << r, 0.0;
    const double k = se_kernel(origin, pt, p);
    CHECK(k <= prev + 1e-15);
    prev = k;
  }
}

TEST_CASE("gram: shape, symmetry, diagonal, PSD") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> normal;
  const KernelParams p = params(2.0, 1.3);

  Eigen::MatrixXd one_row(1, 3);
  one_row << 0.1, 0.2, 0.3;
  const Eigen::MatrixXd g1 = gram(one_row, p);
  CHECK(g1.rows() == 1);
  CHECK(g1(0, 0) == doctest::Approx(2.0).epsilon(1e-15));

  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 6);
    Eigen::MatrixXd X(n, 2);
    for (int i = 0; i < n; ++i) {
      X(i, 0) = normal(rng);
      X(i, 1) = normal(rng);
    }
    const Eigen::MatrixXd G = gram(X, p);
    CHECK((G - G.transpose()).cwiseAbs().maxCoeff() < 1e-15);
    CHECK((G.diagonal().array() - p.v()).abs().maxCoeff() < 1e-15);
    CHECK((G - cross_gram(X, X, p)).cwiseAbs().maxCoeff() < 1e-15);
    const Eigen::VectorXd eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(G).eigenvalues();
    CHECK(eig.minCoeff() >= -1e-10);
  }
}

TEST_CASE("cross_gram shape and dimension checks") {
  const KernelParams p = params(1.0, 1.0);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(5, 2);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Random(3, 2);
  const Eigen::MatrixXd C = cross_gram(X, Z, p);
  CHECK(C.rows() == 5);
  CHECK(C.cols() == 3);
  Eigen::MatrixXd Zbad = Eigen::MatrixXd::Random(3, 4);
  CHECK_THROWS_AS(cross_gram(X, Zbad, p), std::invalid_argument);
}
