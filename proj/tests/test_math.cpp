#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <functional>
#include <limits>
#include <random>

#include "sfgp/math.hpp"

using namespace sfgp;

namespace {

// Adaptive Simpson quadrature, independent of the implementation under test.
double simpson(const std::function<double(double)>& f, double a, double b) {
  const double c = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(c) + f(b));
}

double adaptive_quad(const std::function<double(double)>& f, double a, double b, double tol,
                     int depth = 0) {
  const double c = 0.5 * (a + b);
  const double whole = simpson(f, a, b);
  const double halves = simpson(f, a, c) + simpson(f, c, b);
  if (depth > 40 || std::abs(whole - halves) < 15.0 * tol) {
    return halves + (halves - whole) / 15.0;
  }
  return adaptive_quad(f, a, c, tol / 2, depth + 1) + adaptive_quad(f, c, b, tol / 2, depth + 1);
}

double normal_density(double x, double mu, double sigma) {
  const double z = (x - mu) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * std::sqrt(2.0 * M_PI));
}

Eigen::MatrixXd random_chol(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd B(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
  }
  Eigen::MatrixXd A = B * B.transpose() + 0.5 * Eigen::MatrixXd::Identity(n, n);
  return Eigen::LLT<Eigen::MatrixXd>(A).matrixL();
}

}  // namespace

TEST_CASE("std_normal_cdf: anchor values") {
  CHECK(std_normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std_normal_cdf(std::numeric_limits<double>::infinity()) == 1.0);
  CHECK(std_normal_cdf(-std::numeric_limits<double>::infinity()) == 0.0);
  // quadrature of the density from far left to 1
  const double expected =
      adaptive_quad([](double x) { return normal_density(x, 0, 1); }, -12.0, 1.0, 1e-14);
  CHECK(std::abs(std_normal_cdf(1.0) - expected) < 1e-12);
  CHECK(std_normal_cdf(1.0) == doctest::Approx(0.8413447461).epsilon(1e-9));
}

TEST_CASE("std_normal_cdf: reflection symmetry and monotonicity") {
  double prev = -1.0;
  for (double x = -9.0; x <= 9.0; x += 0.03125) {
    CHECK(std::abs(std_normal_cdf(x) + std_normal_cdf(-x) - 1.0) < 1e-14);
    const double p = std_normal_cdf(x);
    CHECK(p >= prev);
    prev = p;
  }
}

TEST_CASE("std_normal_pdf") {
  CHECK(std_normal_pdf(0.0) == doctest::Approx(0.3989422804).epsilon(1e-9));
  CHECK(std_normal_pdf(std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(std_normal_pdf(-std::numeric_limits<double>::infinity()) == 0.0);
  CHECK(std_normal_pdf(1.0) == doctest::Approx(0.2419707245).epsilon(1e-9));
}

TEST_CASE("gauss_interval_prob: anchors and quadrature cross-check") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(gauss_interval_prob(0, 1, -inf, inf) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(gauss_interval_prob(0, 1, 0, inf) == doctest::Approx(0.5).epsilon(1e-14));
  const double expected =
      adaptive_quad([](double x) { return normal_density(x, 2, 3); }, 1.0, 4.0, 1e-14);
  CHECK(gauss_interval_prob(2, 3, 1, 4) == doctest::Approx(expected).epsilon(1e-11));
  CHECK(gauss_interval_prob(2, 3, 1, 4) == doctest::Approx(0.3780661).epsilon(1e-6));
  CHECK_THROWS_AS(gauss_interval_prob(0, 0, 0, 1), std::domain_error);
  CHECK_THROWS_AS(gauss_interval_prob(0, -1, 0, 1), std::domain_error);
}

TEST_CASE("gauss_interval_prob: far-tail intervals stay positive") {
  CHECK(gauss_interval_prob(0, 1, 10.0, 10.1) > 0.0);
  CHECK(gauss_interval_prob(0, 1, -20.1, -20.0) > 0.0);
  CHECK(gauss_interval_prob(0, 1, 30.0, 30.01) > 0.0);
}

TEST_CASE("truncated_normal_partial_mean") {
  const double inf = std::numeric_limits<double>::infinity();
  CHECK(truncated_normal_partial_mean(2, 3, -inf, inf) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(truncated_normal_partial_mean(0, 1, 0, inf) ==
        doctest::Approx(0.3989422804).epsilon(1e-9));
  CHECK(std::abs(truncated_normal_partial_mean(0, 1, -1, 1)) < 1e-15);
  // quadrature oracle on a generic instance
  const double expected = adaptive_quad(
      [](double x) { return x * normal_density(x, -0.7, 1.9); }, -2.3, 4.1, 1e-13);
  CHECK(truncated_normal_partial_mean(-0.7, 1.9, -2.3, 4.1) ==
        doctest::Approx(expected).epsilon(1e-10));
  CHECK_THROWS_AS(truncated_normal_partial_mean(0, 0, 0, 1), std::domain_error);
}

TEST_CASE("cholesky_jitter: clean and rank-deficient cases") {
  const Eigen::MatrixXd I3 = Eigen::MatrixXd::Identity(3, 3);
  auto res = cholesky_jitter(I3, 1e-6);
  CHECK(res.jitter == 0.0);
  CHECK((res.L - I3).cwiseAbs().maxCoeff() < 1e-15);

  Eigen::MatrixXd A(2, 2);
  A << 4, 2, 2, 3;
  res = cholesky_jitter(A, 1e-6);
  CHECK(res.L(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(res.L(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(res.L(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));

  Eigen::MatrixXd R(2, 2);
  R << 1, 1, 1, 1;  // rank deficient
  res = cholesky_jitter(R, 1e-6);
  CHECK(res.jitter >= 1e-6);
  const Eigen::MatrixXd diff = res.L * res.L.transpose() - R;
  CHECK(std::abs(diff(0, 1)) < 1e-9);
  CHECK(std::abs(diff(0, 0) - res.jitter) < 1e-9);
}

TEST_CASE("cholesky_jitter: reconstruction property on random PSD matrices") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 2 + static_cast<int>(rng() % 5);
    Eigen::MatrixXd B(n, n);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < n; ++j) B(i, j) = normal(rng);
    }
    const Eigen::MatrixXd A = B * B.transpose();
    const auto res = cholesky_jitter(A, default_base_jitter(A));
    Eigen::MatrixXd target = A;
    target.diagonal().array() += res.jitter;
    const double err = (res.L * res.L.transpose() - target).cwiseAbs().maxCoeff();
    CHECK(err <= 1e-9 * A.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("kl_mvn: anchors") {
  std::mt19937_64 rng(11);
  const Eigen::MatrixXd L = random_chol(4, rng);
  Eigen::VectorXd mu(4);
  mu << 1, -2, 0.5, 3;
  CHECK(std::abs(kl_mvn(mu, L, mu, L)) < 1e-10);

  Eigen::VectorXd one(1), zero(1);
  one << 1;
  zero << 0;
  const Eigen::MatrixXd unit = Eigen::MatrixXd::Identity(1, 1);
  CHECK(kl_mvn(one, unit, zero, unit) == doctest::Approx(0.5).epsilon(1e-12));

  CHECK_THROWS_AS(kl_mvn(one, unit, mu, L), std::invalid_argument);
}

TEST_CASE("kl_mvn: matches Monte-Carlo E_q[log q - log p]") {
  std::mt19937_64 rng(123);
  std::normal_distribution<double> normal;
  const int n = 3;
  const Eigen::MatrixXd Lq = random_chol(n, rng);
  const Eigen::MatrixXd Lp = random_chol(n, rng);
  Eigen::VectorXd mq(n), mp(n);
  for (int i = 0; i < n; ++i) {
    mq[i] = normal(rng);
    mp[i] = normal(rng);
  }
  auto log_density = [n](const Eigen::VectorXd& x, const Eigen::VectorXd& m,
                         const Eigen::MatrixXd& L) {
    const Eigen::VectorXd z = L.triangularView<Eigen::Lower>().solve(x - m);
    return -0.5 * (n * kLog2Pi + z.squaredNorm()) - L.diagonal().array().log().sum();
  };
  const std::size_t samples = 1000000;
  CompensatedSum sum, sum_sq;
  Eigen::VectorXd eps(n);
  for (std::size_t s = 0; s < samples; ++s) {
    for (int i = 0; i < n; ++i) eps[i] = normal(rng);
    const Eigen::VectorXd x = mq + Lq * eps;
    const double val = log_density(x, mq, Lq) - log_density(x, mp, Lp);
    sum.add(val);
    sum_sq.add(val * val);
  }
  const double mean = sum.value() / samples;
  const double se =
      std::sqrt((sum_sq.value() / samples - mean * mean) / static_cast<double>(samples));
  CHECK(std::abs(kl_mvn(mq, Lq, mp, Lp) - mean) < 4.0 * se);
}

TEST_CASE("kl_mvn: nonnegative on random instances, zero iff equal") {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 1000; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 4);
    const Eigen::MatrixXd Lq = random_chol(n, rng);
    const Eigen::MatrixXd Lp = random_chol(n, rng);
    Eigen::VectorXd mq(n), mp(n);
    for (int i = 0; i < n; ++i) {
      mq[i] = normal(rng);
      mp[i] = normal(rng);
    }
    const double kl = kl_mvn(mq, Lq, mp, Lp);
    CHECK(kl >= -1e-10);
    const bool params_match = (mq - mp).norm() < 1e-9 && (Lq - Lp).norm() < 1e-9;
    if (kl < 1e-12) CHECK(params_match);
    if (params_match) CHECK(kl < 1e-9);
  }
}

TEST_CASE("kl_univariate_gauss") {
  CHECK(kl_univariate_gauss(0.3, 1.7, 0.3, 1.7) == 0.0);
  CHECK(kl_univariate_gauss(0, 1, 0, 4) == doctest::Approx(0.3181471806).epsilon(1e-10));
  CHECK(kl_univariate_gauss(1, 2, 0, 1) == doctest::Approx(0.6534264097).epsilon(1e-10));
  CHECK_THROWS_AS(kl_univariate_gauss(0, -1, 0, 1), std::domain_error);
  CHECK_THROWS_AS(kl_univariate_gauss(0, 1, 0, 0), std::domain_error);
}

TEST_CASE("compensated summation keeps small terms") {
  CompensatedSum acc;
  acc.add(1e16);
  for (int i = 0; i < 10000; ++i) acc.add(1.0);
  acc.add(-1e16);
  CHECK(acc.value() == doctest::Approx(10000.0).epsilon(1e-12));
}
