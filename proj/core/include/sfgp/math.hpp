#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>

namespace sfgp {

inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Standard normal CDF, absolute error below 1e-14 (erfc-based).
double std_normal_cdf(double x);

/// Standard normal density; 0 at +-infinity.
double std_normal_pdf(double x);

/// P(a < X < b) for X ~ N(mu, sigma^2). Tail-stable: far-tail intervals
/// keep relative precision instead of cancelling to zero.
/// Throws std::domain_error for sigma <= 0.
double gauss_interval_prob(double mu, double sigma, double a, double b);

/// Integral of x * N(x | mu, sigma^2) over [a, b].
double truncated_normal_partial_mean(double mu, double sigma, double a, double b);

/// KL(N(mu_q, var_q) || N(mu_p, var_p)).
double kl_univariate_gauss(double mu_q, double var_q, double mu_p, double var_p);

struct CholeskyResult {
  Eigen::MatrixXd L;  // lower triangular, strictly positive diagonal
  double jitter;      // epsilon actually added to the diagonal
};

/// Cholesky with escalating diagonal jitter eps in {0, base, base*10, ..., base*1e6}.
/// Throws std::runtime_error if every escalation fails.
CholeskyResult cholesky_jitter(const Eigen::MatrixXd& A, double base_jitter);

/// Default base jitter: 1e-6 relative to the mean diagonal of A.
double default_base_jitter(const Eigen::MatrixXd& A);

/// KL(N(q_mean, Lq Lq^T) || N(p_mean, Lp Lp^T)) from Cholesky factors.
double kl_mvn(const Eigen::VectorXd& q_mean, const Eigen::MatrixXd& q_chol,
              const Eigen::VectorXd& p_mean, const Eigen::MatrixXd& p_chol);

/// Neumaier-compensated accumulator for long reductions.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

// double overloads mirroring the tape ops, so templated code works for both.
inline double clamp_min(double x, double floor) { return x < floor ? floor : x; }

inline double softplus(double x) {
  return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline double interval_prob(double mu, double sigma, double a, double b) {
  return gauss_interval_prob(mu, sigma, a, b);
}

}  // namespace sfgp
