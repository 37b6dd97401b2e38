#include "sfgp/math.hpp"

#include <limits>
#include <stdexcept>

namespace sfgp {

double std_normal_cdf(double x) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  // Reflected complementary-error-function form keeps full precision in the
  // left tail; the right tail saturates to 1 as it should.
  return 0.5 * std::erfc(-x * kInvSqrt2);
}

double std_normal_pdf(double x) {
  if (std::isinf(x)) return 0.0;
  return kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

namespace {

// Upper tail P(X > x), precise for large positive x.
double upper_tail(double x) {
  if (std::isinf(x)) return x > 0 ? 0.0 : 1.0;
  return 0.5 * std::erfc(x * kInvSqrt2);
}

}  // namespace

double gauss_interval_prob(double mu, double sigma, double a, double b) {
  if (!(sigma > 0.0)) throw std::domain_error("gauss_interval_prob: sigma must be > 0");
  if (a > b) throw std::domain_error("gauss_interval_prob: requires a <= b");
  const double za = std::isinf(a) ? a : (a - mu) / sigma;
  const double zb = std::isinf(b) ? b : (b - mu) / sigma;
  double p;
  if (za >= 0.0) {
    p = upper_tail(za) - upper_tail(zb);  // both on the right tail
  } else if (zb <= 0.0) {
    p = upper_tail(-zb) - upper_tail(-za);  // both on the left tail
  } else {
    p = std_normal_cdf(zb) - std_normal_cdf(za);  // interval straddles the mean
  }
  return p < 0.0 ? 0.0 : p;
}

double truncated_normal_partial_mean(double mu, double sigma, double a, double b) {
  if (!(sigma > 0.0)) throw std::domain_error("truncated_normal_partial_mean: sigma must be > 0");
  if (a > b) throw std::domain_error("truncated_normal_partial_mean: requires a <= b");
  const double za = std::isinf(a) ? a : (a - mu) / sigma;
  const double zb = std::isinf(b) ? b : (b - mu) / sigma;
  const double mass = gauss_interval_prob(mu, sigma, a, b);
  return mu * mass + sigma * (std_normal_pdf(za) - std_normal_pdf(zb));
}

double kl_univariate_gauss(double mu_q, double var_q, double mu_p, double var_p) {
  if (!(var_q > 0.0) || !(var_p > 0.0)) {
    throw std::domain_error("kl_univariate_gauss: variances must be > 0");
  }
  const double dm = mu_q - mu_p;
  return 0.5 * (std::log(var_p / var_q) + (var_q + dm * dm) / var_p - 1.0);
}

double default_base_jitter(const Eigen::MatrixXd& A) {
  return 1e-6 * A.diagonal().mean();
}

CholeskyResult cholesky_jitter(const Eigen::MatrixXd& A, double base_jitter) {
  const Eigen::Index n = A.rows();
  if (A.cols() != n) throw std::invalid_argument("cholesky_jitter: matrix not square");
  const Eigen::MatrixXd sym = 0.5 * (A + A.transpose());
  // an attempt only counts as a success when the smallest eigenvalue is large
  // enough to trust: effectively singular matrices can factorize "cleanly"
  // through round-off alone, and downstream solves then amplify noise into
  // enormous gradients (Cholesky pivots do not reveal this, so check spectra)
  const double eig_floor = 1e-10 * std::max(sym.diagonal().mean(), 0.0);
  double eps = 0.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    Eigen::MatrixXd candidate = sym;
    candidate.diagonal().array() += eps;
    const double min_eig =
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(candidate, Eigen::EigenvaluesOnly)
            .eigenvalues()
            .minCoeff();
    if (min_eig >= eig_floor && min_eig > 0.0) {
      Eigen::LLT<Eigen::MatrixXd> llt(candidate);
      if (llt.info() == Eigen::Success) {
        Eigen::MatrixXd L = llt.matrixL();
        if ((L.diagonal().array() > 0.0).all()) return {std::move(L), eps};
      }
    }
    eps = (attempt == 0) ? base_jitter : eps * 10.0;
  }
  throw std::runtime_error("cholesky_jitter: matrix not positive definite after jitter escalation");
}

double kl_mvn(const Eigen::VectorXd& q_mean, const Eigen::MatrixXd& q_chol,
              const Eigen::VectorXd& p_mean, const Eigen::MatrixXd& p_chol) {
  const Eigen::Index n = q_mean.size();
  if (p_mean.size() != n || q_chol.rows() != n || p_chol.rows() != n) {
    throw std::invalid_argument("kl_mvn: dimension mismatch");
  }
  const Eigen::MatrixXd Y = p_chol.triangularView<Eigen::Lower>().solve(q_chol);
  const double trace_term = Y.squaredNorm();
  const Eigen::VectorXd c = p_chol.triangularView<Eigen::Lower>().solve(q_mean - p_mean);
  const double quad = c.squaredNorm();
  const double logdet_p = 2.0 * p_chol.diagonal().array().log().sum();
  const double logdet_q = 2.0 * q_chol.diagonal().array().log().sum();
  return 0.5 * (trace_term + quad - static_cast<double>(n) + logdet_p - logdet_q);
}

}  // namespace sfgp
