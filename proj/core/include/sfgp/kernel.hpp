#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>

namespace sfgp {

/// Squared-exponential kernel parameters, stored as logs so positivity is
/// free under unconstrained optimization.
struct KernelParams {
  double log_v = 0.0;  // log signal variance
  double log_s = 0.0;  // log lengthscale (isotropic)

  double v() const { return std::exp(log_v); }
  double s() const { return std::exp(log_s); }
};

inline double se_kernel(const Eigen::VectorXd& x, const Eigen::VectorXd& x2,
                        const KernelParams& p) {
  if (x.size() != x2.size()) throw std::invalid_argument("se_kernel: dimension mismatch");
  const double s = p.s();
  return p.v() * std::exp(-0.5 * (x - x2).squaredNorm() / (s * s));
}

inline Eigen::MatrixXd cross_gram(const Eigen::MatrixXd& X, const Eigen::MatrixXd& Z,
                                  const KernelParams& p) {
  if (X.cols() != Z.cols()) throw std::invalid_argument("cross_gram: dimension mismatch");
  const double inv2s2 = 0.5 * std::exp(-2.0 * p.log_s);
  const double v = p.v();
  Eigen::MatrixXd out(X.rows(), Z.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < Z.rows(); ++j) {
      out(i, j) = v * std::exp(-(X.row(i) - Z.row(j)).squaredNorm() * inv2s2);
    }
  }
  return out;
}

inline Eigen::MatrixXd gram(const Eigen::MatrixXd& X, const KernelParams& p) {
  const double inv2s2 = 0.5 * std::exp(-2.0 * p.log_s);
  const double v = p.v();
  Eigen::MatrixXd out(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    out(i, i) = v;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double k = v * std::exp(-(X.row(i) - X.row(j)).squaredNorm() * inv2s2);
      out(i, j) = k;
      out(j, i) = k;
    }
  }
  return out;
}

}  // namespace sfgp
