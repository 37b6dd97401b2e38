#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfgp/kernel.hpp"
#include "sfgp/math.hpp"
#include "sfgp/piecewise.hpp"

namespace sfgp {

/// q(f_M) = N(a, L L^T); L lower triangular with strictly positive diagonal.
struct VariationalDist {
  Eigen::VectorXd a;
  Eigen::MatrixXd L;
};

struct SVGPModel {
  Eigen::MatrixXd Z;  // M x d inducing locations
  VariationalDist vdist;
  KernelParams kernel;
  std::optional<double> log_noise;  // Gaussian-likelihood models only

  int M() const { return static_cast<int>(Z.rows()); }
  int d() const { return static_cast<int>(Z.cols()); }
};

/// GP prior evaluated at the inducing locations: zero mean and the jittered
/// Gram matrix (returned with the jitter actually used).
struct InducingPrior {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;      // gram(Z) + eps*I
  Eigen::MatrixXd cov_chol;
  double jitter;
};
InducingPrior prior_at_inducing(const SVGPModel& model);

/// Per-point mean/variance of the variational marginal at X, computed via
/// Cholesky solves; variances clamped at 0.
std::vector<GaussianMarginal> marginal_q(const SVGPModel& model, const Eigen::MatrixXd& X);

/// KL(q(f_M) || p(f_M)).
double kl_term(const SVGPModel& model);

/// Fresh model: inducing locations sampled from the training rows without
/// replacement, a = 0, L = 0.1 * I.
SVGPModel init_model(const Eigen::MatrixXd& X, int M, std::uint64_t seed,
                     std::optional<double> log_noise = std::nullopt);

/// Self-describing model checkpoint (JSON on disk).
struct Checkpoint {
  std::string task;  // classify | regress-learnable | regress-hetero | regress-gauss
  SVGPModel model;
  std::optional<SVGPModel> var_model;  // heteroscedastic second GP
  PiecewiseLink link;
  std::uint64_t seed = 0;
  double jitter_used = 0.0;
};

void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace sfgp
