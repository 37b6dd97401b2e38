#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sfgp/objective.hpp"

namespace sfgp {

struct AdamConfig {
  double alpha = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamConfig cfg;
  int step = 0;
  Eigen::VectorXd m;  // first moment
  Eigen::VectorXd v;  // second moment

  explicit AdamState(int n_params, AdamConfig c = {})
      : cfg(c), m(Eigen::VectorXd::Zero(n_params)), v(Eigen::VectorXd::Zero(n_params)) {}
};

/// One bias-corrected Adam ascent step (maximization).
void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad);

struct FitConfig {
  int iters = 1000;
  AdamConfig adam;
  double early_stop_tol = 1e-6;  // |delta ELBO| threshold
  int early_stop_patience = 25;  // consecutive small-delta steps before stopping
  // rescale the gradient when its norm exceeds this; a single pathological
  // step otherwise inflates Adam's second-moment state and stalls the run
  double clip_norm = 100.0;  // <= 0 disables clipping
  bool record_grad_norm = false;
};

struct FitResult {
  Eigen::VectorXd theta;
  Theta params;
  std::vector<double> elbo_trace;       // one value per completed step
  std::vector<double> grad_norm_trace;  // when recorded
  double jitter_used = 0.0;
  int steps_run = 0;
};

/// Full-batch Adam over the objective. Numerical failures are rethrown with
/// the step index attached.
FitResult fit(const Problem& problem, const Theta& init, const FitConfig& cfg);

/// Central finite differences, h_i = h_scale * max(1, |theta_i|). Test/CLI
/// utility; independent of the reverse-mode path.
Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& theta, double h_scale = 1e-5);

}  // namespace sfgp
