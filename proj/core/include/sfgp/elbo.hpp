#pragma once

#include <Eigen/Dense>
#include <functional>
#include <vector>

#include "sfgp/objective.hpp"
#include "sfgp/piecewise.hpp"
#include "sfgp/svgp.hpp"

namespace sfgp {

/// E[h(ghat(x))] for one piecewise argument: dot product of the level values
/// of h with the interval probabilities.
double piecewise_expectation(const std::vector<double>& h_at_levels,
                             const std::vector<double>& probs);

/// E[h(ghat_1(x_1), ..., ghat_C(x_C))] over independent Gaussian inputs,
/// summed over the cartesian product of interval indices. C is capped at 3;
/// larger C is refused (K^C blow-up).
double product_expectation(const std::function<double(const std::vector<double>&)>& h,
                           const std::vector<const PiecewiseLink*>& links,
                           const std::vector<GaussianMarginal>& marginals);

/// Closed-form objectives. Each wraps the shared evaluation core at T=double;
/// the Monte-Carlo oracle is the independent cross-check.
double bernoulli_elbo(const SVGPModel& model, const PiecewiseLink& link,
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

double hetero_elbo(const SVGPModel& mean_model, const SVGPModel& var_model,
                   const PiecewiseLink& exp_link, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, bool simplified_form = false);

double learnable_gauss_elbo(const SVGPModel& model, const PiecewiseLink& link,
                            const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const RegSpec& reg = {}, bool simplified_form = false);

/// Conjugate Gaussian-likelihood SVGP bound (constant-variance baseline).
double gauss_elbo(const SVGPModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y);

/// Posterior predictive at one query point: a K-component mixture weighted by
/// the interval probabilities of the variational marginal.
struct PredictiveMixture {
  Task task = Task::Bernoulli;
  std::vector<double> weights;
  std::vector<double> comp_mean;  // Bernoulli: success probability g_k
  std::vector<double> comp_var;   // Gaussian components only

  double mixture_mean() const;
  double log_density(double y) const;
  double class_prob() const;  // Bernoulli tasks
};

std::vector<PredictiveMixture> predictive_mixture(const Checkpoint& ckpt,
                                                  const Eigen::MatrixXd& Xstar);

Task task_from_string(const std::string& name);
std::string task_to_string(Task task);

}  // namespace sfgp
