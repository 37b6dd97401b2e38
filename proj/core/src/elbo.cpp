#include "sfgp/elbo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace sfgp {

double piecewise_expectation(const std::vector<double>& h_at_levels,
                             const std::vector<double>& probs) {
  if (h_at_levels.size() != probs.size()) {
    throw std::invalid_argument("piecewise_expectation: length mismatch");
  }
  CompensatedSum acc;
  for (std::size_t k = 0; k < probs.size(); ++k) acc.add(h_at_levels[k] * probs[k]);
  return acc.value();
}

double product_expectation(const std::function<double(const std::vector<double>&)>& h,
                           const std::vector<const PiecewiseLink*>& links,
                           const std::vector<GaussianMarginal>& marginals) {
  const std::size_t C = links.size();
  if (C == 0 || C != marginals.size()) {
    throw std::invalid_argument("product_expectation: need 1..3 link/marginal pairs");
  }
  if (C > 3) {
    throw std::invalid_argument(
        "product_expectation: refused for C > 3 (cartesian-product cost K^C)");
  }
  std::vector<std::vector<double>> probs(C);
  for (std::size_t c = 0; c < C; ++c) {
    probs[c] = interval_probs(links[c]->partition, marginals[c]);
  }
  std::vector<std::size_t> idx(C, 0);
  std::vector<double> args(C);
  CompensatedSum acc;
  for (;;) {
    double w = 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      args[c] = links[c]->levels[idx[c]];
      w *= probs[c][idx[c]];
    }
    acc.add(h(args) * w);
    std::size_t c = 0;
    while (c < C && ++idx[c] == probs[c].size()) idx[c++] = 0;
    if (c == C) break;
  }
  return acc.value();
}

namespace {

Problem base_problem(Task task, const PiecewiseLink& link, const Eigen::MatrixXd& X,
                     const Eigen::VectorXd& y, int M) {
  Problem pb;
  pb.task = task;
  pb.partition = link.partition;
  pb.link_mode = link.mode;
  if (link.mode == LinkMode::Fixed || task == Task::HeteroGauss) pb.fixed_levels = link.levels;
  pb.X = X;
  pb.y = y;
  pb.M = M;
  return pb;
}

double eval_via_problem(Problem pb, const SVGPModel& model, const PiecewiseLink& link,
                        const SVGPModel* var_model = nullptr) {
  pb.validate();
  const Theta theta = theta_from(model, link, var_model);
  return objective_value(pb, pack(layout_for(pb), theta), theta);
}

}  // namespace

double bernoulli_elbo(const SVGPModel& model, const PiecewiseLink& link,
                      const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  Problem pb = base_problem(Task::Bernoulli, link, X, y, model.M());
  PiecewiseLink l = link;
  if (l.mode == LinkMode::TrainablePoint) {
    // library callers hold levels in (0,1); the parameter vector is pre-sigmoid
    for (double& g : l.levels) {
      const double c = std::clamp(g, 1e-12, 1.0 - 1e-12);
      g = std::log(c / (1.0 - c));
    }
  }
  return eval_via_problem(std::move(pb), model, l);
}

double hetero_elbo(const SVGPModel& mean_model, const SVGPModel& var_model,
                   const PiecewiseLink& exp_link, const Eigen::MatrixXd& X,
                   const Eigen::VectorXd& y, bool simplified_form) {
  Problem pb = base_problem(Task::HeteroGauss, exp_link, X, y, mean_model.M());
  pb.link_mode = LinkMode::Fixed;
  pb.simplified_form = simplified_form;
  return eval_via_problem(std::move(pb), mean_model, exp_link, &var_model);
}

double learnable_gauss_elbo(const SVGPModel& model, const PiecewiseLink& link,
                            const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                            const RegSpec& reg, bool simplified_form) {
  if (!model.log_noise) {
    throw std::invalid_argument("learnable_gauss_elbo: model needs a noise parameter");
  }
  Problem pb = base_problem(Task::LearnableGauss, link, X, y, model.M());
  pb.reg = reg;
  pb.simplified_form = simplified_form;
  return eval_via_problem(std::move(pb), model, link);
}

double gauss_elbo(const SVGPModel& model, const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  if (!model.log_noise) throw std::invalid_argument("gauss_elbo: model needs a noise parameter");
  Problem pb;
  pb.task = Task::Gauss;
  pb.X = X;
  pb.y = y;
  pb.M = model.M();
  return eval_via_problem(std::move(pb), model, PiecewiseLink{});
}

double PredictiveMixture::mixture_mean() const {
  CompensatedSum acc;
  for (std::size_t k = 0; k < weights.size(); ++k) acc.add(weights[k] * comp_mean[k]);
  return acc.value();
}

double PredictiveMixture::class_prob() const {
  if (task != Task::Bernoulli) throw std::logic_error("class_prob: not a classification mixture");
  const double p = mixture_mean();
  return std::clamp(p, 1e-12, 1.0 - 1e-12);
}

double PredictiveMixture::log_density(double y) const {
  if (task == Task::Bernoulli) {
    const double p = class_prob();
    return y == 1.0 ? std::log(p) : std::log1p(-p);
  }
  // log sum_k w_k N(y | m_k, v_k), via logsumexp
  double max_term = -std::numeric_limits<double>::infinity();
  std::vector<double> terms(weights.size());
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k] <= 0.0) {
      terms[k] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double diff = y - comp_mean[k];
    terms[k] = std::log(weights[k]) -
               0.5 * (kLog2Pi + std::log(comp_var[k]) + diff * diff / comp_var[k]);
    max_term = std::max(max_term, terms[k]);
  }
  if (!std::isfinite(max_term)) return max_term;
  CompensatedSum acc;
  for (double t : terms) acc.add(std::exp(t - max_term));
  return max_term + std::log(acc.value());
}

std::vector<PredictiveMixture> predictive_mixture(const Checkpoint& ckpt,
                                                  const Eigen::MatrixXd& Xstar) {
  const Task task = task_from_string(ckpt.task);
  const int K = ckpt.link.size();
  std::vector<PredictiveMixture> out(Xstar.rows());

  if (task == Task::Gauss) {
    const double sigma2 = std::exp(ckpt.model.log_noise.value());
    const auto marg = marginal_q(ckpt.model, Xstar);
    for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
      out[i] = {task, {1.0}, {marg[i].mean}, {sigma2 + marg[i].var}};
    }
    return out;
  }

  if (task == Task::HeteroGauss) {
    if (!ckpt.var_model) throw std::invalid_argument("predictive: missing variance model");
    const auto marg_mu = marginal_q(ckpt.model, Xstar);
    const auto marg_sig = marginal_q(*ckpt.var_model, Xstar);
    for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
      PredictiveMixture m;
      m.task = task;
      m.weights = interval_probs(ckpt.link.partition, marg_sig[i]);
      m.comp_mean.assign(K, marg_mu[i].mean);
      m.comp_var.resize(K);
      for (int k = 0; k < K; ++k) m.comp_var[k] = ckpt.link.levels[k] + marg_mu[i].var;
      out[i] = std::move(m);
    }
    return out;
  }

  const auto marg = marginal_q(ckpt.model, Xstar);
  for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
    PredictiveMixture m;
    m.task = task;
    m.weights = interval_probs(ckpt.link.partition, marg[i]);
    if (task == Task::Bernoulli) {
      m.comp_mean = ckpt.link.levels;
    } else {  // LearnableGauss
      const double sigma2 = std::exp(ckpt.model.log_noise.value());
      m.comp_mean = ckpt.link.levels;
      m.comp_var.assign(K, sigma2);
      if (ckpt.link.mode == LinkMode::TrainableGaussian) {
        for (int k = 0; k < K; ++k) m.comp_var[k] = sigma2 + ckpt.link.level_var[k];
      }
    }
    out[i] = std::move(m);
  }
  return out;
}

Task task_from_string(const std::string& name) {
  if (name == "classify") return Task::Bernoulli;
  if (name == "regress-hetero") return Task::HeteroGauss;
  if (name == "regress-learnable") return Task::LearnableGauss;
  if (name == "regress-gauss") return Task::Gauss;
  throw std::invalid_argument("unknown task '" + name + "'");
}

std::string task_to_string(Task task) {
  switch (task) {
    case Task::Bernoulli: return "classify";
    case Task::HeteroGauss: return "regress-hetero";
    case Task::LearnableGauss: return "regress-learnable";
    case Task::Gauss: return "regress-gauss";
  }
  return "?";
}

}  // namespace sfgp
