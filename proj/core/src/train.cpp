#include "sfgp/train.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace sfgp {

void adam_step(AdamState& state, Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (params.size() != grad.size() || params.size() != state.m.size()) {
    throw std::invalid_argument("adam_step: shape mismatch");
  }
  const AdamConfig& c = state.cfg;
  ++state.step;
  state.m = c.beta1 * state.m + (1.0 - c.beta1) * grad;
  state.v = c.beta2 * state.v.array().matrix() +
            (1.0 - c.beta2) * grad.array().square().matrix();
  const double bc1 = 1.0 - std::pow(c.beta1, state.step);
  const double bc2 = 1.0 - std::pow(c.beta2, state.step);
  params.array() += c.alpha * (state.m.array() / bc1) /
                    ((state.v.array() / bc2).sqrt() + c.eps);
}

FitResult fit(const Problem& problem, const Theta& init, const FitConfig& cfg) {
  problem.validate();
  const Layout lay = layout_for(problem);
  FitResult result;
  result.theta = pack(lay, init);
  AdamState adam(static_cast<int>(result.theta.size()), cfg.adam);
  double prev_elbo = 0.0;
  int calm_steps = 0;
  for (int step = 0; step < cfg.iters; ++step) {
    ValueGrad vg;
    try {
      vg = value_and_grad(problem, result.theta, init);
    } catch (const NumericalError& e) {
      throw NumericalError("fit: step " + std::to_string(step) + ": " + e.what(),
                           e.offending_block);
    } catch (const std::runtime_error& e) {
      // e.g. jitter escalation exhausted inside the Gram factorization
      throw NumericalError("fit: step " + std::to_string(step) + ": " + e.what());
    }
    const double gnorm = vg.grad.norm();
    if (cfg.clip_norm > 0.0 && gnorm > cfg.clip_norm) {
      vg.grad *= cfg.clip_norm / gnorm;
    }
    adam_step(adam, result.theta, vg.grad);
    result.elbo_trace.push_back(vg.value);
    if (cfg.record_grad_norm) result.grad_norm_trace.push_back(gnorm);
    result.jitter_used = vg.jitter_used;
    ++result.steps_run;
    if (step > 0 && std::abs(vg.value - prev_elbo) < cfg.early_stop_tol) {
      if (++calm_steps >= cfg.early_stop_patience) break;
    } else {
      calm_steps = 0;
    }
    prev_elbo = vg.value;
  }
  result.params = unpack(lay, result.theta, init);
  return result;
}

Eigen::VectorXd finite_diff_grad(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& theta, double h_scale) {
  Eigen::VectorXd grad(theta.size());
  Eigen::VectorXd probe = theta;
  for (Eigen::Index i = 0; i < theta.size(); ++i) {
    const double h = h_scale * std::max(1.0, std::abs(theta[i]));
    probe[i] = theta[i] + h;
    const double fp = f(probe);
    probe[i] = theta[i] - h;
    const double fm = f(probe);
    probe[i] = theta[i];
    grad[i] = (fp - fm) / (2.0 * h);
  }
  return grad;
}

}  // namespace sfgp
